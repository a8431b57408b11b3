"""Design documents, CSV/JSON writers and stable number formatting."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .model import DesignArray

SCHEMA_VERSION = "1.0"
SIG_DIGITS = 12

_number_or_inf = {"oneOf": [{"type": "number"}, {"const": "inf"}]}

DESIGN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Block design document",
    "type": "object",
    "required": ["schema_version", "v", "b", "k", "lambda0", "lambda1",
                 "order", "cells"],
    "properties": {
        "schema_version": {"type": "string"},
        "v": {"type": "integer", "minimum": 2},
        "b": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 2},
        "lambda0": {"type": "number", "minimum": 0},
        "lambda1": {"type": "number", "minimum": 0, "maximum": 1},
        "variance_components": {
            "type": ["object", "null"],
            "required": ["sigma0_eps2", "sigma0_beta2", "sigma0_theta2"],
            "properties": {
                "sigma0_eps2": {"type": "number", "exclusiveMinimum": 0},
                "sigma0_beta2": _number_or_inf,
                "sigma0_theta2": _number_or_inf,
            },
            "additionalProperties": False,
        },
        "order": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "cells": {
            "type": "array",
            "items": {"type": "array",
                      "items": {"type": "integer", "minimum": 1}},
        },
        "certificate": {"type": ["object", "null"]},
    },
    "additionalProperties": False,
}


class ExactFloat(float):
    """A float that :func:`stable` leaves at full precision (model inputs)."""


def stable(obj):
    """Round floats to 12 significant digits, recursively; numpy -> builtin."""
    if isinstance(obj, ExactFloat):
        return obj
    if isinstance(obj, dict):
        return {str(k): stable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [stable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return stable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            return 0.0
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(stable(obj), sort_keys=True, indent=2) + "\n"


def matrix_to_csv(M) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(np.asarray(M)):
        writer.writerow([stable(x) if isinstance(x, (float, np.floating)) else int(x)
                         for x in row])
    return buf.getvalue()


def read_csv_matrix(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    try:
        return np.array([[int(x) for x in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise InvalidParameterError(f"CSV cells must be integers: {exc}") from None


def design_document(d: DesignArray, lambda0, lambda1, variance_components=None,
                    certificate=None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "v": d.v,
        "b": d.b,
        "k": d.k,
        "lambda0": ExactFloat(lambda0),
        "lambda1": ExactFloat(lambda1),
        "variance_components": None if variance_components is None else {
            name: ExactFloat(x) if math.isfinite(x) else "inf"
            for name, x in variance_components.items()
        },
        "order": list(d.column(0)),
        "cells": d.cells.tolist(),
        "certificate": certificate,
    }
    return stable(doc)


def validate_document(doc: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(doc, DESIGN_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InvalidParameterError(f"schema violation: {exc.message}") from None
    cells = np.asarray(doc["cells"])
    if cells.ndim != 2 or cells.shape != (doc["k"], doc["b"]):
        raise InvalidParameterError(
            f"cells must be a k x b = {doc['k']} x {doc['b']} matrix"
        )
    if cells.max() > doc["v"]:
        raise InvalidParameterError("cells reference treatments beyond v")
    if list(cells[:, 0]) != list(doc["order"]):
        raise InvalidParameterError("order must equal the first block")


def design_from_document(doc: dict) -> DesignArray:
    validate_document(doc)
    return DesignArray(doc["v"], np.asarray(doc["cells"]))


def load_design(path, v: int | None = None):
    """Read a design from a JSON document or a CSV of cells.

    Returns ``(design, doc)``; ``doc`` is None for CSV input.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        cells = read_csv_matrix(text)
        return DesignArray(int(v or cells.max()), cells), None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{path}: invalid JSON ({exc})") from None
    return design_from_document(doc), doc
