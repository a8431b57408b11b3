"""Mixed block/trend model: trend polynomial, covariance reduction and
information matrices.

All information matrices are returned in units where the error variance
``sigma0_eps2`` equals one; divide by it to recover the actual matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateModelError,
    InvalidParameterError,
    SingularCovarianceError,
)

ALGEBRA_TOL = 1e-10
PSD_TOL = 1e-8


def phi_vector(k: int) -> np.ndarray:
    """Linear orthonormal polynomial on positions ``1..k``."""
    if int(k) != k or k < 2:
        raise InvalidParameterError(f"invalid block size k={k}; need k >= 2")
    k = int(k)
    p = np.arange(1, k + 1, dtype=float)
    return math.sqrt(3.0 / (k * (k * k - 1))) * (2 * p - k - 1)


def phi_squared(k: int, p: int) -> float:
    """phi(p)**2 for block size k, computed without a square root."""
    return 3.0 * (2 * p - k - 1) ** 2 / (k * (k * k - 1))


def validate_lambdas(k: int, lambda0: float, lambda1: float) -> None:
    if k < 2:
        raise InvalidParameterError(f"invalid block size k={k}; need k >= 2")
    if not (0.0 <= lambda0 <= 1.0 / k + 1e-15):
        raise InvalidParameterError(
            f"lambda0={lambda0} outside [0, 1/k] for k={k}"
        )
    if not (0.0 <= lambda1 <= 1.0 + 1e-15):
        raise InvalidParameterError(f"lambda1={lambda1} outside [0, 1]")


def lambdas_from_components(sigma0_eps2, sigma0_beta2, sigma0_theta2, k):
    """Map bound variance components to ``(lambda0, lambda1)``.

    ``math.inf`` (or the string ``"inf"``) is accepted for the block and
    slope components and maps to the boundary values 1/k and 1.
    """
    sigma0_eps2 = float(sigma0_eps2)
    sigma0_beta2 = float(sigma0_beta2)
    sigma0_theta2 = float(sigma0_theta2)
    if not sigma0_eps2 > 0 or math.isinf(sigma0_eps2):
        raise InvalidParameterError("sigma0_eps2 must be finite and > 0")
    if sigma0_beta2 < 0 or sigma0_theta2 < 0:
        raise InvalidParameterError("variance components must be >= 0")
    if k < 2:
        raise InvalidParameterError(f"invalid block size k={k}; need k >= 2")
    if math.isinf(sigma0_beta2):
        lambda0 = 1.0 / k
    else:
        lambda0 = sigma0_beta2 / (sigma0_eps2 + k * sigma0_beta2)
    if math.isinf(sigma0_theta2):
        lambda1 = 1.0
    else:
        lambda1 = sigma0_theta2 / (sigma0_eps2 + sigma0_theta2)
    return lambda0, lambda1


@dataclass(frozen=True)
class ModelParams:
    k: int
    lambda0: float
    lambda1: float
    sigma0_eps2: float | None = None
    sigma0_beta2: float | None = None
    sigma0_theta2: float | None = None

    def __post_init__(self):
        validate_lambdas(self.k, self.lambda0, self.lambda1)
        comps = (self.sigma0_eps2, self.sigma0_beta2, self.sigma0_theta2)
        if any(c is not None for c in comps):
            if any(c is None for c in comps):
                raise InvalidParameterError(
                    "variance components must be given all together"
                )
            l0, l1 = lambdas_from_components(*comps, self.k)
            if abs(l0 - self.lambda0) > 1e-9 or abs(l1 - self.lambda1) > 1e-9:
                raise InvalidParameterError(
                    "lambdas inconsistent with the variance components"
                )

    @classmethod
    def from_components(cls, k, sigma0_eps2, sigma0_beta2, sigma0_theta2):
        l0, l1 = lambdas_from_components(
            sigma0_eps2, sigma0_beta2, sigma0_theta2, k
        )
        return cls(
            k, l0, l1, float(sigma0_eps2), float(sigma0_beta2),
            float(sigma0_theta2),
        )


def w_matrix(k: int, lambda0: float, lambda1: float) -> np.ndarray:
    validate_lambdas(k, lambda0, lambda1)
    phi = phi_vector(k)
    return np.eye(k) - lambda0 * np.ones((k, k)) - lambda1 * np.outer(phi, phi)


@dataclass(frozen=True)
class DesignArray:
    """A block design as a k x b array of treatment labels in ``1..v``.

    Cell ``(p, j)`` holds the treatment applied to unit ``p`` of block ``j``.
    """

    v: int
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64)
        if cells.ndim != 2:
            raise InvalidParameterError("design cells must be a k x b matrix")
        if self.v < 1:
            raise InvalidParameterError("v must be positive")
        if cells.size and (cells.min() < 1 or cells.max() > self.v):
            raise InvalidParameterError(
                f"design entries must lie in 1..{self.v}"
            )
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def k(self) -> int:
        return self.cells.shape[0]

    @property
    def b(self) -> int:
        return self.cells.shape[1]

    def incidence_blocks(self) -> np.ndarray:
        """Stack of unit x treatment incidence matrices, shape (b, k, v)."""
        onehot = self.cells.T[:, :, None] == np.arange(1, self.v + 1)
        return onehot.astype(float)

    @property
    def replication(self) -> np.ndarray:
        return np.bincount(self.cells.ravel() - 1, minlength=self.v)

    @property
    def treatment_block_incidence(self) -> np.ndarray:
        """N_d, the v x b treatment-by-block count matrix."""
        return self.incidence_blocks().sum(axis=1).T

    @property
    def treatment_unit_incidence(self) -> np.ndarray:
        """M_d, the v x k treatment-by-position count matrix."""
        return self.incidence_blocks().sum(axis=0).T

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.cells[:, j])


def _check_design(d: DesignArray) -> None:
    if d.k < 2:
        raise InvalidParameterError("designs need at least 2 units per block")


def minimal_info_matrix(d: DesignArray, lambda0: float, lambda1: float):
    """Minimal (maximin) information matrix, assembled block by block."""
    _check_design(d)
    k, b = d.k, d.b
    W = w_matrix(k, lambda0, lambda1)
    X = d.incidence_blocks()
    r = d.replication.astype(float)
    mphi = d.treatment_unit_incidence @ phi_vector(k)
    C = np.einsum("jpi,pq,jqr->ir", X, W, X)
    C -= (1 - k * lambda0) / (b * k) * np.outer(r, r)
    C -= (1 - lambda1) / b * np.outer(mphi, mphi)
    return (C + C.T) / 2


def minimal_info_matrix_expanded(d: DesignArray, lambda0, lambda1):
    """Same matrix as :func:`minimal_info_matrix`, via the incidence form
    R - l0 N N' - l1 sum X'phi phi'X - ... .
    """
    _check_design(d)
    validate_lambdas(d.k, lambda0, lambda1)
    k, b = d.k, d.b
    phi = phi_vector(k)
    r = d.replication.astype(float)
    N = d.treatment_block_incidence
    xphi = d.incidence_blocks().transpose(0, 2, 1) @ phi  # (b, v)
    mphi = d.treatment_unit_incidence @ phi
    C = np.diag(r) - lambda0 * N @ N.T - lambda1 * xphi.T @ xphi
    C -= (1 - k * lambda0) / (b * k) * np.outer(r, r)
    C -= (1 - lambda1) / b * np.outer(mphi, mphi)
    return C


def _fixed_effects_z(k: int) -> np.ndarray:
    return np.column_stack([np.ones(k), phi_vector(k)])


def full_info_matrix(d: DesignArray, sigma) -> np.ndarray:
    """Information matrix for the treatment effects under V = I_b (x) sigma.

    sigma must be positive definite; for singular sigma use
    :func:`full_info_matrix_projector`.
    """
    _check_design(d)
    sigma = np.asarray(sigma, dtype=float)
    k = d.k
    if sigma.shape != (k, k):
        raise InvalidParameterError(f"sigma must be {k} x {k}")
    try:
        chol = np.linalg.cholesky((sigma + sigma.T) / 2)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            "sigma is not positive definite; use full_info_matrix_projector"
        ) from None
    sigma_inv = np.linalg.inv(chol).T @ np.linalg.inv(chol)
    X = d.incidence_blocks()
    Z0 = _fixed_effects_z(k)
    xvx = np.einsum("jpi,pq,jqr->ir", X, sigma_inv, X)
    xvz = np.einsum("jpi,pq,qc->ic", X, sigma_inv, Z0)
    zvz = d.b * Z0.T @ sigma_inv @ Z0
    if np.linalg.cond(zvz) > 1e12:
        raise DegenerateModelError("Z'V^-1 Z is singular")
    C = xvx - xvz @ np.linalg.solve(zvz, xvz.T)
    return (C + C.T) / 2


def full_info_matrix_projector(d: DesignArray, sigma) -> np.ndarray:
    """X'Q (QVQ)^+ Q X with a Moore-Penrose inverse; cross-check only."""
    _check_design(d)
    sigma = np.asarray(sigma, dtype=float)
    k, b = d.k, d.b
    n = b * k
    X = d.incidence_blocks().reshape(n, d.v)
    Z = np.tile(_fixed_effects_z(k), (b, 1))
    Q = np.eye(n) - Z @ np.linalg.pinv(Z)
    V = np.kron(np.eye(b), sigma)
    QX = Q @ X
    C = QX.T @ np.linalg.pinv(Q @ V @ Q, rcond=1e-10, hermitian=True) @ QX
    return (C + C.T) / 2


def sigma_upper_bound(sigma0_eps2, sigma0_beta2, sigma0_theta2, k):
    if sigma0_eps2 <= 0:
        raise InvalidParameterError("sigma0_eps2 must be > 0")
    if sigma0_beta2 < 0 or sigma0_theta2 < 0:
        raise InvalidParameterError("variance components must be >= 0")
    phi = phi_vector(k)
    return (
        sigma0_eps2 * np.eye(k)
        + sigma0_beta2 * np.ones((k, k))
        + sigma0_theta2 * np.outer(phi, phi)
    )


def bound_component_intervals(e_max_a, sigma_beta_a2, sigma_theta_a2):
    """Admissible ranges ``[x, 4x]`` for the three bound components, from
    the assumed eigenvalue/variance values."""
    return {
        "sigma0_eps2": (e_max_a, 4 * e_max_a),
        "sigma0_beta2": (sigma_beta_a2, 4 * sigma_beta_a2),
        "sigma0_theta2": (sigma_theta_a2, 4 * sigma_theta_a2),
    }


def components_within_intervals(
    sigma0_eps2, sigma0_beta2, sigma0_theta2,
    e_max_a, sigma_beta_a2, sigma_theta_a2,
):
    intervals = bound_component_intervals(e_max_a, sigma_beta_a2, sigma_theta_a2)
    values = {
        "sigma0_eps2": sigma0_eps2,
        "sigma0_beta2": sigma0_beta2,
        "sigma0_theta2": sigma0_theta2,
    }
    return all(lo <= values[name] <= hi for name, (lo, hi) in intervals.items())


@dataclass(frozen=True)
class CovarianceMatrixSet:
    """Per-block covariance components of the mixed model."""

    k: int
    sigma_beta2: float = 0.0
    sigma_theta2: float = 0.0
    sigma_beta_theta: float = 0.0
    v_delta_beta: np.ndarray | None = None
    v_delta_theta: np.ndarray | None = None
    v_delta_delta: np.ndarray | None = None

    def sigma(self) -> np.ndarray:
        k = self.k
        one = np.ones(k)
        phi = phi_vector(k)
        vdb = np.zeros(k) if self.v_delta_beta is None else np.asarray(self.v_delta_beta, float)
        vdt = np.zeros(k) if self.v_delta_theta is None else np.asarray(self.v_delta_theta, float)
        vdd = np.eye(k) if self.v_delta_delta is None else np.asarray(self.v_delta_delta, float)
        S = (
            self.sigma_beta2 * np.outer(one, one)
            + self.sigma_theta2 * np.outer(phi, phi)
            + vdd
            + self.sigma_beta_theta * (np.outer(one, phi) + np.outer(phi, one))
            + (np.outer(one, vdb) + np.outer(vdb, one))
            + (np.outer(phi, vdt) + np.outer(vdt, phi))
        )
        if not is_psd(S):
            raise InvalidParameterError("assembled covariance is not PSD")
        return S


def _scale(*mats) -> float:
    return max([1.0] + [float(np.max(np.abs(m))) for m in mats if np.size(m)])


def is_psd(A, tol: float = PSD_TOL) -> bool:
    A = np.asarray(A, dtype=float)
    return bool(np.linalg.eigvalsh((A + A.T) / 2).min() >= -tol * _scale(A))


def loewner_geq(A, B, tol: float = PSD_TOL) -> bool:
    """True iff A - B is nonnegative definite (relative tolerance)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameterError(f"shape mismatch: {A.shape} vs {B.shape}")
    D = A - B
    return bool(np.linalg.eigvalsh((D + D.T) / 2).min() >= -tol * _scale(A, B))


def is_completely_symmetric(M, tol: float = ALGEBRA_TOL) -> bool:
    """True iff M = a I + c J, i.e. constant diagonal and constant off-diagonal."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    n = M.shape[0]
    diag = np.diag(M)
    if np.ptp(diag) > tol:
        return False
    if n < 2:
        return True
    off = M[~np.eye(n, dtype=bool)]
    return bool(np.ptp(off) <= tol)


def sample_admissible_sigma(bound, rng, shrink=None, iters=60):
    """Random covariance ``bound - c E`` with E a random PSD matrix.

    c is found by bisection as the largest value keeping the result PSD,
    then scaled by ``shrink`` (uniform on (0, 1) when None), so the sample is
    PSD and dominated by ``bound`` in the Loewner order.
    """
    bound = np.asarray(bound, dtype=float)
    k = bound.shape[0]
    G = rng.standard_normal((k, k))
    E = G @ G.T
    E /= np.linalg.norm(E, 2)
    lo, hi = 0.0, float(np.linalg.eigvalsh(bound).max()) * 2 + 1.0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if np.linalg.eigvalsh(bound - mid * E).min() >= 0:
            lo = mid
        else:
            hi = mid
    if shrink is None:
        shrink = rng.uniform(0.05, 0.95)
    S = bound - shrink * lo * E
    return (S + S.T) / 2
