import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trendblock.builder import build_optimal_design
from trendblock.errors import InvalidParameterError, SingularCovarianceError
from trendblock.model import (
    CovarianceMatrixSet,
    DesignArray,
    ModelParams,
    components_within_intervals,
    full_info_matrix,
    full_info_matrix_projector,
    is_completely_symmetric,
    is_psd,
    lambdas_from_components,
    loewner_geq,
    minimal_info_matrix,
    minimal_info_matrix_expanded,
    phi_vector,
    sample_admissible_sigma,
    sigma_upper_bound,
    w_matrix,
)
from trendblock.orders import pi_q

from conftest import random_design


def test_phi_k4_squares():
    phi = phi_vector(4)
    assert phi[0] ** 2 == pytest.approx(9 / 20, abs=1e-15)
    assert phi[1] ** 2 == pytest.approx(1 / 20, abs=1e-15)


def test_phi_k3():
    np.testing.assert_allclose(phi_vector(3), [-1 / math.sqrt(2), 0, 1 / math.sqrt(2)],
                               atol=1e-15)


def test_phi_k8_middle():
    # exact rational evaluation of 3(2p-k-1)^2 / (k(k^2-1)) at p=4
    exact = Fraction(3 * (2 * 4 - 8 - 1) ** 2, 8 * (64 - 1))
    assert exact == Fraction(1, 168)
    assert phi_vector(8)[3] ** 2 == pytest.approx(1 / 168, abs=1e-15)


@pytest.mark.parametrize("k", range(2, 65))
def test_phi_orthonormal(k):
    phi = phi_vector(k)
    assert abs(phi.sum()) <= 1e-12
    assert abs((phi**2).sum() - 1) <= 1e-12


@pytest.mark.parametrize("k", [0, 1, -3])
def test_phi_rejects_small_k(k):
    with pytest.raises(InvalidParameterError):
        phi_vector(k)


def test_lambdas_special_cases():
    assert lambdas_from_components(1, 0, 0, 4) == (0.0, 0.0)
    assert lambdas_from_components(2.0, math.inf, math.inf, 4) == (0.25, 1.0)
    assert lambdas_from_components(1, "inf", 0, 5)[0] == pytest.approx(0.2)
    assert lambdas_from_components(3.0, 0, 3.0, 4)[1] == 0.5


def test_lambdas_reject_nonpositive_error_variance():
    with pytest.raises(InvalidParameterError):
        lambdas_from_components(0, 1, 1, 4)
    with pytest.raises(InvalidParameterError):
        lambdas_from_components(1, -1, 1, 4)


@given(st.floats(1e-3, 1e3), st.floats(0, 1e3), st.floats(0, 1e3),
       st.integers(2, 30))
def test_lambdas_in_range(e, bb, th, k):
    l0, l1 = lambdas_from_components(e, bb, th, k)
    assert 0 <= l0 <= 1 / k
    assert 0 <= l1 <= 1


def test_model_params_consistency():
    p = ModelParams.from_components(4, 1.0, 1.0, 1.0)
    assert p.lambda0 == pytest.approx(0.2)
    with pytest.raises(InvalidParameterError):
        ModelParams(4, 0.1, 0.5, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(4, 0.3, 0.5)


def test_w_identity_case():
    np.testing.assert_array_equal(w_matrix(5, 0, 0), np.eye(5))


def test_w_projector_case():
    for k in (3, 4, 7):
        eig = np.sort(np.linalg.eigvalsh(w_matrix(k, 1 / k, 1)))
        np.testing.assert_allclose(eig, [0, 0] + [1] * (k - 2), atol=1e-12)


def test_w_entries_k4():
    # phi(1) phi(2) = (-3)(-1)/20, so w_12 = -1/4 - 3/20
    W = w_matrix(4, 1 / 4, 1)
    assert W[0, 1] == pytest.approx(-2 / 5, abs=1e-15)
    assert W[1, 2] == pytest.approx(-1 / 4 + 1 / 20, abs=1e-15)
    assert W[0, 3] == pytest.approx(-1 / 4 + 9 / 20, abs=1e-15)


def test_w_rejects_bad_lambda():
    with pytest.raises(InvalidParameterError):
        w_matrix(4, 0.3, 0.5)
    with pytest.raises(InvalidParameterError):
        w_matrix(4, 0.1, 1.5)


@given(st.integers(2, 20), st.floats(0, 1), st.floats(0, 1))
def test_w_spectral_identities(k, a, l1):
    l0 = a / k
    W = w_matrix(k, l0, l1)
    phi = phi_vector(k)
    np.testing.assert_allclose(W @ np.ones(k), (1 - k * l0) * np.ones(k), atol=1e-12)
    np.testing.assert_allclose(W @ phi, (1 - l1) * phi, atol=1e-12)
    assert np.array_equal(W, W.T)


def test_design_incidence_views(rng):
    d = random_design(rng, 5, 4, 9)
    r = d.replication
    assert r.sum() == d.b * d.k
    np.testing.assert_array_equal(d.treatment_block_incidence.sum(axis=1), r)
    np.testing.assert_array_equal(d.treatment_unit_incidence.sum(axis=1), r)
    np.testing.assert_array_equal(d.treatment_unit_incidence.sum(axis=0), [9] * 4)


def test_design_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        DesignArray(3, [[1, 4], [2, 2]])


def test_min_info_trace_pi2():
    order = pi_q(4, 2)
    cells = np.tile(np.array(order)[:, None], (1, 21))
    # every block the same order is enough for the trace of the block term,
    # but balance needs the built design
    rep = build_optimal_design(7, 21, 4, 0.0, 1.0)
    assert rep.order == order
    C = minimal_info_matrix(rep.design, 0.0, 1.0)
    assert np.trace(C) == pytest.approx(21 * (17 / 7 + 1), abs=1e-9)
    assert cells.shape == rep.design.cells.shape


def test_min_info_w_identity_specialisation(rng):
    d = random_design(rng, 4, 5, 6)
    phi = phi_vector(5)
    r = d.replication.astype(float)
    mphi = d.treatment_unit_incidence @ phi
    expected = np.diag(r) - np.outer(r, r) / (6 * 5) - np.outer(mphi, mphi) / 6
    np.testing.assert_allclose(minimal_info_matrix(d, 0, 0), expected, atol=1e-12)


def test_min_info_forms_agree(rng):
    for _ in range(200):
        v = int(rng.integers(2, 7))
        k = int(rng.integers(2, 8))
        b = int(rng.integers(1, 9))
        l0 = rng.uniform(0, 1 / k)
        l1 = rng.uniform(0, 1)
        d = random_design(rng, v, k, b)
        A = minimal_info_matrix(d, l0, l1)
        B = minimal_info_matrix_expanded(d, l0, l1)
        assert np.max(np.abs(A - B)) <= 1e-10
        assert np.max(np.abs(A @ np.ones(v))) <= 1e-10


def test_full_info_single_block_is_zero():
    d = DesignArray(2, [[1], [2]])
    np.testing.assert_allclose(full_info_matrix(d, np.eye(2)), np.zeros((2, 2)),
                               atol=1e-12)


def test_full_info_at_bound_equals_minimal(rng):
    for _ in range(20):
        v, k, b = int(rng.integers(2, 6)), int(rng.integers(2, 7)), int(rng.integers(2, 6))
        e, bb, th = rng.uniform(0.2, 3), rng.uniform(0, 3), rng.uniform(0, 3)
        d = random_design(rng, v, k, b)
        l0, l1 = lambdas_from_components(e, bb, th, k)
        C = full_info_matrix(d, sigma_upper_bound(e, bb, th, k))
        CL = minimal_info_matrix(d, l0, l1) / e
        assert np.max(np.abs(C - CL)) <= 1e-9
        assert np.max(np.abs(C @ np.ones(v))) <= 1e-10


def test_full_info_projector_cross_check(rng):
    for _ in range(10):
        d = random_design(rng, 4, 5, 4)
        S = sample_admissible_sigma(sigma_upper_bound(1.0, 0.7, 2.0, 5), rng)
        np.testing.assert_allclose(full_info_matrix(d, S),
                                   full_info_matrix_projector(d, S), atol=1e-8)


def test_full_info_singular_sigma():
    d = DesignArray(3, [[1, 2], [2, 3], [3, 1]])
    with pytest.raises(SingularCovarianceError):
        full_info_matrix(d, np.ones((3, 3)))
    # the projector form still answers
    C = full_info_matrix_projector(d, np.ones((3, 3)) + np.diag([0, 0, 0.0]))
    assert C.shape == (3, 3)


def test_bound_dominance_monte_carlo(rng):
    for _ in range(3):
        d = random_design(rng, 4, 4, 5)
        e, bb, th = 1.3, 0.8, 2.1
        bound = sigma_upper_bound(e, bb, th, 4)
        CL = minimal_info_matrix(d, *lambdas_from_components(e, bb, th, 4)) / e
        for _ in range(40):
            S = sample_admissible_sigma(bound, rng)
            assert is_psd(S) and loewner_geq(bound, S)
            assert loewner_geq(full_info_matrix(d, S), CL, 1e-8)


def test_sigma_upper_bound_examples():
    np.testing.assert_array_equal(sigma_upper_bound(1, 0, 0, 4), np.eye(4))
    B = sigma_upper_bound(1, 1, 1, 3)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(B)), [1, 2, 4], atol=1e-12)
    np.testing.assert_allclose(B @ np.ones(3), 4 * np.ones(3), atol=1e-12)
    np.testing.assert_allclose(B @ phi_vector(3), 2 * phi_vector(3), atol=1e-12)
    with pytest.raises(InvalidParameterError):
        sigma_upper_bound(1, -1, 0, 3)


def test_bound_component_intervals():
    assert components_within_intervals(2.0, 1.0, 4.0, 1.0, 0.5, 1.0)
    assert components_within_intervals(4.0, 2.0, 4.0, 1.0, 0.5, 1.0)
    assert not components_within_intervals(4.5, 1.0, 1.0, 1.0, 0.5, 1.0)
    assert not components_within_intervals(2.0, 0.4, 1.0, 1.0, 0.5, 1.0)


def test_covariance_set_assembly():
    k = 4
    cs = CovarianceMatrixSet(k, sigma_beta2=1.0, sigma_theta2=0.5)
    np.testing.assert_allclose(cs.sigma(), sigma_upper_bound(1.0, 1.0, 0.5, k))
    phi = phi_vector(k)
    vdb = 0.1 * np.ones(k)
    cs2 = CovarianceMatrixSet(k, 1.0, 0.5, 0.2, vdb, None, 2 * np.eye(k))
    S = cs2.sigma()
    expected = (np.ones((k, k)) + 0.5 * np.outer(phi, phi) + 2 * np.eye(k)
                + 0.2 * (np.outer(np.ones(k), phi) + np.outer(phi, np.ones(k)))
                + 0.2 * np.ones((k, k)))
    np.testing.assert_allclose(S, expected)
    with pytest.raises(InvalidParameterError):
        CovarianceMatrixSet(k, -5.0).sigma()


def test_completely_symmetric():
    assert is_completely_symmetric(np.eye(4))
    assert not is_completely_symmetric(np.diag([1.0, 2.0]))
    assert is_completely_symmetric(3 * np.eye(3) - np.ones((3, 3)))
    rep = build_optimal_design(3, 3, 3, 0.1, 0.5)
    assert is_completely_symmetric(minimal_info_matrix(rep.design, 0.1, 0.5))


def test_loewner_geq_basic():
    assert loewner_geq(np.eye(3), np.zeros((3, 3)))
    assert not loewner_geq(np.zeros((3, 3)), np.eye(3))
    with pytest.raises(InvalidParameterError):
        loewner_geq(np.eye(2), np.eye(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(2, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_min_info_psd_zero_rowsum(v, k, b, seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, v, k, b)
    C = minimal_info_matrix(d, rng.uniform(0, 1 / k), rng.uniform(0, 1))
    assert np.allclose(C, C.T)
    assert np.max(np.abs(C.sum(axis=1))) <= 1e-10
    assert is_psd(C)
