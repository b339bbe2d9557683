import math

import numpy as np
import pytest

from stackelberg_observer.errors import DimensionMismatch, Infeasible, NotCertified
from stackelberg_observer.model import SystemModel
from stackelberg_observer.observer import (
    assemble_error_matrix,
    certify,
    design_observer,
    filter_riccati,
    lmi_matrix,
    lyapunov_defect,
    synthesize_dual_riccati,
    synthesize_lmi,
    user_design,
)

REF_L1 = np.array([[1.2364], [0.4246]])
REF_L2 = np.array([[0.0039], [0.1925]])


def spectral_radius(M):
    return np.abs(np.linalg.eigvals(M)).max()


def test_zero_gains_give_block_diagonal(example):
    m = example.model
    Z1, Z2 = np.zeros((1, 2)), np.zeros((1, 2))
    SA = assemble_error_matrix(m, Z1, Z2, np.zeros((2, 1)), np.zeros((2, 1)))
    assert np.array_equal(SA, np.block([[m.A, np.zeros((2, 2))], [np.zeros((2, 2)), m.A]]))


def test_error_matrix_blocks(example, example_solution):
    m, s = example.model, example_solution
    SA = assemble_error_matrix(m, s.K1, s.K2, REF_L1, REF_L2)
    assert np.array_equal(SA[:2, :2], m.A + m.B2 @ s.K2 - REF_L1 @ m.H1)
    assert np.array_equal(SA[:2, 2:], -m.B2 @ s.K2)
    assert np.array_equal(SA[2:, :2], -m.B1 @ s.K1)
    assert np.array_equal(SA[2:, 2:], m.A + m.B1 @ s.K1 - REF_L2 @ m.H2)


def test_error_matrix_linear_in_observer_gains(example, example_solution):
    m, s = example.model, example_solution
    A1 = assemble_error_matrix(m, s.K1, s.K2, REF_L1, REF_L2)
    A2 = assemble_error_matrix(m, s.K1, s.K2, 2 * REF_L1, 2 * REF_L2)
    D = np.zeros((4, 4))
    D[:2, :2] = REF_L1 @ m.H1
    D[2:, 2:] = REF_L2 @ m.H2
    assert np.allclose(A1 - A2, D, rtol=0, atol=1e-14)


def test_error_matrix_shape_checks(example, example_solution):
    with pytest.raises(DimensionMismatch):
        assemble_error_matrix(example.model, example_solution.K1, example_solution.K2, np.zeros((2, 2)), REF_L2)


def test_certify_examples():
    assert certify(np.eye(2)).kind == "not_certified"
    assert certify(1.5 * np.eye(2)).kind == "diverged"


def test_reference_gains_are_certified(example, example_solution):
    SA = assemble_error_matrix(example.model, example_solution.K1, example_solution.K2, REF_L1, REF_L2)
    assert certify(SA).is_stable
    assert spectral_radius(SA) < 1


def test_lmi_design_on_example(example, example_solution, example_design):
    d = example_design
    cert = d.certificate
    assert d.method == "lmi" and d.verdict.is_stable
    assert cert.lmi_max_eig <= -cert.margin / 2
    G = lmi_matrix(example.model, example_solution.K1, example_solution.K2, cert.P1, cert.P2, cert.W1, cert.W2)
    assert np.linalg.eigvalsh(0.5 * (G + G.T)).max() <= -cert.margin / 2
    assert np.linalg.eigvalsh(cert.P1).min() > 0 and np.linalg.eigvalsh(cert.P2).min() > 0
    assert np.abs(cert.P1 @ d.L1 - cert.W1).max() < 1e-9
    assert np.abs(cert.P2 @ d.L2 - cert.W2).max() < 1e-9
    assert lyapunov_defect(d) < 0
    assert spectral_radius(d.script_A) < 1


def test_lmi_trivially_feasible_case():
    m = SystemModel([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[1.0]])
    d = synthesize_lmi(m, np.zeros((1, 1)), np.zeros((1, 1)))
    assert d.verdict.is_stable
    assert spectral_radius(d.script_A) < 1


def test_lmi_unobservable_unstable_is_infeasible():
    m = SystemModel([[2.0]], [[1.0]], [[1.0]], [[0.0]], [[0.0]])
    with pytest.raises(Infeasible):
        synthesize_lmi(m, np.zeros((1, 1)), np.zeros((1, 1)))


def test_shared_lyapunov_block_is_reported_infeasible_on_example(example, example_solution):
    s = example_solution
    with pytest.raises(Infeasible):
        synthesize_lmi(example.model, s.K1, s.K2, shared=True, max_iter=300)


def test_error_recursion_decays_from_random_starts(example_design, rng):
    SA = example_design.script_A
    w = example_design.verdict.power
    c0 = max(np.linalg.norm(np.linalg.matrix_power(SA, k), 2) for k in range(w))
    rate = np.linalg.norm(np.linalg.matrix_power(SA, w), 2)
    horizon = w * (math.ceil(math.log(1e-8 / max(c0, 1.0)) / math.log(rate)) + 1)
    for _ in range(100):
        e0 = rng.standard_normal(4)
        e = np.linalg.matrix_power(SA, horizon) @ e0
        assert np.linalg.norm(e) < 1e-8 * np.linalg.norm(e0)


def test_filter_riccati_scalar_closed_form():
    # X = 4X - 4X^2/(X+1) + 1  <=>  X^2 - 4X - 1 = 0
    X_ref = 2.0 + math.sqrt(5.0)
    X, L = filter_riccati([[2.0]], [[1.0]])
    assert X[0, 0] == pytest.approx(X_ref, rel=1e-12)
    assert L[0, 0] == pytest.approx(2.0 * X_ref / (X_ref + 1.0), rel=1e-12)
    assert L[0, 0] == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0, rel=1e-12)
    assert abs(2.0 - L[0, 0]) < 1

    x = 0.0
    for _ in range(200):
        x = 4 * x - 4 * x * x / (x + 1) + 1
    assert x == pytest.approx(X_ref, rel=1e-12)


def test_dual_riccati_decoupled_case_is_certified():
    m = SystemModel([[1.2, 0.3], [0.0, 0.8]], np.zeros((2, 1)), np.zeros((2, 1)), [[1.0, 0.0]], [[1.0, 1.0]])
    d = synthesize_dual_riccati(m, np.zeros((1, 2)), np.zeros((1, 2)))
    assert d.verdict.is_stable and d.method == "dual-riccati"


def test_dual_riccati_on_example(example, example_solution):
    d = synthesize_dual_riccati(example.model, example_solution.K1, example_solution.K2)
    assert d.verdict.is_stable
    assert spectral_radius(d.script_A) < 1


def test_user_design_rejects_destabilizing_gains(example, example_solution):
    with pytest.raises(NotCertified):
        user_design(example.model, example_solution.K1, example_solution.K2, -5 * REF_L1, REF_L2)


def test_auto_prefers_lmi(example, example_solution):
    d = design_observer(example.model, example_solution.K1, example_solution.K2)
    assert d.method == "lmi"


def test_stacked_leader_output_extension(example, example_solution):
    m = example.model.with_stacked_leader_output()
    d = synthesize_lmi(m, example_solution.K1, example_solution.K2)
    assert d.L2.shape == (2, 2)
    assert d.verdict.is_stable
