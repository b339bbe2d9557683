import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stackelberg_observer.errors import NonSquare, NonSymmetric, NotPositiveDefinite, Singular
from stackelberg_observer.linalg import (
    cho_solve,
    cholesky,
    determinant,
    is_positive_definite,
    matrix_power_norms,
    power_stability,
    psd_project,
    solve_linear,
    spectral_norm,
    sym_eig,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(n_min=1, n_max=5):
    return st.integers(n_min, n_max).flatmap(lambda n: arrays(np.float64, (n, n), elements=finite))


def sym(M):
    return 0.5 * (M + M.T)


# -- cholesky -------------------------------------------------------------------

def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))


def test_cholesky_two_by_two():
    L = cholesky([[4.0, 2.0], [2.0, 3.0]])
    assert np.allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_rejects_nonsymmetric():
    with pytest.raises(NonSymmetric):
        cholesky([[1.0, 2.0], [0.0, 1.0]])


@settings(max_examples=200, derandomize=True, deadline=None)
@given(square(), st.floats(-3, 3))
def test_cholesky_agrees_with_smallest_eigenvalue(G, shift):
    M = sym(G @ G.T) / G.shape[0] - shift * np.eye(G.shape[0])
    lo = np.linalg.eigvalsh(M)[0]
    if abs(lo) < 1e-8 * max(1.0, np.abs(M).max()):
        return
    assert is_positive_definite(M) == (lo > 0)


@settings(max_examples=50, derandomize=True, deadline=None)
@given(square())
def test_cholesky_reconstructs(G):
    M = G @ G.T + np.eye(G.shape[0])
    L = cholesky(M)
    assert np.allclose(L @ L.T, M, rtol=0, atol=1e-10 * np.abs(M).max())
    assert np.allclose(L, np.linalg.cholesky(M), atol=1e-10 * math.sqrt(np.abs(M).max()))
    B = np.arange(G.shape[0], dtype=float)
    assert np.allclose(cho_solve(L, B).ravel(), np.linalg.solve(M, B), atol=1e-9)


# -- LU solve and determinant --------------------------------------------------------

def test_solve_identity():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(solve_linear(np.eye(2), B), B)


def test_solve_diagonal():
    assert np.allclose(solve_linear([[2.0, 0.0], [0.0, 4.0]], [[2.0], [8.0]]), [[1.0], [2.0]])


def test_solve_vector_rhs_keeps_shape():
    assert solve_linear(np.eye(3), np.ones(3)).shape == (3,)


def test_solve_singular():
    with pytest.raises(Singular):
        solve_linear([[1.0, 1.0], [1.0, 1.0]], [[1.0], [2.0]])


def test_solve_nonsquare():
    with pytest.raises(NonSquare):
        solve_linear(np.ones((2, 3)), np.ones((2, 1)))


@settings(max_examples=100, derandomize=True, deadline=None)
@given(square(), st.integers(0, 2**31 - 1))
def test_solve_matches_numpy(G, seed):
    A = G + 12.0 * np.eye(G.shape[0])
    B = np.random.default_rng(seed).standard_normal((G.shape[0], 2))
    X = solve_linear(A, B)
    assert np.abs(A @ X - B).max() <= 1e-10 * (1 + np.abs(B).max())
    assert np.allclose(X, np.linalg.solve(A, B), atol=1e-10)


def test_determinant_examples():
    assert determinant([[1.0, 2.0], [3.0, 4.0]]) == pytest.approx(-2.0, abs=1e-14)
    assert determinant([[1.0, 1.0], [1.0, 1.0]]) == 0.0


@settings(max_examples=100, derandomize=True, deadline=None)
@given(square())
def test_determinant_matches_numpy(M):
    ref = np.linalg.det(M)
    assert determinant(M) == pytest.approx(ref, rel=1e-9, abs=1e-9 * max(1.0, np.abs(M).max()) ** M.shape[0])


# -- symmetric eigenproblem ------------------------------------------------------------

def test_sym_eig_diagonal():
    w, V = sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.array_equal(w, [3.0, 2.0, 1.0])
    assert np.array_equal(np.abs(V), np.eye(3)[:, [0, 2, 1]])


def test_sym_eig_swap():
    w, _ = sym_eig([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(w, [1.0, -1.0], atol=1e-15)


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(NonSymmetric):
        sym_eig([[0.0, 1.0], [2.0, 0.0]])


@settings(max_examples=100, derandomize=True, deadline=None)
@given(square(1, 6))
def test_sym_eig_reconstruction_and_oracle(G):
    M = sym(G)
    w, V = sym_eig(M)
    scale = max(1.0, np.abs(M).max())
    assert np.abs(V @ np.diag(w) @ V.T - M).max() < 1e-10 * scale
    assert np.abs(V.T @ V - np.eye(M.shape[0])).max() < 1e-12
    off = V.T @ M @ V
    off -= np.diag(np.diag(off))
    assert np.abs(off).max() < 1e-11 * scale
    assert np.allclose(w, np.linalg.eigvalsh(M)[::-1], atol=1e-11 * scale)


# -- projection -----------------------------------------------------------------------

def test_psd_project_clamps():
    assert np.allclose(psd_project(np.diag([2.0, -1.0])), np.diag([2.0, 0.0]), atol=1e-15)
    assert np.allclose(psd_project([[0.0, 1.0], [1.0, 0.0]]), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


@settings(max_examples=50, derandomize=True, deadline=None)
@given(square(1, 5))
def test_psd_project_fixed_point_and_oracle(G):
    P = G @ G.T
    assert np.abs(psd_project(P) - P).max() <= 1e-12 * max(1.0, np.abs(P).max())
    M = sym(G)
    w, V = np.linalg.eigh(M)
    ref = (V * np.maximum(w, 0.25)) @ V.T
    assert np.allclose(psd_project(M, 0.25), ref, atol=1e-10 * max(1.0, np.abs(M).max()))


# -- norms and stability -------------------------------------------------------------------

def test_spectral_norm_examples():
    assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, rel=1e-12)
    assert spectral_norm(np.zeros((3, 3))) == 0.0
    assert spectral_norm([[0.0, 2.0], [0.0, 0.0]]) == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=150, derandomize=True, deadline=None)
@given(st.integers(1, 6).flatmap(lambda r: st.integers(1, 6).flatmap(
    lambda c: arrays(np.float64, (r, c), elements=finite))))
def test_spectral_norm_matches_svd(M):
    ref = np.linalg.norm(M, 2)
    assert spectral_norm(M) == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_power_stability_examples():
    assert power_stability(np.diag([0.5, 0.9])).kind == "stable"
    assert power_stability(np.diag([0.5, 0.9])).power == 1
    v = power_stability(np.diag([1.1, 0.2]))
    assert v.kind in ("diverged", "not_certified")
    assert power_stability(np.eye(3)).kind == "not_certified"
    assert power_stability(1.5 * np.eye(2)).kind == "diverged"


def test_power_stability_needs_powers_for_nonnormal():
    M = np.array([[0.9, 10.0], [0.0, 0.9]])
    v = power_stability(M)
    assert v.is_stable and v.power > 1
    assert np.linalg.norm(np.linalg.matrix_power(M, v.power), 2) < 1
    assert np.linalg.norm(np.linalg.matrix_power(M, v.power // 2), 2) >= 1


@settings(max_examples=100, derandomize=True, deadline=None)
@given(square(1, 4))
def test_power_stability_is_sound(M):
    v = power_stability(M)
    if v.is_stable:
        assert np.abs(np.linalg.eigvals(M)).max() < 1


def test_matrix_power_norms():
    M = np.array([[0.5, 1.0], [0.0, 0.5]])
    norms = matrix_power_norms(M, [0, 1, 3])
    ref = [np.linalg.norm(np.linalg.matrix_power(M, k), 2) for k in (0, 1, 3)]
    assert np.allclose(norms, ref, rtol=1e-12)
