"""Dense real-matrix numerics.

Small, dependency-light kernels shared by the rest of the package:
Cholesky and LU factorizations, a cyclic Jacobi symmetric eigensolver,
projection onto the shifted PSD cone, the spectral norm by power iteration,
and a Schur-stability certificate built from norms of repeated squares.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Nothing here
calls ``numpy.linalg``; the test-suite uses it as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonSquare, NonSymmetric, NotPositiveDefinite, Singular

SYMMETRY_RTOL = 1e-12
SINGULAR_RTOL = 1e-13


def as_matrix(M, name="matrix") -> np.ndarray:
    """Coerce ``M`` to a finite 2-D float array (1-D input becomes a column)."""
    a = np.array(M, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a 2-D array, got ndim={a.ndim}")
    if a.size == 0:
        raise DimensionMismatch(f"{name}: empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: entries must be finite")
    return a


def _require_square(M, name="matrix"):
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name}: expected a square matrix, got {M.shape}")


def is_symmetric(M, rtol=SYMMETRY_RTOL) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = np.max(np.abs(M)) if M.size else 0.0
    return bool(np.max(np.abs(M - M.T)) <= rtol * scale)


def _require_symmetric(M, name="matrix"):
    _require_square(M, name)
    if not is_symmetric(M):
        raise NonSymmetric(f"{name}: not symmetric within relative tolerance {SYMMETRY_RTOL}")


def _fro(M) -> float:
    return math.sqrt(float(np.sum(np.square(M))))


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


# -- factorizations -------------------------------------------------------------

def cholesky(M) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == M``.

    Doubles as the positive-definiteness test: a non-positive pivot raises
    :class:`NotPositiveDefinite`.
    """
    M = as_matrix(M)
    _require_symmetric(M)
    n = M.shape[0]
    L = np.zeros_like(M)
    for j in range(n):
        d = M[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:
            raise NotPositiveDefinite(f"pivot {j} is {d:.3e}")
        L[j, j] = math.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_definite(M) -> bool:
    try:
        cholesky(M)
    except NotPositiveDefinite:
        return False
    return True


def cho_solve(L, B) -> np.ndarray:
    """Solve ``(L L^T) X = B`` given the Cholesky factor ``L``."""
    L = np.asarray(L, dtype=float)
    B = as_matrix(B)
    n = L.shape[0]
    if B.shape[0] != n:
        raise DimensionMismatch(f"right-hand side has {B.shape[0]} rows, expected {n}")
    Y = np.empty_like(B)
    for i in range(n):
        Y[i] = (B[i] - L[i, :i] @ Y[:i]) / L[i, i]
    X = np.empty_like(B)
    for i in range(n - 1, -1, -1):
        X[i] = (Y[i] - L[i + 1:, i] @ X[i + 1:]) / L[i, i]
    return X


def lu_factor(A):
    """Doolittle LU with partial pivoting.

    Returns ``(LU, perm, sign, min_pivot)`` where ``LU`` packs the unit-lower
    and upper factors, ``A[perm] = L @ U`` and ``sign`` is the permutation
    parity. Elimination stops early (leaving ``min_pivot == 0``) on an exact
    zero column.
    """
    LU = as_matrix(A).copy()
    _require_square(LU)
    n = LU.shape[0]
    perm = np.arange(n)
    sign = 1.0
    min_pivot = math.inf
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        pivot = abs(LU[p, k])
        min_pivot = min(min_pivot, pivot)
        if pivot == 0.0:
            return LU, perm, sign, 0.0
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    return LU, perm, sign, min_pivot


def _lu_substitute(LU, perm, B):
    n = LU.shape[0]
    Y = B[perm].copy()
    for i in range(n):
        Y[i] -= LU[i, :i] @ Y[:i]
    for i in range(n - 1, -1, -1):
        Y[i] = (Y[i] - LU[i, i + 1:] @ Y[i + 1:]) / LU[i, i]
    return Y


def solve_linear(A, B) -> np.ndarray:
    """Solve ``A X = B`` by partially pivoted LU.

    Raises :class:`Singular` when a pivot falls below ``1e-13 * ||A||_F`` or
    when the computed solution misses the residual contract
    ``||AX - B|| <= 1e-10 (1 + ||B||)``.
    """
    A = as_matrix(A, "A")
    vector_rhs = np.ndim(B) == 1
    B = as_matrix(B, "B")
    _require_square(A, "A")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, B has {B.shape[0]} rows")
    LU, perm, _, min_pivot = lu_factor(A)
    norm_a = _fro(A)
    if min_pivot <= SINGULAR_RTOL * norm_a:
        raise Singular(f"pivot {min_pivot:.3e} below {SINGULAR_RTOL:g} * ||A||")
    X = _lu_substitute(LU, perm, B)
    residual = _fro(A @ X - B)
    if residual > 1e-10 * (1.0 + _fro(B)):
        raise Singular(f"residual {residual:.3e} violates the solve contract (ill-conditioned)")
    return X.ravel() if vector_rhs else X


def determinant(M) -> float:
    M = as_matrix(M)
    _require_square(M)
    LU, _, sign, min_pivot = lu_factor(M)
    if min_pivot == 0.0:
        return 0.0
    return float(sign * np.prod(np.diag(LU)))


# -- symmetric eigenproblem -----------------------------------------------------

def sym_eig(M, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, V)`` with eigenvalues sorted in descending order
    and ``M = V diag(eigenvalues) V^T``.
    """
    M = as_matrix(M)
    _require_symmetric(M)
    a = symmetrize(M)
    n = a.shape[0]
    V = np.eye(n)
    scale = _fro(a)
    if n > 1 and scale > 0.0:
        target = 1e-15 * scale
        for _ in range(max_sweeps):
            off = _fro(a - np.diag(np.diag(a)))
            if off <= target:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= 1e-300:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    cp, cq = a[:, p].copy(), a[:, q].copy()
                    a[:, p] = c * cp - s * cq
                    a[:, q] = s * cp + c * cq
                    rp, rq = a[p, :].copy(), a[q, :].copy()
                    a[p, :] = c * rp - s * rq
                    a[q, :] = s * rp + c * rq
                    a[p, q] = a[q, p] = 0.0
                    vp, vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def psd_project(M, floor=0.0) -> np.ndarray:
    """Nearest (Frobenius) symmetric matrix whose spectrum is ``>= floor``."""
    w, V = sym_eig(M)
    return symmetrize((V * np.maximum(w, floor)) @ V.T)


def nsd_project(M, ceiling=0.0) -> np.ndarray:
    """Nearest symmetric matrix whose spectrum is ``<= ceiling``."""
    return -psd_project(-as_matrix(M), -ceiling)


def max_eig(M) -> float:
    return float(sym_eig(M)[0][0])


def min_eig(M) -> float:
    return float(sym_eig(M)[0][-1])


# -- norms and stability ---------------------------------------------------------

_SQUARINGS = 12


def _reseed_direction(n):
    i = np.arange(n, dtype=float)
    return (-1.0) ** i / (i + 1.0) + 0.5


def spectral_norm(M) -> float:
    """Largest singular value of ``M`` via power iteration on ``M^T M``.

    The Gram matrix is first raised to the power ``2**12`` by normalized
    repeated squaring, which makes the iteration insensitive to a small gap
    between the two leading singular values. The value is reported from the
    Rayleigh quotient of the plain Gram matrix.
    """
    M = as_matrix(M)
    mmax = float(np.max(np.abs(M)))
    if mmax == 0.0:
        return 0.0
    if not 1e-100 < mmax < 1e100:
        # keep the Gram matrix clear of underflow and overflow
        return mmax * spectral_norm(M / mmax)
    G = symmetrize(M.T @ M)
    gmax = float(np.max(np.abs(G)))
    H = G / gmax
    for _ in range(_SQUARINGS):
        H = H @ H
        hmax = float(np.max(np.abs(H)))
        if hmax == 0.0:
            break
        H = symmetrize(H / hmax)

    n = G.shape[0]
    starts = [np.ones(n), _reseed_direction(n)]
    v = None
    for start in starts:
        w = H @ start
        if _fro(w) > 1e-8 * _fro(start):
            v = w
            break
    if v is None:
        # both fixed directions are (numerically) orthogonal to the top
        # singular vector; the largest column of H is parallel to it
        v = H[:, int(np.argmax(np.sum(H * H, axis=0)))].copy()
    v = v / _fro(v)

    rq = float(v @ G @ v)
    for _ in range(1000):
        w = H @ v
        nw = _fro(w)
        if nw == 0.0:
            break
        v = w / nw
        rq_new = float(v @ G @ v)
        if abs(rq_new - rq) <= 1e-15 * abs(rq_new):
            rq = rq_new
            break
        rq = rq_new
    return math.sqrt(max(rq, 0.0))


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of :func:`power_stability`.

    ``kind`` is ``"stable"`` (``power`` is the witness with ``||M^power|| < 1``),
    ``"diverged"`` (norm exceeded the blow-up level at ``power``) or
    ``"not_certified"`` (``power`` is the largest power checked).
    """

    kind: str
    power: int
    norm: float

    @property
    def is_stable(self) -> bool:
        return self.kind == "stable"

    def describe(self) -> str:
        label = {"stable": "Stable", "diverged": "Diverged", "not_certified": "NotCertified"}[self.kind]
        return f"{label}(k={self.power}, norm={self.norm:.6g})"


def power_stability(M, k_max=4096, blowup=1e12) -> StabilityVerdict:
    """Certify Schur stability from ``||M^k||_2 < 1`` for ``k = 1, 2, 4, ...``.

    Since ``rho(M) <= ||M^k||^(1/k)``, a witness is a proof that every
    eigenvalue lies strictly inside the unit circle.
    """
    M = as_matrix(M)
    _require_square(M)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    Mk = M.copy()
    k = 1
    norm = spectral_norm(Mk)
    while True:
        if norm < 1.0:
            return StabilityVerdict("stable", k, norm)
        if norm > blowup:
            return StabilityVerdict("diverged", k, norm)
        if 2 * k > k_max:
            return StabilityVerdict("not_certified", k, norm)
        Mk = Mk @ Mk
        k *= 2
        norm = spectral_norm(Mk)


def matrix_power_norms(M, powers):
    """``||M^k||_2`` for each ``k`` in ascending ``powers``."""
    M = as_matrix(M)
    out = []
    current = np.eye(M.shape[0])
    k = 0
    for p in powers:
        while k < p:
            current = current @ M
            k += 1
        out.append(spectral_norm(current))
    return out
