"""Observer gains that stabilize the coupled estimation-error dynamics.

Under the observer-feedback strategy ``u1 = K1 xhat1``, ``u2 = K2 xhat2``
with observers::

    xhat1+ = A xhat1 + B1 u1 + B2 K2 xhat1 + L1 (y1 - H1 xhat1)
    xhat2+ = A xhat2 + B1 K1 xhat2 + B2 u2 + L2 (y2 - H2 xhat2)

the errors ``e_i = x - xhat_i`` obey ``[e1; e2]+ = script_A [e1; e2]`` with::

    script_A = [[A + B2K2 - L1H1,  -B2K2          ],
                [-B1K1,            A + B1K1 - L2H2]]

Each player's error is driven by the other's, so the two gains must be
chosen jointly. Two synthesis routes are provided: a block-diagonal
Lyapunov LMI solved by Dykstra alternating projections, and a pair of
decoupled filtering Riccati equations whose result is only accepted if the
coupled matrix is certified stable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CertifiedButUnstable,
    DimensionMismatch,
    Infeasible,
    NoConvergence,
    NotCertified,
    NotPositiveDefinite,
    StackelbergError,
)
from .linalg import (
    StabilityVerdict,
    as_matrix,
    cho_solve,
    cholesky,
    is_positive_definite,
    max_eig,
    nsd_project,
    power_stability,
    psd_project,
    spectral_norm,
    sym_eig,
    symmetrize,
)
from .model import SystemModel

logger = logging.getLogger(__name__)

LMI_DELTA = 1e-6
LMI_TOL = 1e-9


@dataclass(frozen=True)
class LMICertificate:
    """Lyapunov certificate ``diag(P1, P2)`` with ``W_i = P_i L_i``.

    ``lmi_max_eig`` is the largest eigenvalue of the LMI matrix; a valid
    certificate has it at or below ``-margin / 2``.
    """

    P1: np.ndarray
    P2: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    margin: float
    lmi_max_eig: float
    iterations: int
    shared: bool = False

    @property
    def P_block(self) -> np.ndarray:
        n = self.P1.shape[0]
        Z = np.zeros((n, n))
        return np.block([[self.P1, Z], [Z, self.P2]])


@dataclass(frozen=True)
class ObserverDesign:
    L1: np.ndarray
    L2: np.ndarray
    script_A: np.ndarray
    verdict: StabilityVerdict
    method: str
    certificate: Optional[LMICertificate] = None


def _check_gain_shapes(model, K1, K2, L1=None, L2=None):
    if K1.shape != (model.m1, model.n):
        raise DimensionMismatch(f"K1 must be {(model.m1, model.n)}, got {K1.shape}")
    if K2.shape != (model.m2, model.n):
        raise DimensionMismatch(f"K2 must be {(model.m2, model.n)}, got {K2.shape}")
    if L1 is not None and L1.shape != (model.n, model.s1):
        raise DimensionMismatch(f"L1 must be {(model.n, model.s1)}, got {L1.shape}")
    if L2 is not None and L2.shape != (model.n, model.s2):
        raise DimensionMismatch(f"L2 must be {(model.n, model.s2)}, got {L2.shape}")


def open_error_matrix(model: SystemModel, K1, K2) -> np.ndarray:
    """``script_A`` with the observer gains removed (``L1 = L2 = 0``)."""
    K1, K2 = as_matrix(K1, "K1"), as_matrix(K2, "K2")
    _check_gain_shapes(model, K1, K2)
    A, B1, B2 = model.A, model.B1, model.B2
    return np.block([[A + B2 @ K2, -B2 @ K2], [-B1 @ K1, A + B1 @ K1]])


def output_block(model: SystemModel) -> np.ndarray:
    """``diag(H1, H2)``."""
    n = model.n
    return np.block([
        [model.H1, np.zeros((model.s1, n))],
        [np.zeros((model.s2, n)), model.H2],
    ])


def assemble_error_matrix(model: SystemModel, K1, K2, L1, L2) -> np.ndarray:
    K1, K2 = as_matrix(K1, "K1"), as_matrix(K2, "K2")
    L1, L2 = as_matrix(L1, "L1"), as_matrix(L2, "L2")
    _check_gain_shapes(model, K1, K2, L1, L2)
    A, B1, B2, H1, H2 = model.A, model.B1, model.B2, model.H1, model.H2
    return np.block([
        [A + B2 @ K2 - L1 @ H1, -B2 @ K2],
        [-B1 @ K1, A + B1 @ K1 - L2 @ H2],
    ])


def certify(script_A) -> StabilityVerdict:
    return power_stability(script_A)


# -- LMI route ----------------------------------------------------------------------

def lmi_matrix(model: SystemModel, K1, K2, P1, P2, W1, W2) -> np.ndarray:
    """``[[-P, (P A~ - W~ H~)'], [P A~ - W~ H~, -P]]`` with ``P = diag(P1, P2)``.

    Negative definiteness is equivalent to ``script_A' P script_A - P < 0``
    for ``L_i = P_i^-1 W_i``.
    """
    n = model.n
    At = open_error_matrix(model, K1, K2)
    Ht = output_block(model)
    Z = np.zeros((n, n))
    Pt = np.block([[P1, Z], [Z, P2]])
    Wt = np.block([[W1, np.zeros((n, model.s2))], [np.zeros((n, model.s1)), W2]])
    X = Pt @ At - Wt @ Ht
    return np.block([[-Pt, X.T], [X, -Pt]])


class _LMIParametrization:
    """Linear map from the free parameters to the lifted pair ``(G, P1, P2)``.

    Parameters are the upper triangles of ``P1`` and ``P2`` (a single shared
    block when ``shared``) followed by the entries of ``W1`` and ``W2``. The
    lifted vector stacks ``vec(G)``, ``vec(P1)``, ``vec(P2)``; the cone side of
    the alternating projections acts on each of the three blocks separately.
    """

    def __init__(self, model, K1, K2, shared):
        self.model, self.K1, self.K2, self.shared = model, K1, K2, shared
        n, s1, s2 = model.n, model.s1, model.s2
        self.N = 4 * n
        columns = []
        self.basis = []
        tri = [(i, j) for i in range(n) for j in range(i, n)]
        blocks = ("both",) if shared else ("P1", "P2")
        for which in blocks:
            for i, j in tri:
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                P1 = E if which in ("both", "P1") else np.zeros((n, n))
                P2 = E if which in ("both", "P2") else np.zeros((n, n))
                self.basis.append((P1, P2, np.zeros((n, s1)), np.zeros((n, s2))))
        for i in range(n):
            for j in range(s1):
                E = np.zeros((n, s1))
                E[i, j] = 1.0
                self.basis.append((np.zeros((n, n)), np.zeros((n, n)), E, np.zeros((n, s2))))
        for i in range(n):
            for j in range(s2):
                E = np.zeros((n, s2))
                E[i, j] = 1.0
                self.basis.append((np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, s1)), E))
        for b in self.basis:
            columns.append(self.lift(*b))
        self.matrix = np.array(columns).T
        # pseudo-inverse of the Gram matrix: parameters that do not reach the
        # lifted space (e.g. W_i when H_i = 0) get the minimum-norm value
        w, V = sym_eig(symmetrize(self.matrix.T @ self.matrix))
        keep = w > 1e-12 * w[0]
        self._pinv = (V[:, keep] / w[keep]) @ V[:, keep].T @ self.matrix.T

    def lift(self, P1, P2, W1, W2):
        G = lmi_matrix(self.model, self.K1, self.K2, P1, P2, W1, W2)
        return np.concatenate([G.ravel(), P1.ravel(), P2.ravel()])

    def split(self, v):
        N, n = self.N, self.model.n
        G = v[: N * N].reshape(N, N)
        P1 = v[N * N: N * N + n * n].reshape(n, n)
        P2 = v[N * N + n * n:].reshape(n, n)
        return G, P1, P2

    def parameters(self, theta):
        P1 = sum(t * b[0] for t, b in zip(theta, self.basis))
        P2 = sum(t * b[1] for t, b in zip(theta, self.basis))
        W1 = sum(t * b[2] for t, b in zip(theta, self.basis))
        W2 = sum(t * b[3] for t, b in zip(theta, self.basis))
        return P1, P2, W1, W2

    def project(self, v):
        """Least-squares projection of a lifted vector onto the realizable subspace."""
        theta = self._pinv @ v
        return theta, self.matrix @ theta


def _strictly_below(G, level):
    """``G < level * I`` via a Cholesky test on ``level * I - G``."""
    try:
        cholesky(symmetrize(level * np.eye(G.shape[0]) - G))
    except NotPositiveDefinite:
        return False
    return True


def synthesize_lmi(model: SystemModel, K1, K2, margin=1e-6, max_iter=20_000, shared=False) -> ObserverDesign:
    """Find observer gains from a Lyapunov LMI by Dykstra alternating projections.

    Seeks symmetric ``P1, P2 >= delta I`` and ``W1, W2`` with
    ``lmi_matrix(...) <= -margin I``, alternating between the subspace of
    matrices realizable by some ``(P1, P2, W1, W2)`` and the convex set
    ``{G <= -margin I} x {P1 >= delta I} x {P2 >= delta I}``. Starts from
    ``P1 = P2 = I``, ``W = 0``; fully deterministic.

    ``shared=True`` restricts the certificate to ``P1 == P2``.

    Raises :class:`Infeasible` when the iterates stall or ``max_iter`` is
    exhausted without a certificate.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    K1, K2 = as_matrix(K1, "K1"), as_matrix(K2, "K2")
    _check_gain_shapes(model, K1, K2)
    n = model.n
    param = _LMIParametrization(model, K1, K2, shared)

    v = param.lift(np.eye(n), np.eye(n), np.zeros((n, model.s1)), np.zeros((n, model.s2)))
    correction = np.zeros_like(v)
    previous = None
    for it in range(1, max_iter + 1):
        theta, a = param.project(v)
        G, P1, P2 = param.split(a)
        G = symmetrize(G)
        if _strictly_below(G, -0.5 * margin) and is_positive_definite(symmetrize(P1)) and is_positive_definite(symmetrize(P2)):
            return _extract(model, K1, K2, param, theta, margin, it, shared)
        if previous is not None:
            step = math.sqrt(float(np.sum((a - previous) ** 2)))
            if step <= LMI_TOL * max(1.0, math.sqrt(float(np.sum(a * a)))):
                raise Infeasible(it, f"LMI projections stalled after {it} iterations (no certificate)")
        previous = a

        y = a + correction
        Gy, P1y, P2y = param.split(y)
        v = np.concatenate([
            nsd_project(symmetrize(Gy), -margin).ravel(),
            psd_project(symmetrize(P1y), LMI_DELTA).ravel(),
            psd_project(symmetrize(P2y), LMI_DELTA).ravel(),
        ])
        correction = y - v
    raise Infeasible(max_iter)


def _extract(model, K1, K2, param, theta, margin, iterations, shared):
    P1, P2, W1, W2 = param.parameters(theta)
    P1, P2 = symmetrize(P1), symmetrize(P2)
    L1 = cho_solve(cholesky(P1), W1)
    L2 = cho_solve(cholesky(P2), W2)
    G = symmetrize(lmi_matrix(model, K1, K2, P1, P2, W1, W2))
    cert = LMICertificate(P1, P2, W1, W2, margin, max_eig(G), iterations, shared)
    script_A = assemble_error_matrix(model, K1, K2, L1, L2)
    verdict = certify(script_A)
    if not verdict.is_stable:
        raise CertifiedButUnstable(f"LMI certificate found but power test returned {verdict.describe()}")
    return ObserverDesign(L1, L2, script_A, verdict, "lmi", cert)


def lyapunov_defect(design: ObserverDesign) -> float:
    """Largest eigenvalue of ``script_A' P script_A - P`` for the stored certificate."""
    if design.certificate is None:
        raise ValueError("design carries no certificate")
    P = design.certificate.P_block
    return max_eig(symmetrize(design.script_A.T @ P @ design.script_A - P))


# -- dual Riccati route ---------------------------------------------------------------

def filter_riccati(Ac, H, q_scale=1.0, r_scale=1.0, tol=1e-12, max_iter=100_000):
    """Stationary filtering Riccati solution and gain for the pair ``(Ac, H)``.

    Iterates ``X+ = Ac X Ac' - Ac X H'(H X H' + r I)^-1 H X Ac' + q I`` from
    ``X = 0``; returns ``(X, L)`` with ``L = Ac X H'(H X H' + r I)^-1``.
    """
    Ac, H = as_matrix(Ac, "Ac"), as_matrix(H, "H")
    n, s = Ac.shape[0], H.shape[0]
    X = np.zeros((n, n))
    delta = np.inf
    for _ in range(max_iter):
        C = cholesky(symmetrize(H @ X @ H.T + r_scale * np.eye(s)))
        AXH = Ac @ X @ H.T
        X_next = symmetrize(Ac @ X @ Ac.T - AXH @ cho_solve(C, AXH.T) + q_scale * np.eye(n))
        if not np.all(np.isfinite(X_next)):
            break
        delta = spectral_norm(X_next - X)
        X = X_next
        if delta < tol * max(1.0, spectral_norm(X)):
            C = cholesky(symmetrize(H @ X @ H.T + r_scale * np.eye(s)))
            L = cho_solve(C, (Ac @ X @ H.T).T).T
            return X, L
    raise NoConvergence(max_iter, delta, "filtering Riccati iteration")


def synthesize_dual_riccati(model: SystemModel, K1, K2, q_scale=1.0, r_scale=1.0) -> ObserverDesign:
    """Per-player steady-state filter gains, accepted only if the coupled matrix is stable.

    ``L1`` comes from the pair ``(A + B2K2, H1)`` and ``L2`` from
    ``(A + B1K1, H2)``. That stabilizes the diagonal blocks of ``script_A``
    only; the coupling through ``-B2K2`` and ``-B1K1`` can still destabilize
    the whole, in which case :class:`NotCertified` is raised.
    """
    if q_scale <= 0 or r_scale <= 0:
        raise ValueError("q_scale and r_scale must be positive")
    K1, K2 = as_matrix(K1, "K1"), as_matrix(K2, "K2")
    _check_gain_shapes(model, K1, K2)
    A, B1, B2 = model.A, model.B1, model.B2
    _, L1 = filter_riccati(A + B2 @ K2, model.H1, q_scale, r_scale)
    _, L2 = filter_riccati(A + B1 @ K1, model.H2, q_scale, r_scale)
    script_A = assemble_error_matrix(model, K1, K2, L1, L2)
    verdict = certify(script_A)
    if not verdict.is_stable:
        raise NotCertified(f"dual-Riccati gains fail the coupled test: {verdict.describe()}")
    return ObserverDesign(L1, L2, script_A, verdict, "dual-riccati")


def user_design(model: SystemModel, K1, K2, L1, L2) -> ObserverDesign:
    """Wrap caller-supplied gains; raises :class:`NotCertified` unless stable."""
    script_A = assemble_error_matrix(model, K1, K2, L1, L2)
    verdict = certify(script_A)
    if not verdict.is_stable:
        raise NotCertified(f"supplied gains do not stabilize the error dynamics: {verdict.describe()}")
    return ObserverDesign(as_matrix(L1), as_matrix(L2), script_A, verdict, "user-supplied")


def design_observer(model: SystemModel, K1, K2, method="auto", margin=1e-6, shared=False,
                    max_iter=20_000) -> ObserverDesign:
    """Top-level synthesis: ``lmi``, ``dual-riccati`` or ``auto`` (LMI, then dual Riccati)."""
    if method == "lmi":
        return synthesize_lmi(model, K1, K2, margin=margin, max_iter=max_iter, shared=shared)
    if method == "dual-riccati":
        return synthesize_dual_riccati(model, K1, K2)
    if method != "auto":
        raise ValueError(f"unknown observer method {method!r}")
    try:
        return synthesize_lmi(model, K1, K2, margin=margin, max_iter=max_iter, shared=shared)
    except StackelbergError as exc:
        logger.warning("LMI synthesis failed (%s); trying dual Riccati", exc)
    try:
        return synthesize_dual_riccati(model, K1, K2)
    except (NotCertified, NoConvergence) as exc:
        raise Infeasible(0, f"no stabilizing observer found: {exc}") from None


__all__ = [
    "LMICertificate",
    "ObserverDesign",
    "assemble_error_matrix",
    "certify",
    "design_observer",
    "filter_riccati",
    "lmi_matrix",
    "lyapunov_defect",
    "open_error_matrix",
    "output_block",
    "synthesize_dual_riccati",
    "synthesize_lmi",
    "user_design",
]
