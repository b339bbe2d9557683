"""Feedback Stackelberg gains from the coupled algebraic Riccati equations.

The stationary equations are reached by running the finite-horizon backward
recursion from zero terminal weights until successive value matrices stop
moving. Each backward step solves the follower's best response to a given
leader input and then the leader's problem under that rational reaction::

    Gamma1 = R11 + B1'P1B1            S  = Gamma1^-1 B1'P1      M1 = I - B1 S
    Gamma2 = R22 + B2'M1'P2M1B2 + B2'S'R21SB2
    Y2     = B2'M1'P2M1A + B2'S'R21SA                          K2 = -Gamma2^-1 Y2
    Y1     = B1'P1A + B1'P1B2K2                                K1 = -Gamma1^-1 Y1
    P1+    = Q1 + (A+B2K2)'P1(A+B2K2) - Y1'Gamma1^-1 Y1 + K2'R12K2
    P2+    = Q2 + A'M1'P2M1A + A'S'R21SA - Y2'Gamma2^-1 Y2
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import GammaNotInvertible, NoConvergence, NotPositiveDefinite
from .linalg import as_matrix, cho_solve, cholesky, min_eig, spectral_norm, symmetrize
from .model import CostWeights, SystemModel

logger = logging.getLogger(__name__)

BLOWUP = 1e100


@dataclass(frozen=True)
class StageGains:
    """Intermediates of one backward step."""

    Gamma1: np.ndarray
    Gamma2: np.ndarray
    S: np.ndarray
    M1: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray


@dataclass(frozen=True)
class StackelbergSolution:
    P1: np.ndarray
    P2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    S: np.ndarray
    M1: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    iterations: int
    residuals: tuple
    monotone: bool = True


def _chol(G, name):
    try:
        return cholesky(symmetrize(G))
    except NotPositiveDefinite as exc:
        raise GammaNotInvertible(f"{name} is not positive definite: {exc}") from None


def stackelberg_iterate(P1, P2, model: SystemModel, weights: CostWeights):
    """One backward step of the coupled recursion.

    Returns ``(P1_next, P2_next, StageGains)``; both value matrices are
    symmetrized before return.
    """
    A, B1, B2 = model.A, model.B1, model.B2
    P1 = as_matrix(P1, "P1")
    P2 = as_matrix(P2, "P2")
    I = np.eye(model.n)

    Gamma1 = symmetrize(weights.R11 + B1.T @ P1 @ B1)
    L1 = _chol(Gamma1, "Gamma1")
    S = cho_solve(L1, B1.T @ P1)
    M1 = I - B1 @ S
    SB2 = S @ B2
    Gamma2 = symmetrize(weights.R22 + B2.T @ M1.T @ P2 @ M1 @ B2 + SB2.T @ weights.R21 @ SB2)
    L2 = _chol(Gamma2, "Gamma2")
    SA = S @ A
    Y2 = B2.T @ M1.T @ P2 @ M1 @ A + SB2.T @ weights.R21 @ SA
    K2 = -cho_solve(L2, Y2)
    Y1 = B1.T @ P1 @ A + B1.T @ P1 @ B2 @ K2
    K1 = -cho_solve(L1, Y1)

    F = A + B2 @ K2
    P1_next = weights.Q1 + F.T @ P1 @ F - Y1.T @ cho_solve(L1, Y1) + K2.T @ weights.R12 @ K2
    M1A = M1 @ A
    P2_next = weights.Q2 + M1A.T @ P2 @ M1A + SA.T @ weights.R21 @ SA - Y2.T @ cho_solve(L2, Y2)
    gains = StageGains(Gamma1, Gamma2, S, M1, Y1, Y2, K1, K2)
    return symmetrize(P1_next), symmetrize(P2_next), gains


def _is_psd_increase(P_next, P, tol=1e-10):
    D = symmetrize(P_next - P)
    return min_eig(D) >= -tol * max(1.0, float(np.max(np.abs(P_next))))


def solve_are(model: SystemModel, weights: CostWeights, tol=1e-12, max_iter=100_000) -> StackelbergSolution:
    """Iterate :func:`stackelberg_iterate` from ``P1 = P2 = 0`` to a fixed point.

    Stops once ``max(||dP1||, ||dP2||) < tol * max(1, ||P||)`` in spectral norm.
    Non-convergence within ``max_iter`` steps usually means the plant is not
    stabilizable or the state weights do not detect every unstable mode.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = model.n
    P1 = np.zeros((n, n))
    P2 = np.zeros((n, n))
    monotone = True
    delta = np.inf
    for it in range(1, max_iter + 1):
        P1_next, P2_next, _ = stackelberg_iterate(P1, P2, model, weights)
        size = max(float(np.max(np.abs(P1_next))), float(np.max(np.abs(P2_next))))
        if not size < BLOWUP:
            # unbounded growth: no stabilizing fixed point is reachable from zero
            raise NoConvergence(it, float("inf"), "coupled Riccati iteration (value matrices diverged)")
        if monotone and not (_is_psd_increase(P1_next, P1) and _is_psd_increase(P2_next, P2)):
            monotone = False
            logger.warning("value iterates are not monotone in the PSD order (step %d)", it)
        delta = max(spectral_norm(P1_next - P1), spectral_norm(P2_next - P2))
        scale = max(1.0, spectral_norm(P1_next), spectral_norm(P2_next))
        P1, P2 = P1_next, P2_next
        if delta < tol * scale:
            break
    else:
        raise NoConvergence(max_iter, delta, "coupled Riccati iteration")

    # the gains reported are those generated by the converged value matrices
    _, _, g = stackelberg_iterate(P1, P2, model, weights)
    partial = StackelbergSolution(
        P1, P2, g.K1, g.K2, g.Gamma1, g.Gamma2, g.S, g.M1, g.Y1, g.Y2, it, (np.nan, np.nan), monotone
    )
    res = riccati_residuals(partial, model, weights)
    return StackelbergSolution(
        P1, P2, g.K1, g.K2, g.Gamma1, g.Gamma2, g.S, g.M1, g.Y1, g.Y2, it, res, monotone
    )


def riccati_residuals(sol: StackelbergSolution, model: SystemModel, weights: CostWeights):
    """``(||RHS1(P1,P2) - P1||, ||RHS2(P1,P2) - P2||)`` recomputed from the value matrices."""
    P1_next, P2_next, _ = stackelberg_iterate(sol.P1, sol.P2, model, weights)
    return spectral_norm(P1_next - sol.P1), spectral_norm(P2_next - sol.P2)


def closed_loop_matrix(model: SystemModel, K1, K2) -> np.ndarray:
    return model.A + model.B1 @ as_matrix(K1) + model.B2 @ as_matrix(K2)


# -- stagewise verification -----------------------------------------------------------

@dataclass(frozen=True)
class StagewiseReport:
    best_response_residual: float
    leader_foc_residual: float
    follower_min_improvement: float
    leader_min_improvement: float
    grid_points: int
    tolerance: float

    @property
    def follower_grid_ok(self) -> bool:
        return self.follower_min_improvement >= -self.tolerance

    @property
    def leader_grid_ok(self) -> bool:
        return self.leader_min_improvement >= -self.tolerance

    @property
    def passed(self) -> bool:
        return (
            self.best_response_residual < self.tolerance
            and self.leader_foc_residual < self.tolerance
            and self.follower_grid_ok
            and self.leader_grid_ok
        )


def _grid(dim, radius, points):
    axis = np.linspace(-radius, radius, points)
    return np.array(list(itertools.product(axis, repeat=dim)))


def stagewise_optimality_check(sol, model, weights, x, grid_radius=0.5, grid_points=41, tol=1e-10):
    """Check that the gains solve the one-stage Stackelberg problem at state ``x``.

    With continuation values ``x'P1x`` and ``x'P2x``, the follower's stage
    problem given ``u2 = K2 x`` must be minimized by ``u1 = K1 x``, and the
    leader's stage problem, with the follower reacting optimally to any
    ``u2``, must be minimized by ``u2 = K2 x``. Besides the two first-order
    residuals, every grid perturbation of each input is evaluated; a negative
    ``*_min_improvement`` beyond ``tol`` would be a profitable deviation.
    """
    A, B1, B2 = model.A, model.B1, model.B2
    x = np.asarray(x, dtype=float).ravel()
    K1, K2, P1, P2 = sol.K1, sol.K2, sol.P1, sol.P2

    L1 = _chol(sol.Gamma1, "Gamma1")
    F = A + B2 @ K2
    best_response = spectral_norm(K1 + cho_solve(L1, B1.T @ P1 @ F))
    foc = spectral_norm(sol.Gamma2 @ K2 + sol.Y2)

    u2_star = K2 @ x
    u1_star = K1 @ x

    def follower_cost(U1):
        # rows of U1 are candidate follower inputs
        xn = (A @ x + B2 @ u2_star)[None, :] + U1 @ B1.T
        return (
            x @ weights.Q1 @ x
            + np.einsum("ij,jk,ik->i", U1, weights.R11, U1)
            + u2_star @ weights.R12 @ u2_star
            + np.einsum("ij,jk,ik->i", xn, P1, xn)
        )

    def reaction(U2):
        # follower's best response to each leader input
        return -cho_solve(L1, B1.T @ P1 @ ((A @ x)[:, None] + B2 @ U2.T)).T

    def leader_cost(U2):
        U1 = reaction(U2)
        xn = (A @ x)[None, :] + U1 @ B1.T + U2 @ B2.T
        return (
            x @ weights.Q2 @ x
            + np.einsum("ij,jk,ik->i", U1, weights.R21, U1)
            + np.einsum("ij,jk,ik->i", U2, weights.R22, U2)
            + np.einsum("ij,jk,ik->i", xn, P2, xn)
        )

    d1 = _grid(model.m1, grid_radius, grid_points)
    d2 = _grid(model.m2, grid_radius, grid_points)
    f0 = follower_cost(u1_star[None, :])[0]
    l0 = leader_cost(u2_star[None, :])[0]
    f_gap = float(np.min(follower_cost(u1_star[None, :] + d1) - f0))
    l_gap = float(np.min(leader_cost(u2_star[None, :] + d2) - l0))
    return StagewiseReport(best_response, foc, f_gap, l_gap, grid_points, tol)
