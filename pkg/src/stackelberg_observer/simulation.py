"""Deterministic simulation of the plant, both observers and the observer-feedback strategy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SolutionInconsistent
from .linalg import as_matrix
from .model import CostWeights, SystemModel
from .observer import assemble_error_matrix


@dataclass(frozen=True)
class SimState:
    k: int
    x: np.ndarray
    xhat1: np.ndarray
    xhat2: np.ndarray

    def __post_init__(self):
        for name in ("x", "xhat1", "xhat2"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite entries at step {self.k}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class Trajectory:
    """Per-step records, one row per time index ``k = 0..steps``.

    Inputs, outputs and stage costs in row ``k`` are those applied or incurred
    at time ``k``.
    """

    k: np.ndarray
    x: np.ndarray
    xhat1: np.ndarray
    xhat2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    stage_cost_1: np.ndarray
    stage_cost_2: np.ndarray

    @property
    def xtilde1(self) -> np.ndarray:
        return self.x - self.xhat1

    @property
    def xtilde2(self) -> np.ndarray:
        return self.x - self.xhat2

    @property
    def xtilde(self) -> np.ndarray:
        """Stacked error ``[x - xhat1, x - xhat2]`` per row."""
        return np.hstack([self.xtilde1, self.xtilde2])

    @property
    def z(self) -> np.ndarray:
        """Augmented state ``[x, xtilde1, xtilde2]`` per row."""
        return np.hstack([self.x, self.xtilde])

    def __len__(self):
        return len(self.k)


@dataclass(frozen=True)
class AugmentedSystem:
    A_bar: np.ndarray
    script_B: np.ndarray


def _gains(model, K1, K2, L1, L2):
    K1, K2, L1, L2 = (as_matrix(M, name) for M, name in ((K1, "K1"), (K2, "K2"), (L1, "L1"), (L2, "L2")))
    expected = {
        "K1": (model.m1, model.n), "K2": (model.m2, model.n),
        "L1": (model.n, model.s1), "L2": (model.n, model.s2),
    }
    for name, M in zip(expected, (K1, K2, L1, L2)):
        if M.shape != expected[name]:
            raise DimensionMismatch(f"{name} must be {expected[name]}, got {M.shape}")
    return K1, K2, L1, L2


def step(state: SimState, model: SystemModel, K1, K2, L1, L2) -> SimState:
    """Advance plant and observers by one step under ``u_i = K_i xhat_i``."""
    K1, K2, L1, L2 = _gains(model, K1, K2, L1, L2)
    A, B1, B2, H1, H2 = model.A, model.B1, model.B2, model.H1, model.H2
    x, xh1, xh2 = state.x, state.xhat1, state.xhat2
    if not (x.shape == xh1.shape == xh2.shape == (model.n,)):
        raise DimensionMismatch(f"state vectors must have length {model.n}")
    y1, y2 = H1 @ x, H2 @ x
    u1, u2 = K1 @ xh1, K2 @ xh2
    x_next = A @ x + B1 @ u1 + B2 @ u2
    # each observer substitutes the other player's feedback law for the unseen input
    xh1_next = A @ xh1 + B1 @ u1 + B2 @ (K2 @ xh1) + L1 @ (y1 - H1 @ xh1)
    xh2_next = A @ xh2 + B1 @ (K1 @ xh2) + B2 @ u2 + L2 @ (y2 - H2 @ xh2)
    return SimState(state.k + 1, x_next, xh1_next, xh2_next)


def _vector(v, n, name):
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float).ravel()
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} must have length {n}, got {v.shape}")
    return v


def simulate(model: SystemModel, K1, K2, L1, L2, weights: CostWeights, x0,
             xhat1_0=None, xhat2_0=None, steps=200) -> Trajectory:
    """Run ``steps`` transitions from the given initial states (observers default to 0)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    K1, K2, L1, L2 = _gains(model, K1, K2, L1, L2)
    n = model.n
    state = SimState(0, _vector(x0, n, "x0"), _vector(xhat1_0, n, "xhat1_0"), _vector(xhat2_0, n, "xhat2_0"))

    T = steps + 1
    xs, xh1s, xh2s = np.empty((T, n)), np.empty((T, n)), np.empty((T, n))
    for k in range(T):
        xs[k], xh1s[k], xh2s[k] = state.x, state.xhat1, state.xhat2
        if k < steps:
            state = step(state, model, K1, K2, L1, L2)

    u1 = xh1s @ K1.T
    u2 = xh2s @ K2.T
    y1 = xs @ model.H1.T
    y2 = xs @ model.H2.T
    quad = lambda V, M: np.einsum("ij,jk,ik->i", V, M, V)  # noqa: E731
    c1 = quad(xs, weights.Q1) + quad(u1, weights.R11) + quad(u2, weights.R12)
    c2 = quad(xs, weights.Q2) + quad(u1, weights.R21) + quad(u2, weights.R22)
    return Trajectory(np.arange(T), xs, xh1s, xh2s, u1, u2, y1, y2, c1, c2)


def augmented_matrix(model: SystemModel, K1, K2, L1, L2, solution=None, tol=1e-10) -> AugmentedSystem:
    """``A_bar = [[A + B1K1 + B2K2, script_B], [0, script_A]]`` acting on ``[x; xtilde1; xtilde2]``.

    When the full solver output is passed as ``solution``, the identity
    ``-B1K1 = B1 S (A + B2K2)`` is checked and :class:`SolutionInconsistent`
    raised if it fails by more than ``tol`` (relative).
    """
    K1, K2, L1, L2 = _gains(model, K1, K2, L1, L2)
    n = model.n
    script_B = np.hstack([-model.B1 @ K1, -model.B2 @ K2])
    script_A = assemble_error_matrix(model, K1, K2, L1, L2)
    A_cl = model.A + model.B1 @ K1 + model.B2 @ K2
    A_bar = np.block([[A_cl, script_B], [np.zeros((2 * n, n)), script_A]])
    if solution is not None:
        alt = model.B1 @ solution.S @ (model.A + model.B2 @ K2)
        defect = float(np.max(np.abs(alt + model.B1 @ K1)))
        if defect > tol * max(1.0, float(np.max(np.abs(alt)))):
            raise SolutionInconsistent(f"-B1K1 != B1 S (A + B2K2): defect {defect:.3e}")
    return AugmentedSystem(A_bar, script_B)


def error_dynamics_defect(traj: Trajectory, script_A) -> float:
    """``max_k ||xtilde(k+1) - script_A xtilde(k)||``; zero for consistent trajectories."""
    e = traj.xtilde
    if len(e) < 2:
        return 0.0
    diff = e[1:] - e[:-1] @ np.asarray(script_A).T
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=1))))


def state_from_record(traj: Trajectory, k: int) -> SimState:
    return SimState(int(traj.k[k]), traj.x[k], traj.xhat1[k], traj.xhat2[k])


__all__ = [
    "AugmentedSystem",
    "SimState",
    "Trajectory",
    "augmented_matrix",
    "error_dynamics_defect",
    "simulate",
    "state_from_record",
    "step",
]
