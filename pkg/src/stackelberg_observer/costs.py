"""Infinite-horizon costs of the observer-feedback strategy and their gap to the optimum.

Everything is evaluated on the augmented state ``z = [x; xtilde1; xtilde2]``,
which evolves as ``z(k+1) = A_bar z(k)``. Since ``u1 = K1 (x - xtilde1)`` and
``u2 = K2 (x - xtilde2)``, each player's stage cost is a quadratic form
``z' Omega_i z`` and the total cost from ``z0`` is ``z0' X_i z0`` with ``X_i``
the solution of the discrete Lyapunov equation ``A_bar' X A_bar - X = -Omega_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotStable
from .linalg import as_matrix, matrix_power_norms, power_stability, solve_linear, spectral_norm, symmetrize
from .model import CostWeights, SystemModel
from .simulation import augmented_matrix


def lyapunov_solve(M, Omega) -> np.ndarray:
    """Solve ``M' X M - X = -Omega`` for symmetric ``X``.

    Uses the vectorized form ``(I - M' (x) M') vec(X) = vec(Omega)``. ``M``
    must carry a power-norm stability certificate, otherwise
    :class:`NotStable` is raised.
    """
    M = as_matrix(M, "M")
    Omega = as_matrix(Omega, "Omega")
    if M.shape[0] != M.shape[1] or Omega.shape != M.shape:
        raise ValueError(f"M {M.shape} and Omega {Omega.shape} must be square and equal in size")
    verdict = power_stability(M)
    if not verdict.is_stable:
        raise NotStable(f"Lyapunov solve needs a stable matrix: {verdict.describe()}")
    n = M.shape[0]
    Omega = symmetrize(Omega)
    # column-major vec: vec(M' X M) = (M' kron M') vec(X)
    system = np.eye(n * n) - np.kron(M.T, M.T)
    x = solve_linear(system, Omega.reshape(-1, order="F"))
    X = symmetrize(x.reshape(n, n, order="F"))
    residual = float(np.max(np.abs(M.T @ X @ M - X + Omega)))
    if residual > 1e-10 * (1.0 + float(np.max(np.abs(Omega)))):
        raise NotStable(f"Lyapunov residual {residual:.3e} too large")
    return X


def stage_weights(model: SystemModel, K1, K2, weights: CostWeights):
    """``(Omega1, Omega2)`` such that stage cost ``i`` equals ``z' Omega_i z``."""
    n = model.n
    I, Z = np.eye(n), np.zeros((n, n))
    E0 = np.hstack([I, Z, Z])
    E1 = np.hstack([I, -I, Z])
    E2 = np.hstack([I, Z, -I])
    K1, K2 = as_matrix(K1), as_matrix(K2)
    F1, F2 = K1 @ E1, K2 @ E2
    Omega1 = E0.T @ weights.Q1 @ E0 + F1.T @ weights.R11 @ F1 + F2.T @ weights.R12 @ F2
    Omega2 = E0.T @ weights.Q2 @ E0 + F1.T @ weights.R21 @ F1 + F2.T @ weights.R22 @ F2
    return symmetrize(Omega1), symmetrize(Omega2)


def initial_augmented_state(x0, xhat1_0=None, xhat2_0=None) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).ravel()
    xh1 = np.zeros_like(x0) if xhat1_0 is None else np.asarray(xhat1_0, dtype=float).ravel()
    xh2 = np.zeros_like(x0) if xhat2_0 is None else np.asarray(xhat2_0, dtype=float).ravel()
    return np.concatenate([x0, x0 - xh1, x0 - xh2])


@dataclass(frozen=True)
class CostReport:
    J1_star_fb: float
    J2_star_fb: float
    J1_obs: float
    J2_obs: float
    delta_J1: float
    delta_J2: float
    correction_paper_1: float = math.nan
    correction_paper_2: float = math.nan
    reconciliation_gap_1: float = math.nan
    reconciliation_gap_2: float = math.nan
    correction_rederived_1: float = math.nan
    correction_rederived_2: float = math.nan
    rederived_gap_1: float = math.nan
    rederived_gap_2: float = math.nan


@dataclass(frozen=True)
class _Evaluation:
    A_bar: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    z0: np.ndarray


def _evaluate(model, sol, L1, L2, weights, z0):
    aug = augmented_matrix(model, sol.K1, sol.K2, L1, L2)
    Omega1, Omega2 = stage_weights(model, sol.K1, sol.K2, weights)
    X1 = lyapunov_solve(aug.A_bar, Omega1)
    X2 = lyapunov_solve(aug.A_bar, Omega2)
    return _Evaluation(aug.A_bar, X1, X2, z0)


def exact_costs(model, sol, L1, L2, weights, x0, xhat1_0=None, xhat2_0=None) -> CostReport:
    """Exact observer-feedback costs ``J_i`` against the state-feedback optimum ``x0' P_i x0``."""
    z0 = initial_augmented_state(x0, xhat1_0, xhat2_0)
    ev = _evaluate(model, sol, L1, L2, weights, z0)
    x0 = z0[: model.n]
    J1_fb = float(x0 @ sol.P1 @ x0)
    J2_fb = float(x0 @ sol.P2 @ x0)
    J1 = float(z0 @ ev.X1 @ z0)
    J2 = float(z0 @ ev.X2 @ z0)
    return CostReport(J1_fb, J2_fb, J1, J2, J1 - J1_fb, J2 - J2_fb)


# -- closed-form correction terms --------------------------------------------------------

@dataclass(frozen=True)
class CorrectionTerms:
    """Blocks of the quadratic form ``[x; xtilde]' [[0, T], [T', S]] [x; xtilde]``.

    ``S1, S2, T1, T2`` are the printed closed-form terms:
    ``S_i = script_B' P_i script_B - diag(K1'R_i1K1, K2'R_i2K2)`` and
    ``T_i = (A + B2K2)' M1' P_i script_B``. The ``*_rederived`` fields hold the
    form obtained by substituting ``u_i = K_i (x - xtilde_i)`` into the stage
    costs directly: the cross block gains ``-D_i`` with
    ``D_i = [K1'R_i1K1, K2'R_i2K2]`` and the diagonal block enters with a plus sign.
    """

    S1: np.ndarray
    S2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    S1_rederived: np.ndarray
    S2_rederived: np.ndarray
    T1_rederived: np.ndarray
    T2_rederived: np.ndarray

    def theta(self, player: int, rederived: bool = False) -> np.ndarray:
        S = getattr(self, f"S{player}" + ("_rederived" if rederived else ""))
        T = getattr(self, f"T{player}" + ("_rederived" if rederived else ""))
        n = T.shape[0]
        return np.block([[np.zeros((n, n)), T], [T.T, S]])


def correction_terms(model: SystemModel, sol, weights: CostWeights) -> CorrectionTerms:
    n = model.n
    K1, K2 = sol.K1, sol.K2
    script_B = np.hstack([-model.B1 @ K1, -model.B2 @ K2])
    F = model.A + model.B2 @ K2
    Z = np.zeros((n, n))
    out = {}
    for i, (P, Ra, Rb) in enumerate(
        ((sol.P1, weights.R11, weights.R12), (sol.P2, weights.R21, weights.R22)), start=1
    ):
        Da, Db = K1.T @ Ra @ K1, K2.T @ Rb @ K2
        diag = np.block([[Da, Z], [Z, Db]])
        BPB = script_B.T @ P @ script_B
        T = F.T @ sol.M1.T @ P @ script_B
        out[f"S{i}"] = symmetrize(BPB - diag)
        out[f"T{i}"] = T
        out[f"S{i}_rederived"] = symmetrize(BPB + diag)
        out[f"T{i}_rederived"] = T - np.hstack([Da, Db])
    return CorrectionTerms(**out)


@dataclass(frozen=True)
class CorrectionReport:
    terms: CorrectionTerms
    printed: tuple
    rederived: tuple
    printed_gap: tuple
    rederived_gap: tuple
    printed_x_block_norm: tuple

    def matching_form(self, player: int, rtol=1e-8, scale=1.0) -> str:
        """Which closed form reproduces the exact cost within ``rtol * max(1, scale)``."""
        tol = rtol * max(1.0, abs(scale))
        hits = []
        if self.printed_gap[player - 1] <= tol:
            hits.append("printed")
        if self.rederived_gap[player - 1] <= tol:
            hits.append("rederived")
        return "+".join(hits) if hits else "none"


def paper_corrections(model, sol, L1, L2, weights, x0, xhat1_0=None, xhat2_0=None, report=None) -> CorrectionReport:
    """Evaluate both closed forms of the optimality gap and reconcile them with :func:`exact_costs`.

    For each form the correction ``z0' Xt z0`` is computed with
    ``A_bar' Xt A_bar - Xt = -Theta_i``; the gap reported is
    ``|x0'P_i x0 + correction - J_i|``.
    """
    z0 = initial_augmented_state(x0, xhat1_0, xhat2_0)
    if report is None:
        report = exact_costs(model, sol, L1, L2, weights, x0, xhat1_0, xhat2_0)
    terms = correction_terms(model, sol, weights)
    A_bar = augmented_matrix(model, sol.K1, sol.K2, L1, L2).A_bar
    n = model.n
    printed, rederived, x_blocks = [], [], []
    for i in (1, 2):
        Xp = lyapunov_solve(A_bar, terms.theta(i))
        Xr = lyapunov_solve(A_bar, terms.theta(i, rederived=True))
        printed.append(float(z0 @ Xp @ z0))
        rederived.append(float(z0 @ Xr @ z0))
        x_blocks.append(spectral_norm(Xp[:n, :n]))
    fb = (report.J1_star_fb, report.J2_star_fb)
    obs = (report.J1_obs, report.J2_obs)
    printed_gap = tuple(abs(fb[i] + printed[i] - obs[i]) for i in range(2))
    rederived_gap = tuple(abs(fb[i] + rederived[i] - obs[i]) for i in range(2))
    return CorrectionReport(terms, tuple(printed), tuple(rederived), printed_gap, rederived_gap, tuple(x_blocks))


def cost_report(model, sol, L1, L2, weights, x0, xhat1_0=None, xhat2_0=None) -> tuple:
    """``(CostReport with correction fields filled, CorrectionReport)``."""
    report = exact_costs(model, sol, L1, L2, weights, x0, xhat1_0, xhat2_0)
    corr = paper_corrections(model, sol, L1, L2, weights, x0, xhat1_0, xhat2_0, report=report)
    report = replace(
        report,
        correction_paper_1=corr.printed[0], correction_paper_2=corr.printed[1],
        reconciliation_gap_1=corr.printed_gap[0], reconciliation_gap_2=corr.printed_gap[1],
        correction_rederived_1=corr.rederived[0], correction_rederived_2=corr.rederived[1],
        rederived_gap_1=corr.rederived_gap[0], rederived_gap_2=corr.rederived_gap[1],
    )
    return report, corr


# -- decay of the optimality gap -----------------------------------------------------------

@dataclass(frozen=True)
class DecayProfile:
    """Tail optimality gaps ``dJ_i(N, inf)`` and their geometric envelope.

    ``bound_i[j] = c_bar_i * lambda_hat ** (2 N_j)`` with
    ``c_bar_i = c**2 ||Theta_i|| ||z0||**2 / (1 - lambda_hat**2)``.
    ``burn_in`` is the first index from which both ``|dJ_i|`` sequences are
    nonincreasing.
    """

    N_values: list
    delta_J1_at_N: list
    delta_J2_at_N: list
    lambda_hat: float
    lambda_power: int
    c: float
    c_bar_1: float
    c_bar_2: float
    bound_1: list
    bound_2: list
    burn_in: int

    def bound_holds(self, slack=1e-6) -> bool:
        rows = zip(self.delta_J1_at_N, self.delta_J2_at_N, self.bound_1, self.bound_2)
        for j, (d1, d2, b1, b2) in enumerate(rows):
            if j < self.burn_in:
                continue
            if abs(d1) > b1 * (1 + slack) or abs(d2) > b2 * (1 + slack):
                return False
        return True


def _burn_in(values):
    mags = np.abs(np.asarray(values, dtype=float))
    b = len(mags)
    for j in range(len(mags) - 1, 0, -1):
        if mags[j] <= mags[j - 1]:
            b = j - 1
        else:
            break
    return min(b, max(len(mags) - 1, 0))


def decay_profile(model, sol, L1, L2, weights, z0, N_list) -> DecayProfile:
    """Tail gaps ``dJ_i(N, inf) = z(N)'X_i z(N) - x(N)'P_i x(N)`` with ``z(N) = A_bar^N z0``."""
    N_list = [int(N) for N in N_list]
    if any(b < a for a, b in zip(N_list, N_list[1:])) or (N_list and N_list[0] < 0):
        raise ValueError("N_list must be ascending and nonnegative")
    z0 = np.asarray(z0, dtype=float).ravel()
    n = model.n
    A_bar = augmented_matrix(model, sol.K1, sol.K2, L1, L2).A_bar
    verdict = power_stability(A_bar)
    if not verdict.is_stable:
        raise NotStable(f"augmented closed loop not certified: {verdict.describe()}")
    Omega1, Omega2 = stage_weights(model, sol.K1, sol.K2, weights)
    X1 = lyapunov_solve(A_bar, Omega1)
    X2 = lyapunov_solve(A_bar, Omega2)

    d1, d2 = [], []
    z = z0.copy()
    k = 0
    for N in N_list:
        while k < N:
            z = A_bar @ z
            k += 1
        x = z[:n]
        d1.append(float(z @ X1 @ z - x @ sol.P1 @ x))
        d2.append(float(z @ X2 @ z - x @ sol.P2 @ x))

    # growth envelope ||A_bar^k|| <= c lambda_hat^k, valid for every k >= 0
    horizon = max([verdict.power] + N_list)
    norms = matrix_power_norms(A_bar, range(horizon + 1))
    m = verdict.power
    while 2 * m <= horizon and norms[2 * m] > 0.0:
        m *= 2
    lam = norms[m] ** (1.0 / m) if norms[m] > 0.0 else 0.5
    c = max(norms[k] / lam**k for k in range(horizon + 1))

    terms = correction_terms(model, sol, weights)
    zz = float(z0 @ z0)
    c_bar = [c * c * spectral_norm(terms.theta(i, rederived=True)) * zz / (1.0 - lam * lam) for i in (1, 2)]
    bound1 = [c_bar[0] * lam ** (2 * N) for N in N_list]
    bound2 = [c_bar[1] * lam ** (2 * N) for N in N_list]
    burn = max(_burn_in(d1), _burn_in(d2)) if N_list else 0
    return DecayProfile(N_list, d1, d2, lam, m, c, c_bar[0], c_bar[1], bound1, bound2, burn)
