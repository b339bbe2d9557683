"""Solve, design, simulate and analyze in sequence from a :class:`RunConfig`."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .config import RunConfig
from .costs import CorrectionReport, CostReport, DecayProfile, cost_report, decay_profile, initial_augmented_state
from .observer import ObserverDesign, design_observer, user_design
from .simulation import Trajectory, simulate
from .solver import StackelbergSolution, solve_are


@dataclass
class RunResult:
    config: RunConfig
    solution: Optional[StackelbergSolution] = None
    design: Optional[ObserverDesign] = None
    trajectory: Optional[Trajectory] = None
    costs: Optional[CostReport] = None
    corrections: Optional[CorrectionReport] = None
    decay: Optional[DecayProfile] = None


def run_solve(cfg: RunConfig) -> StackelbergSolution:
    return solve_are(cfg.model, cfg.weights, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)


def run_design(cfg: RunConfig, sol: StackelbergSolution) -> ObserverDesign:
    model = cfg.design_model
    if cfg.observer.L1 is not None:
        return user_design(model, sol.K1, sol.K2, cfg.observer.L1, cfg.observer.L2)
    return design_observer(
        model, sol.K1, sol.K2,
        method=cfg.observer.method, margin=cfg.observer.margin,
        shared=cfg.observer.shared_lyapunov, max_iter=cfg.observer.max_iter,
    )


def run_simulation(cfg: RunConfig, K1, K2, L1, L2) -> Trajectory:
    return simulate(cfg.design_model, K1, K2, L1, L2, cfg.weights, cfg.x0, cfg.xhat1_0, cfg.xhat2_0, steps=cfg.steps)


def run_analysis(cfg: RunConfig, sol: StackelbergSolution, design: ObserverDesign):
    model = cfg.design_model
    report, corr = cost_report(model, sol, design.L1, design.L2, cfg.weights, cfg.x0, cfg.xhat1_0, cfg.xhat2_0)
    z0 = initial_augmented_state(cfg.x0, cfg.xhat1_0, cfg.xhat2_0)
    profile = decay_profile(model, sol, design.L1, design.L2, cfg.weights, z0, cfg.N_list)
    return report, corr, profile


def run(cfg: RunConfig, stage: str = "analyze") -> RunResult:
    """Run every stage up to and including ``stage``."""
    order = ("solve", "design", "simulate", "analyze")
    if stage not in order:
        raise ValueError(f"unknown stage {stage!r}")
    last = order.index(stage)
    res = RunResult(cfg)
    res.solution = run_solve(cfg)
    if last >= 1:
        res.design = run_design(cfg, res.solution)
    if last >= 2:
        res.trajectory = run_simulation(cfg, res.solution.K1, res.solution.K2, res.design.L1, res.design.L2)
    if last >= 3:
        res.costs, res.corrections, res.decay = run_analysis(cfg, res.solution, res.design)
    return res
