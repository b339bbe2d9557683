"""Command line front end.

Each subcommand runs the pipeline up to its stage, writes its products under
``--out`` and prints a comma-delimited summary. On failure the files written
by the run are removed and the exit status identifies the failing stage:
2 configuration, 3 Riccati nonconvergence, 4 observer or stability failure,
5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import METHODS, load_bundled, parse_config
from .errors import ConfigError, StackelbergError, ValidationError, VerificationFailed
from .observer import user_design
from .pipeline import run_analysis, run_design, run_simulation, run_solve
from .reports import (
    OutputDir,
    cost_dict,
    decay_csv,
    decay_dict,
    design_dict,
    solution_dict,
    table_csv,
    trajectory_csv,
)


class _Printer:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, text=""):
        if not self.quiet:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")

    def pairs(self, items):
        self(table_csv(["quantity", "value"], [[k, v] for k, v in items]))


def _load(args):
    cfg = parse_config(args.config) if args.config else load_bundled("paper_section5")
    return cfg.with_overrides(
        steps=getattr(args, "steps", None),
        tol=getattr(args, "tol", None),
        method=getattr(args, "method", None),
        n_from=getattr(args, "n_from", None),
    )


def _gain_items(prefix, M):
    M = np.atleast_2d(M)
    return [(f"{prefix}[{i + 1},{j + 1}]", float(M[i, j])) for i in range(M.shape[0]) for j in range(M.shape[1])]


def _plots(out, traj=None, profile=None):
    from .plotting import plot_decay, plot_error_trajectory, plot_state_trajectory

    if traj is not None:
        plot_error_trajectory(traj, out.reserve("error_trajectory.png"))
        plot_state_trajectory(traj, out.reserve("state_trajectory.png"))
    if profile is not None:
        plot_decay(profile, out.reserve("decay.png"))


def _load_gains(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read gains from {path}: {exc}") from None
    gains = {}
    for key in ("K1", "K2", "L1", "L2"):
        if key not in data:
            raise ValidationError(f"gains.{key}", "required")
        try:
            gains[key] = np.array(data[key], dtype=float, ndmin=2)
        except (TypeError, ValueError):
            raise ValidationError(f"gains.{key}", "expected a numeric matrix") from None
    return gains


def cmd_solve(args, out, say):
    cfg = _load(args)
    sol = run_solve(cfg)
    out.write_json("solution.json", solution_dict(sol))
    say.pairs(_gain_items("K1", sol.K1) + _gain_items("K2", sol.K2) + [
        ("iterations", sol.iterations),
        ("residual_1", sol.residuals[0]),
        ("residual_2", sol.residuals[1]),
        ("monotone", "yes" if sol.monotone else "no"),
    ])
    return 0


def cmd_design(args, out, say):
    cfg = _load(args)
    sol = run_solve(cfg)
    design = run_design(cfg, sol)
    out.write_json("solution.json", solution_dict(sol))
    out.write_json("observer.json", design_dict(design, sol.K1, sol.K2))
    items = [("method", design.method)] + _gain_items("L1", design.L1) + _gain_items("L2", design.L2)
    items.append(("verdict", design.verdict.describe()))
    if design.certificate is not None:
        items.append(("lmi_max_eig", design.certificate.lmi_max_eig))
    say.pairs(items)
    return 0


def cmd_simulate(args, out, say):
    cfg = _load(args)
    if args.gains:
        g = _load_gains(args.gains)
        user_design(cfg.design_model, g["K1"], g["K2"], g["L1"], g["L2"])
        K1, K2, L1, L2 = g["K1"], g["K2"], g["L1"], g["L2"]
    else:
        sol = run_solve(cfg)
        design = run_design(cfg, sol)
        out.write_json("solution.json", solution_dict(sol))
        out.write_json("observer.json", design_dict(design, sol.K1, sol.K2))
        K1, K2, L1, L2 = sol.K1, sol.K2, design.L1, design.L2
    traj = run_simulation(cfg, K1, K2, L1, L2)
    out.write_text("trajectory.csv", trajectory_csv(traj))
    if args.plots:
        _plots(out, traj=traj)
    last = len(traj) - 1
    say.pairs([
        ("steps", last),
        ("final_state_norm", float(np.sqrt(traj.x[last] @ traj.x[last]))),
        ("final_error_norm", float(np.sqrt(traj.xtilde[last] @ traj.xtilde[last]))),
    ])
    return 0


def cmd_analyze(args, out, say):
    cfg = _load(args)
    sol = run_solve(cfg)
    design = run_design(cfg, sol)
    report, corr, profile = run_analysis(cfg, sol, design)
    out.write_json("solution.json", solution_dict(sol))
    out.write_json("observer.json", design_dict(design, sol.K1, sol.K2))
    out.write_json("costs.json", {**cost_dict(report, corr), "decay": decay_dict(profile)})
    out.write_text("decay.csv", decay_csv(profile))
    if args.plots:
        traj = run_simulation(cfg, sol.K1, sol.K2, design.L1, design.L2)
        _plots(out, traj=traj, profile=profile)
    say.pairs([
        ("J1_star_fb", report.J1_star_fb), ("J1_obs", report.J1_obs), ("delta_J1", report.delta_J1),
        ("J2_star_fb", report.J2_star_fb), ("J2_obs", report.J2_obs), ("delta_J2", report.delta_J2),
        ("reconciliation_gap_1", report.reconciliation_gap_1),
        ("reconciliation_gap_2", report.reconciliation_gap_2),
        ("rederived_gap_1", report.rederived_gap_1),
        ("rederived_gap_2", report.rederived_gap_2),
        ("lambda_hat", profile.lambda_hat),
        ("burn_in", profile.burn_in),
        ("decay_bound_holds", "yes" if profile.bound_holds() else "no"),
    ])
    return 0


def cmd_verify(args, out, say):
    from .verify import run_verify

    cfg = _load(args)
    report = run_verify(cfg, inject_fault=args.inject_fault)
    header = ["check", "status", "value", "limit", "detail"]
    rows = [[c.name, "pass" if c.passed else "FAIL", c.value, c.limit, c.detail] for c in report.checks]
    text = table_csv(header, rows)
    out.write_text("verify.csv", text)
    say(text)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        raise VerificationFailed(f"{len(report.failures)} invariant check(s) failed: {names}")
    return 0


def cmd_reproduce(args, out, say):
    from .reproduce import reproduce, table_rows

    overridden = any(getattr(args, k) is not None for k in ("config", "steps", "tol", "method", "n_from"))
    rep = reproduce(_load(args) if overridden else None)
    header, rows = table_rows(rep)
    text = table_csv(header, rows)
    out.write_text("reproduce.csv", text)
    out.write_json("reproduce.json", {
        "rows": [dict(zip(header, r)) for r in rows],
        "solution": solution_dict(rep.solution),
    })
    out.write_text("trajectory.csv", trajectory_csv(rep.trajectory))
    out.write_json("costs.json", {**cost_dict(rep.costs, rep.corrections), "decay": decay_dict(rep.decay)})
    out.write_text("decay.csv", decay_csv(rep.decay))
    if not args.no_plots:
        _plots(out, traj=rep.trajectory, profile=rep.decay)
    say(text)
    counts = {s: sum(r.status == s for r in rep.rows) for s in ("pass", "FAIL", "info")}
    say(f"# {counts['pass']} pass, {counts['FAIL']} FAIL, {counts['info']} info")
    return 0


COMMANDS = {
    "solve": (cmd_solve, "solve the coupled Riccati equations"),
    "design": (cmd_design, "solve, then synthesize observer gains"),
    "simulate": (cmd_simulate, "solve, design and simulate; writes trajectory.csv"),
    "analyze": (cmd_analyze, "exact costs, correction terms and decay profile"),
    "verify": (cmd_verify, "run the invariant suite; exit 5 on any failure"),
    "reproduce-paper": (cmd_reproduce, "run the bundled example against its reference values"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: bundled two-state example)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--steps", type=int, help="simulation steps")
    common.add_argument("--tol", type=float, help="Riccati stopping tolerance")
    common.add_argument("--method", choices=METHODS, help="observer synthesis method")
    common.add_argument("--from", dest="n_from", type=int, help="first N of the decay profile")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout, errors only on stderr")

    parser = argparse.ArgumentParser(prog="stackelberg-observer", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "simulate":
            p.add_argument("--gains", help="JSON file with K1, K2, L1, L2 to use instead of solving")
        if name in ("simulate", "analyze"):
            p.add_argument("--plots", action="store_true", help="also render PNG figures")
        if name == "reproduce-paper":
            p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
        if name == "verify":
            p.add_argument("--inject-fault", action="store_true", help="perturb K1 to exercise the suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    out = OutputDir(args.out)
    say = _Printer(args.quiet)
    fn = COMMANDS[args.command][0]
    try:
        return fn(args, out, say)
    except StackelbergError as exc:
        out.rollback()
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except (OSError, ValueError) as exc:
        out.rollback()
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except BaseException:
        out.rollback()
        raise


if __name__ == "__main__":
    sys.exit(main())
