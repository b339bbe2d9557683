"""Serialization of run products to JSON and CSV.

JSON floats use Python's shortest round-trip representation, CSV cells use
17 significant digits; both reload to the identical double. Non-finite
values become ``null`` in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np

from .costs import CorrectionReport, CostReport, DecayProfile
from .linalg import StabilityVerdict
from .observer import ObserverDesign
from .simulation import Trajectory
from .solver import StackelbergSolution


def to_jsonable(value):
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def verdict_dict(v: StabilityVerdict) -> dict:
    return {"kind": v.kind, "power": v.power, "norm": v.norm, "summary": v.describe()}


def solution_dict(sol: StackelbergSolution) -> dict:
    return {
        "K1": sol.K1, "K2": sol.K2, "P1": sol.P1, "P2": sol.P2,
        "Gamma1": sol.Gamma1, "Gamma2": sol.Gamma2, "S": sol.S, "M1": sol.M1,
        "iterations": sol.iterations,
        "riccati_residuals": list(sol.residuals),
        "monotone": sol.monotone,
    }


def design_dict(design: ObserverDesign, K1, K2) -> dict:
    out = {
        "method": design.method,
        "K1": K1, "K2": K2, "L1": design.L1, "L2": design.L2,
        "script_A": design.script_A,
        "verdict": verdict_dict(design.verdict),
        "certificate": None,
    }
    cert = design.certificate
    if cert is not None:
        out["certificate"] = {
            "P1": cert.P1, "P2": cert.P2, "W1": cert.W1, "W2": cert.W2,
            "margin": cert.margin, "lmi_max_eig": cert.lmi_max_eig,
            "iterations": cert.iterations, "shared": cert.shared,
        }
    return out


def cost_dict(report: CostReport, corr: CorrectionReport) -> dict:
    out = {f.name: getattr(report, f.name) for f in fields(report)}
    terms = corr.terms
    out["correction_terms"] = {
        name: getattr(terms, name)
        for name in ("S1", "S2", "T1", "T2", "S1_rederived", "S2_rederived", "T1_rederived", "T2_rederived")
    }
    out["printed_x_block_norm"] = list(corr.printed_x_block_norm)
    out["matching_form"] = [
        corr.matching_form(1, scale=report.J1_obs),
        corr.matching_form(2, scale=report.J2_obs),
    ]
    return out


def decay_dict(p: DecayProfile) -> dict:
    return {
        "lambda_hat": p.lambda_hat, "lambda_power": p.lambda_power, "c": p.c,
        "c_bar_1": p.c_bar_1, "c_bar_2": p.c_bar_2, "burn_in": p.burn_in,
        "bound_holds": p.bound_holds(),
    }


def fmt(x) -> str:
    return format(float(x), ".17g")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def trajectory_header(traj: Trajectory) -> list:
    cols = ["k"]
    for name in ("x", "xhat1", "xhat2", "xtilde1", "xtilde2", "u1", "u2", "y1", "y2"):
        width = getattr(traj, name).shape[1]
        cols += [f"{name}_{i}" for i in range(1, width + 1)]
    return cols + ["stage_cost_1", "stage_cost_2"]


def trajectory_csv(traj: Trajectory) -> str:
    blocks = [getattr(traj, name) for name in ("x", "xhat1", "xhat2", "xtilde1", "xtilde2", "u1", "u2", "y1", "y2")]
    rows = []
    for k in range(len(traj)):
        row = [str(int(traj.k[k]))]
        for b in blocks:
            row += [fmt(v) for v in b[k]]
        row += [fmt(traj.stage_cost_1[k]), fmt(traj.stage_cost_2[k])]
        rows.append(row)
    return _csv_text(trajectory_header(traj), rows)


def decay_csv(p: DecayProfile) -> str:
    rows = [
        [str(N), fmt(d1), fmt(d2), fmt(b1), fmt(b2)]
        for N, d1, d2, b1, b2 in zip(p.N_values, p.delta_J1_at_N, p.delta_J2_at_N, p.bound_1, p.bound_2)
    ]
    return _csv_text(["N", "delta_J1", "delta_J2", "bound_1", "bound_2"], rows)


def table_csv(header, rows) -> str:
    return _csv_text(header, [[fmt(v) if isinstance(v, float) else str(v) for v in row] for row in rows])


class OutputDir:
    """Writes files under one directory and remembers them so a failed run can be rolled back."""

    def __init__(self, root):
        self.root = Path(root)
        self.written = []

    def path(self, name) -> Path:
        return self.root / name

    def _claim(self, name) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.path(name)
        self.written.append(p)
        return p

    def write_text(self, name, text) -> Path:
        p = self._claim(name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return p

    def write_json(self, name, obj) -> Path:
        return self.write_text(name, dumps(obj))

    def reserve(self, name) -> Path:
        """Path for a file produced by another writer (e.g. a figure)."""
        return self._claim(name)

    def rollback(self):
        for p in reversed(self.written):
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()


def as_plain(obj):
    """Dataclass to dict, one level deep."""
    if is_dataclass(obj):
        return {f.name: getattr(obj, f.name) for f in fields(obj)}
    return obj
