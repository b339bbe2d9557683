"""JSON run configuration: loading, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, ParseError, ValidationError
from .model import CostWeights, SystemModel

MATRIX_KEYS = ("A", "B1", "B2", "H1", "H2", "Q1", "Q2", "R11", "R12", "R21", "R22")
VECTOR_KEYS = ("x0", "xhat1_0", "xhat2_0")
SECTION_KEYS = {
    "solver": {"tol", "max_iter"},
    "observer": {"method", "margin", "max_iter", "L1", "L2", "leader_stacked_output", "shared_lyapunov"},
    "sim": {"steps"},
    "analysis": {"N_list"},
}
TOP_KEYS = set(MATRIX_KEYS) | set(VECTOR_KEYS) | set(SECTION_KEYS) | {"description"}
METHODS = ("auto", "lmi", "dual-riccati")

BUNDLED = {
    "paper_section5": "paper_section5.json",
    "paper_section5_literal_r12": "paper_section5_literal_r12.json",
}


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 100_000


@dataclass(frozen=True)
class ObserverOptions:
    method: str = "auto"
    margin: float = 1e-6
    max_iter: int = 20_000
    L1: Optional[np.ndarray] = None
    L2: Optional[np.ndarray] = None
    leader_stacked_output: bool = False
    shared_lyapunov: bool = False


@dataclass(frozen=True)
class RunConfig:
    model: SystemModel
    weights: CostWeights
    x0: np.ndarray
    xhat1_0: np.ndarray
    xhat2_0: np.ndarray
    solver: SolverOptions = field(default_factory=SolverOptions)
    observer: ObserverOptions = field(default_factory=ObserverOptions)
    steps: int = 200
    N_list: tuple = tuple(range(201))
    description: str = ""
    source: str = ""

    @property
    def design_model(self) -> SystemModel:
        """Model seen by the observers; differs only with the stacked leader output enabled."""
        if self.observer.leader_stacked_output:
            return self.model.with_stacked_leader_output()
        return self.model

    def with_overrides(self, steps=None, tol=None, method=None, n_from=None) -> "RunConfig":
        cfg = self
        if steps is not None:
            if steps < 0:
                raise ValidationError("sim.steps", "must be >= 0")
            cfg = replace(cfg, steps=int(steps))
        if tol is not None:
            if not tol > 0:
                raise ValidationError("solver.tol", "must be positive")
            cfg = replace(cfg, solver=replace(cfg.solver, tol=float(tol)))
        if method is not None:
            if method not in METHODS:
                raise ValidationError("observer.method", f"must be one of {', '.join(METHODS)}")
            cfg = replace(cfg, observer=replace(cfg.observer, method=method))
        if n_from is not None:
            kept = tuple(N for N in cfg.N_list if N >= n_from)
            if n_from < 0 or not kept:
                raise ValidationError("analysis.N_list", f"no entries at or after N = {n_from}")
            cfg = replace(cfg, N_list=kept)
        return cfg


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _matrix(value, name) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ValidationError(name, "expected a nonempty list of rows")
    width = len(value[0])
    if width == 0 or any(len(r) != width for r in value):
        raise ValidationError(name, "rows must be nonempty and of equal length")
    return _numbers(value, name).reshape(len(value), width)


def _vector(value, name) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ValidationError(name, "expected a nonempty list of numbers")
    return _numbers(value, name)


def _numbers(value, name) -> np.ndarray:
    flat = []
    stack = [value]
    while stack:
        item = stack.pop()
        if isinstance(item, list):
            stack.extend(reversed(item))
        elif isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ValidationError(name, f"non-numeric entry {item!r}")
        elif not math.isfinite(item):
            raise ValidationError(name, "entries must be finite")
        else:
            flat.append(float(item))
    return np.array(flat)


def _number(section, key, value, kind, positive=False):
    name = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, "expected a number")
    if kind is int:
        if float(value) != int(value):
            raise ValidationError(name, "expected an integer")
        value = int(value)
    value = kind(value)
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    if positive and value <= 0:
        raise ValidationError(name, "must be positive")
    return value


def _section(data, name):
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ValidationError(name, "expected an object")
    unknown = sorted(set(sec) - SECTION_KEYS[name])
    if unknown:
        raise ValidationError(f"{name}.{unknown[0]}", "unknown key")
    return sec


def _n_list(value):
    if isinstance(value, dict):
        extra = sorted(set(value) - {"start", "stop", "step"})
        if extra:
            raise ValidationError(f"analysis.N_list.{extra[0]}", "unknown key")
        start = _number("analysis.N_list", "start", value.get("start", 0), int)
        stop = _number("analysis.N_list", "stop", value.get("stop", 200), int)
        step = _number("analysis.N_list", "step", value.get("step", 1), int, positive=True)
        values = list(range(start, stop + 1, step))
    elif isinstance(value, list):
        values = [_number("analysis", "N_list", v, int) for v in value]
    else:
        raise ValidationError("analysis.N_list", "expected a list of integers or {start, stop, step}")
    if not values or values[0] < 0 or any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("analysis.N_list", "must be nonempty, nonnegative and strictly ascending")
    return tuple(values)


def config_from_dict(data: dict, source: str = "") -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("<root>", "expected a JSON object")
    unknown = sorted(set(data) - TOP_KEYS)
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    for key in MATRIX_KEYS:
        if key not in data:
            raise ValidationError(key, "required")
    mats = {key: _matrix(data[key], key) for key in MATRIX_KEYS}
    try:
        model = SystemModel(*(mats[k] for k in ("A", "B1", "B2", "H1", "H2")))
    except DimensionMismatch as exc:
        raise ValidationError(str(exc).split(" ", 1)[0], str(exc)) from None
    weights = CostWeights(*(mats[k] for k in ("Q1", "Q2", "R11", "R12", "R21", "R22"))).validate(model)

    n = model.n
    vecs = {}
    for key in VECTOR_KEYS:
        if key in data:
            v = _vector(data[key], key)
            if v.shape != (n,):
                raise ValidationError(key, f"expected length {n}, got {v.size}")
        elif key == "x0":
            v = np.array([(-1.0) ** i for i in range(n)])
        else:
            v = np.zeros(n)
        vecs[key] = v

    sec = _section(data, "solver")
    solver = SolverOptions(
        tol=_number("solver", "tol", sec.get("tol", 1e-12), float, positive=True),
        max_iter=_number("solver", "max_iter", sec.get("max_iter", 100_000), int, positive=True),
    )

    sec = _section(data, "observer")
    method = sec.get("method", "auto")
    if method not in METHODS:
        raise ValidationError("observer.method", f"must be one of {', '.join(METHODS)}")
    flags = {}
    for key in ("leader_stacked_output", "shared_lyapunov"):
        flag = sec.get(key, False)
        if not isinstance(flag, bool):
            raise ValidationError(f"observer.{key}", "expected true or false")
        flags[key] = flag
    gains = {}
    s2 = model.s1 + model.s2 if flags["leader_stacked_output"] else model.s2
    for key, cols in (("L1", model.s1), ("L2", s2)):
        if key in sec:
            L = _matrix(sec[key], f"observer.{key}")
            if L.shape != (n, cols):
                raise ValidationError(f"observer.{key}", f"expected shape {(n, cols)}, got {L.shape}")
            gains[key] = L
    if len(gains) == 1:
        raise ValidationError("observer.L1" if "L2" in gains else "observer.L2", "L1 and L2 must be given together")
    observer = ObserverOptions(
        method=method,
        margin=_number("observer", "margin", sec.get("margin", 1e-6), float, positive=True),
        max_iter=_number("observer", "max_iter", sec.get("max_iter", 20_000), int, positive=True),
        L1=gains.get("L1"),
        L2=gains.get("L2"),
        **flags,
    )

    sec = _section(data, "sim")
    steps = _number("sim", "steps", sec.get("steps", 200), int)
    if steps < 0:
        raise ValidationError("sim.steps", "must be >= 0")

    sec = _section(data, "analysis")
    N_list = _n_list(sec.get("N_list", {"start": 0, "stop": 200}))

    description = data.get("description", "")
    if not isinstance(description, str):
        raise ValidationError("description", "expected a string")
    return RunConfig(model, weights, vecs["x0"], vecs["xhat1_0"], vecs["xhat2_0"],
                     solver, observer, steps, N_list, description, source)


def parse_text(text: str, source: str = "") -> RunConfig:
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    except ValueError as exc:
        raise ParseError(0, str(exc)) from None
    return config_from_dict(data, source)


def parse_config(path) -> RunConfig:
    """Load and validate a run configuration.

    Raises :class:`ParseError` for malformed JSON and :class:`ValidationError`
    naming the offending field for anything else.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise ParseError(0, "file is not valid UTF-8") from None
    return parse_text(text, str(path))


def bundled_config_text(name: str = "paper_section5") -> str:
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled config {name!r}")
    return resources.files(__package__).joinpath("data").joinpath(BUNDLED[name]).read_text(encoding="utf-8")


def load_bundled(name: str = "paper_section5") -> RunConfig:
    return parse_text(bundled_config_text(name), f"<bundled:{name}>")
