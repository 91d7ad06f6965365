"""Experiment configs, seeded batch runs, median aggregation and CSV output.

Config files are flat ``key=value`` lines; ``#`` starts a comment. Example::

    algorithm=one_plus_four
    problem=ellipsoid
    d=10
    condition=1e6
    rotated=true
    budget=5000
    seeds=1..99
    A0=adapted-to(1e6)
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS, RunTrace, TraceRecord, UnknownColumn, record_progress, record_state
from .objectives import geometric_spectrum, make_ellipsoid, random_rotation, sphere
from .sampling import RngStream
from .strategies import default_params, initial_state, run

ALGORITHMS = ("he_es", "one_plus_four", "one_plus_one")
CSV_HEADER = "run_seed,t," + ",".join(CSV_COLUMNS)


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str = ""):
        super().__init__(f"{field_name}: {message}" if message else field_name)
        self.field = field_name


@dataclass
class ExperimentConfig:
    algorithm: str
    problem: str = "sphere"
    d: int = 10
    condition: float = 1.0
    rotated: bool = False
    normalize_det: bool = False
    problem_seed: int = 0
    m0: str = "unit"
    sigma0: float = 1.0
    A0: str = "identity"
    A0_entries: tuple[float, ...] | None = None
    budget: int = 1000
    seeds: tuple[int, ...] = (0,)
    params: dict = field(default_factory=dict)
    recorder: str = "full"
    output: str | None = None


_PARAM_KEYS = {
    "he_es": {"lambda_tilde": int, "c_s": float, "d_s": float, "eta_A": float, "kappa_trust": float},
    "one_plus_four": {"c_sigma": float, "eta_A": float, "kappa_trust": float},
    "one_plus_one": {"c_sigma": float},
}
_ALL_PARAM_KEYS = {k for keys in _PARAM_KEYS.values() for k in keys}
_KEYS = {
    "algorithm", "problem", "d", "condition", "rotated", "normalize_det", "problem_seed", "m0",
    "sigma0", "A0", "A0_entries", "budget", "seeds", "recorder", "output",
} | _ALL_PARAM_KEYS
_ADAPTED = re.compile(r"adapted-to\(\s*([^)]+?)\s*\)$")


def _bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(key, f"expected a boolean, got {text!r}")


def _number(key: str, text: str, kind=float):
    try:
        value = float(text) if kind is float else int(text)
    except ValueError:
        raise ValidationError(key, f"expected {kind.__name__}, got {text!r}") from None
    if kind is float and not math.isfinite(value):
        raise ValidationError(key, "must be finite")
    return value


def _seeds(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\.\.(\d+)", part)
        try:
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ValidationError("seeds", f"bad seed entry {part!r}") from None
    if any(not 0 <= s < 2**64 for s in out):
        raise ValidationError("seeds", "seeds must be 64-bit unsigned integers")
    return tuple(out)


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        raw[key] = value

    if "algorithm" not in raw:
        raise ValidationError("algorithm", "required")
    algorithm = raw["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ValidationError("algorithm", f"must be one of {', '.join(ALGORITHMS)}")
    cfg = ExperimentConfig(algorithm=algorithm)

    if "problem" in raw:
        if raw["problem"] not in ("sphere", "ellipsoid"):
            raise ValidationError("problem", "must be sphere or ellipsoid")
        cfg.problem = raw["problem"]
    for key in ("d", "budget", "problem_seed"):
        if key in raw:
            setattr(cfg, key, _number(key, raw[key], int))
    for key in ("condition", "sigma0"):
        if key in raw:
            setattr(cfg, key, _number(key, raw[key]))
    for key in ("rotated", "normalize_det"):
        if key in raw:
            setattr(cfg, key, _bool(key, raw[key]))
    if "seeds" in raw:
        cfg.seeds = _seeds(raw["seeds"])
    for key in ("m0", "A0", "recorder", "output"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "A0_entries" in raw:
        cfg.A0_entries = tuple(_number("A0_entries", v) for v in raw["A0_entries"].split(","))

    allowed = _PARAM_KEYS[algorithm]
    for key in _ALL_PARAM_KEYS & raw.keys():
        if key not in allowed:
            raise ValidationError(key, f"not a parameter of {algorithm}")
        cfg.params[key] = _number(key, raw[key], allowed[key])

    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.budget < 1:
        raise ValidationError("budget", "must be at least 1")
    if not cfg.seeds:
        raise ValidationError("seeds", "need at least one seed")
    min_d = 2 if cfg.algorithm != "one_plus_one" or cfg.problem == "ellipsoid" else 1
    if cfg.d < min_d:
        raise ValidationError("d", f"must be at least {min_d}")
    if cfg.condition < 1:
        raise ValidationError("condition", "must be >= 1")
    if not cfg.sigma0 > 0:
        raise ValidationError("sigma0", "must be positive")
    if cfg.recorder not in ("full", "progress"):
        raise ValidationError("recorder", "must be full or progress")
    if cfg.m0 not in ("unit", "ones"):
        try:
            values = [float(v) for v in cfg.m0.split(",")]
        except ValueError:
            raise ValidationError("m0", "must be unit, ones or a comma list of numbers") from None
        if len(values) != cfg.d or not all(map(math.isfinite, values)):
            raise ValidationError("m0", f"needs {cfg.d} finite entries")
    if cfg.A0 == "given":
        if cfg.A0_entries is None or len(cfg.A0_entries) != cfg.d * cfg.d:
            raise ValidationError("A0_entries", f"A0=given needs {cfg.d * cfg.d} entries")
        if abs(np.linalg.det(np.reshape(cfg.A0_entries, (cfg.d, cfg.d)))) <= 1e-300:
            raise ValidationError("A0_entries", "matrix is singular")
    elif cfg.A0 != "identity":
        m = _ADAPTED.match(cfg.A0)
        if not m:
            raise ValidationError("A0", "must be identity, given or adapted-to(<condition>)")
        kappa = _number("A0", m.group(1))
        if kappa < 1:
            raise ValidationError("A0", "adapted-to condition must be >= 1")
    if cfg.algorithm == "one_plus_one" and cfg.A0 != "identity":
        raise ValidationError("A0", "one_plus_one runs with the identity")
    try:
        default_params(cfg.algorithm, cfg.d, **cfg.params)
    except ValueError as exc:
        raise ValidationError(next(iter(cfg.params), "params"), str(exc)) from None


def build_problem(cfg: ExperimentConfig):
    if cfg.problem == "sphere":
        return sphere(cfg.d)
    return make_ellipsoid(cfg.d, cfg.condition, cfg.normalize_det, RngStream(cfg.problem_seed), cfg.rotated)


def adapted_factor(d: int, condition: float, rng: RngStream) -> np.ndarray:
    """Symmetric square root of ``Q^T diag(lam) Q`` with det 1 and the given conditioning."""
    Q = random_rotation(rng, d)
    return (Q.T * np.sqrt(geometric_spectrum(d, condition, True))) @ Q


def initial_for(cfg: ExperimentConfig, q, rng: RngStream):
    d = cfg.d
    if cfg.m0 == "unit":
        z = rng.normals(d)
        m0 = q.optimum + z / math.sqrt(z @ z)
    elif cfg.m0 == "ones":
        m0 = np.ones(d)
    else:
        m0 = np.array([float(v) for v in cfg.m0.split(",")])
    if cfg.A0 == "identity":
        A0 = np.eye(d)
    elif cfg.A0 == "given":
        A0 = np.reshape(np.array(cfg.A0_entries, dtype=float), (d, d))
    else:
        A0 = adapted_factor(d, float(_ADAPTED.match(cfg.A0).group(1)), rng)
    return initial_state(m0, cfg.sigma0, A0)


def run_one(cfg: ExperimentConfig, seed: int) -> RunTrace:
    """One seeded run; errors end the trace early instead of propagating."""
    root = RngStream(seed)
    trace = RunTrace(seed=seed)
    recorder = record_state if cfg.recorder == "full" else record_progress
    try:
        q = build_problem(cfg)
        start = initial_for(cfg, q, root.split(0))
        params = default_params(cfg.algorithm, cfg.d, **cfg.params)
        run(cfg.algorithm, q, start, root.split(1), cfg.budget, params, recorder, seed, trace=trace)
    except Exception as exc:  # a failed run must not take its siblings down
        trace.error = f"{type(exc).__name__}: {exc}"
    return trace


def _run_one_packed(args):
    return run_one(*args)


def run_experiment(cfg: ExperimentConfig, parallel: int = 1) -> list[RunTrace]:
    """One trace per seed, in seed order, whatever the degree of parallelism."""
    jobs = [(cfg, s) for s in cfg.seeds]
    if parallel <= 1 or len(jobs) == 1:
        return [run_one(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_one_packed, jobs))


def lower_median(values: Sequence[float]) -> float:
    v = sorted(values)
    return v[(len(v) - 1) // 2]


def aggregate_median(traces: Sequence[RunTrace], column: str) -> np.ndarray:
    """Per-position lower median over the traces that reach that position."""
    if not traces:
        raise ValueError("need at least one trace")
    if column not in TraceRecord._fields:
        raise UnknownColumn(column)
    length = max(len(tr) for tr in traces)
    cols = [tr.column(column) for tr in traces]
    return np.array([lower_median([c[i] for c in cols if i < c.size]) for i in range(length)])


def median_trace(traces: Sequence[RunTrace]) -> RunTrace:
    """Every column aggregated by :func:`aggregate_median`; ``seed`` is None."""
    names = TraceRecord._fields[1:]
    meds = {n: aggregate_median(traces, n) for n in names}
    out = RunTrace(seed=None)
    for i in range(meds["f_m"].size):
        vals = {n: float(meds[n][i]) for n in names}
        vals["success"] = bool(vals["success"])
        out.append(TraceRecord(t=i + 1, **vals))
    return out


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_csv(traces: Sequence[RunTrace]) -> str:
    lines = [CSV_HEADER]
    for tr in traces:
        seed = "median" if tr.seed is None else str(tr.seed)
        for r in tr.records:
            lines.append(",".join([
                seed, str(r.t), _fmt(r.f_m), _fmt(r.sigma), _fmt(r.det_C), _fmt(r.tr_normalized),
                _fmt(r.kappa_HC), _fmt(r.f_mu), "1" if r.success else "0",
            ]))
    return "\n".join(lines) + "\n"


def emit_csv(traces: Sequence[RunTrace], path) -> None:
    Path(path).write_text(format_csv(traces), encoding="utf-8", newline="\n")


def read_csv(path) -> list[RunTrace]:
    """Inverse of :func:`emit_csv`; ``delta`` is not stored and reads as NaN."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a trace CSV")
    traces: dict[str, RunTrace] = {}
    for line in lines[1:]:
        seed, t, *vals = line.split(",")
        tr = traces.setdefault(seed, RunTrace(seed=None if seed == "median" else int(seed)))
        *reals, success = vals
        tr.append(TraceRecord(int(t), *map(float, reals), success == "1", math.nan))
    return list(traces.values())
