"""Sequential diversity search driven by a GP surrogate.

The loop alternates two phases on a fixed schedule: exploration queries the
point of largest posterior standard deviation (found with multi-restart
L-BFGS), and diversity optimization queries the maximizer of the expected
minimum feature distance to everything observed (found with DIRECT, using a
fixed Monte-Carlo draw set so the inner objective is deterministic).

All randomness derives from a single seed through per-step spawn keys, so a
run can be resumed from its trace and reproduce the remaining queries
exactly, and two runs with the same seed produce byte-identical traces.
Wall-clock timings are kept on the in-memory records only; persisting them
would break that guarantee.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    Phase,
    diversity_value_mc,
    exploration_value,
    phase_for_step,
)
from .errors import TraceError
from .features import FeatureMetric
from .gp import GpModel, HyperBounds
from .optimizers import BoxBounds, OptimizerBudget, direct_maximize, lbfgs_maximize

TRACE_SCHEMA_VERSION = 1

# Spawn-key namespaces for deriving independent streams from the run seed.
_KEY_INIT = 0
_KEY_ORACLE = 1
_KEY_ACQ = 2
_KEY_LBFGS = 3
_KEY_RANDOM_SEARCH = 5

# How many of the inner optimizer's best candidates are re-ranked with the
# larger final Monte-Carlo draw set.
_RERANK_TOP = 8


def derived_rng(seed: int, *key: int) -> np.random.Generator:
    """Stream derived from the run seed; independent per spawn key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


class Oracle(Protocol):
    """The expensive, possibly stochastic outcome function being explored."""

    feature_dim: int
    feature_range: np.ndarray  # (feature_dim, 2) rows of [lo, hi]

    def evaluate(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class BdsConfig:
    """Budgets, bounds, metric, and sub-configs for one search run."""

    n: int
    bounds: BoxBounds
    metric: FeatureMetric
    n_exp: int = 3
    n_opt: int = 3
    n_init: int = 3
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    direct_budget: OptimizerBudget = field(default_factory=lambda: OptimizerBudget(500, 1000, 0.0))
    lbfgs_budget: OptimizerBudget = field(default_factory=lambda: OptimizerBudget(200, 60, 0.0))
    lbfgs_restarts: int = 16
    hyper_bounds: HyperBounds | None = None
    refit_until: int = 20
    refit_every: int = 5
    fit_restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.n_exp < 0 or self.n_opt < 0 or self.n_exp + self.n_opt < 1:
            raise ValueError("need n_exp >= 0, n_opt >= 0, n_exp + n_opt >= 1")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_exp": self.n_exp,
            "n_opt": self.n_opt,
            "n_init": self.n_init,
            "seed": self.seed,
            "bounds": self.bounds.to_dict(),
            "metric": self.metric.to_dict(),
            "acquisition": self.acquisition.to_dict(),
            "direct_budget": self.direct_budget.to_dict(),
            "lbfgs_budget": self.lbfgs_budget.to_dict(),
            "lbfgs_restarts": self.lbfgs_restarts,
            "hyper_bounds": None if self.hyper_bounds is None else self.hyper_bounds.to_dict(),
            "refit_until": self.refit_until,
            "refit_every": self.refit_every,
            "fit_restarts": self.fit_restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BdsConfig":
        return cls(
            n=int(d["n"]),
            bounds=BoxBounds.from_dict(d["bounds"]),
            metric=FeatureMetric.from_dict(d["metric"]),
            n_exp=int(d["n_exp"]),
            n_opt=int(d["n_opt"]),
            n_init=int(d["n_init"]),
            acquisition=AcquisitionConfig.from_dict(d["acquisition"]),
            direct_budget=OptimizerBudget.from_dict(d["direct_budget"]),
            lbfgs_budget=OptimizerBudget.from_dict(d["lbfgs_budget"]),
            lbfgs_restarts=int(d["lbfgs_restarts"]),
            hyper_bounds=None if d["hyper_bounds"] is None else HyperBounds.from_dict(d["hyper_bounds"]),
            refit_until=int(d["refit_until"]),
            refit_every=int(d["refit_every"]),
            fit_restarts=int(d["fit_restarts"]),
            seed=int(d["seed"]),
        )


@dataclass
class TraceRecord:
    """One oracle query. ``step`` is None for initialization samples."""

    index: int
    step: int | None
    phase: str
    x: list[float]
    f: list[float] | None
    ok: bool
    error: str | None
    acq: float | None
    gp: dict
    wall_time_s: float | None = None  # in-memory only; never serialized

    def to_dict(self) -> dict:
        return {
            "kind": "sample",
            "index": self.index,
            "step": self.step,
            "phase": self.phase,
            "x": self.x,
            "f": self.f,
            "ok": self.ok,
            "error": self.error,
            "acq": self.acq,
            "gp": self.gp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        return cls(
            index=int(d["index"]),
            step=None if d["step"] is None else int(d["step"]),
            phase=str(d["phase"]),
            x=[float(v) for v in d["x"]],
            f=None if d["f"] is None else [float(v) for v in d["f"]],
            ok=bool(d["ok"]),
            error=d["error"],
            acq=None if d["acq"] is None else float(d["acq"]),
            gp=d["gp"],
        )


@dataclass
class BdsTrace:
    seed: int
    config: dict
    records: list[TraceRecord] = field(default_factory=list)
    final_model: dict | None = None

    @property
    def n_init_done(self) -> int:
        return sum(1 for r in self.records if r.step is None)

    @property
    def n_loop_done(self) -> int:
        return sum(1 for r in self.records if r.step is not None)

    def ok_samples(self) -> tuple[np.ndarray, np.ndarray]:
        xs = [r.x for r in self.records if r.ok]
        fs = [r.f for r in self.records if r.ok]
        return np.asarray(xs, dtype=float), np.asarray(fs, dtype=float)


@dataclass
class BdsResult:
    inputs: np.ndarray
    features: np.ndarray
    trace: BdsTrace


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class _TraceWriter:
    def __init__(self, path: Path | str | None, append: bool = False):
        self._fh = open(path, "a" if append else "w") if path is not None else None

    def line(self, obj: dict):
        if self._fh is not None:
            self._fh.write(_dumps(obj) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


def _gp_state(model: GpModel) -> dict:
    return {
        "theta": float(model.params.theta),
        "lambda": [float(v) for v in model.params.lam],
        "eta": float(model.observations.noise_eta),
        "nobs": model.observations.count,
    }


def _make_model(oracle: Oracle, config: BdsConfig) -> GpModel:
    hyper = config.hyper_bounds
    if hyper is None:
        fr = np.atleast_2d(np.asarray(oracle.feature_range, dtype=float))
        hyper = HyperBounds.default_for_range(float(np.max(fr[:, 1] - fr[:, 0])))
    return GpModel.create(
        bounds=config.bounds,
        feature_range=oracle.feature_range,
        hyper_bounds=hyper,
        fit_seed=config.seed,
        fit_restarts=config.fit_restarts,
        refit_until=config.refit_until,
        refit_every=config.refit_every,
    )


def _evaluate(oracle: Oracle, x: np.ndarray, rng: np.random.Generator):
    try:
        f = np.atleast_1d(np.asarray(oracle.evaluate(x, rng), dtype=float))
        return f, True, None
    except Exception as exc:  # failed samples consume budget but skip the GP
        return None, False, f"{type(exc).__name__}: {exc}"


def _propose_explore(model: GpModel, config: BdsConfig, t: int):
    objective = lambda x: exploration_value(model.posterior(x))
    x_star, value = lbfgs_maximize(
        objective,
        bounds=config.bounds,
        restarts=config.lbfgs_restarts,
        budget=config.lbfgs_budget,
        seed=derived_rng(config.seed, _KEY_LBFGS, t),
    )
    return config.bounds.clip(x_star), float(value)


def _propose_exploit(model: GpModel, features: list, config: BdsConfig, t: int):
    refs = np.asarray(features, dtype=float)
    acq_rng = derived_rng(config.seed, _KEY_ACQ, t)
    df = refs.shape[1]
    z_inner = acq_rng.standard_normal((config.acquisition.n_mc, df))
    z_final = acq_rng.standard_normal((config.acquisition.n_mc_final, df))
    seen: list[tuple[float, int, np.ndarray]] = []

    def objective(x: np.ndarray) -> float:
        v = diversity_value_mc(model.posterior(x), refs, config.metric, config.acquisition, draws=z_inner)
        seen.append((v, len(seen), x.copy()))
        return v

    direct_maximize(objective, bounds=config.bounds, budget=config.direct_budget)

    # Re-rank the inner optimizer's best candidates with the larger draw set.
    seen.sort(key=lambda s: (-s[0], s[1]))
    candidates: list[np.ndarray] = []
    keys = set()
    for _, _, x in seen:
        key = tuple(np.round(x, 12))
        if key not in keys:
            keys.add(key)
            candidates.append(x)
        if len(candidates) == _RERANK_TOP:
            break
    best_x, best_v = None, -np.inf
    for x in candidates:
        v = diversity_value_mc(model.posterior(x), refs, config.metric, config.acquisition, draws=z_final)
        if v > best_v:
            best_x, best_v = x, v
    return config.bounds.clip(best_x), float(best_v)


def _run_loop(
    oracle: Oracle,
    config: BdsConfig,
    model: GpModel,
    trace: BdsTrace,
    writer: _TraceWriter,
    start_init: int,
    start_step: int,
) -> BdsResult:
    xs, fs = trace.ok_samples()
    features = [list(map(float, f)) for f in fs]
    try:
        index = len(trace.records)
        for i in range(start_init, config.n_init):
            tic = time.perf_counter()
            x = config.bounds.lower + derived_rng(config.seed, _KEY_INIT, i).uniform(size=config.bounds.dim) * config.bounds.span
            f, ok, err = _evaluate(oracle, x, derived_rng(config.seed, _KEY_ORACLE, index))
            if ok:
                model = model.updated(x, f)
                features.append([float(v) for v in f])
            rec = TraceRecord(
                index=index,
                step=None,
                phase="init",
                x=[float(v) for v in x],
                f=None if f is None else [float(v) for v in f],
                ok=ok,
                error=err,
                acq=None,
                gp=_gp_state(model),
                wall_time_s=time.perf_counter() - tic,
            )
            trace.records.append(rec)
            writer.line(rec.to_dict())
            index += 1

        for t in range(start_step, config.n):
            tic = time.perf_counter()
            phase = phase_for_step(t, config.n_exp, config.n_opt)
            if phase is Phase.EXPLOIT and features:
                x, acq = _propose_exploit(model, features, config, t)
            else:
                # exploration; also the fallback when nothing has been
                # observed yet and the diversity objective is undefined
                x, acq = _propose_explore(model, config, t)
            f, ok, err = _evaluate(oracle, x, derived_rng(config.seed, _KEY_ORACLE, index))
            if ok:
                model = model.updated(x, f)
                features.append([float(v) for v in f])
            rec = TraceRecord(
                index=index,
                step=t,
                phase=phase.value,
                x=[float(v) for v in x],
                f=None if f is None else [float(v) for v in f],
                ok=ok,
                error=err,
                acq=acq,
                gp=_gp_state(model),
                wall_time_s=time.perf_counter() - tic,
            )
            trace.records.append(rec)
            writer.line(rec.to_dict())
            index += 1

        trace.final_model = model.to_snapshot()
        writer.line({"kind": "final", "model": trace.final_model})
    finally:
        writer.close()

    xs, fs = trace.ok_samples()
    return BdsResult(inputs=xs, features=fs, trace=trace)


def run_bds(oracle: Oracle, config: BdsConfig, trace_path: Path | str | None = None) -> BdsResult:
    """Run the full search loop against an oracle.

    Initializes the surrogate with ``n_init`` uniform in-bounds samples,
    then performs exactly ``n`` phase-scheduled loop evaluations. Failed
    oracle evaluations are recorded, consume budget, and are excluded from
    the surrogate. A surrogate failure aborts the run, leaving a partial
    trace at ``trace_path``.
    """
    model = _make_model(oracle, config)
    trace = BdsTrace(seed=config.seed, config=config.to_dict())
    writer = _TraceWriter(trace_path)
    writer.line({"kind": "header", "schema_version": TRACE_SCHEMA_VERSION, "seed": config.seed, "config": trace.config})
    return _run_loop(oracle, config, model, trace, writer, start_init=0, start_step=0)


def read_trace(path: Path | str) -> BdsTrace:
    """Parse a line-delimited trace file; raises ``TraceError`` on corruption."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise TraceError(f"{path}: empty trace file")
    trace: BdsTrace | None = None
    for lineno, raw in enumerate(lines, start=1):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        kind = obj.get("kind")
        try:
            if kind == "header":
                if obj.get("schema_version") != TRACE_SCHEMA_VERSION:
                    raise TraceError(
                        f"{path}: line {lineno}: unsupported schema_version {obj.get('schema_version')!r}"
                    )
                trace = BdsTrace(seed=int(obj["seed"]), config=obj["config"])
            elif kind == "sample":
                if trace is None:
                    raise TraceError(f"{path}: line {lineno}: sample before header")
                rec = TraceRecord.from_dict(obj)
                if rec.index != len(trace.records):
                    raise TraceError(f"{path}: line {lineno}: sample index {rec.index} out of order")
                trace.records.append(rec)
            elif kind == "final":
                if trace is None:
                    raise TraceError(f"{path}: line {lineno}: final record before header")
                trace.final_model = obj["model"]
            else:
                raise TraceError(f"{path}: line {lineno}: unknown record kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"{path}: line {lineno}: malformed record ({exc})") from exc
    if trace is None:
        raise TraceError(f"{path}: missing header record")
    return trace


def resume_bds(trace_path: Path | str, oracle: Oracle, config: BdsConfig) -> BdsResult:
    """Continue an interrupted run from its trace.

    The trace must have been produced with an identical config; the
    surrogate is rebuilt by replaying the recorded observations (refits
    replay on the same schedule and streams), so the remaining queries
    match an uninterrupted run exactly. A fully completed trace is
    returned as-is with no oracle calls.
    """
    trace = read_trace(trace_path)
    expected = config.to_dict()
    if trace.config != expected:
        diffs = [k for k in expected if trace.config.get(k) != expected[k]]
        diffs += [k for k in trace.config if k not in expected]
        raise TraceError(f"{trace_path}: config mismatch on fields {sorted(set(diffs))}")

    if trace.n_init_done == config.n_init and trace.n_loop_done >= config.n:
        xs, fs = trace.ok_samples()
        return BdsResult(inputs=xs, features=fs, trace=trace)

    model = _make_model(oracle, config)
    for rec in trace.records:
        if rec.ok:
            model = model.updated(np.asarray(rec.x), np.asarray(rec.f))
    writer = _TraceWriter(trace_path, append=True)
    return _run_loop(
        oracle,
        config,
        model,
        trace,
        writer,
        start_init=trace.n_init_done,
        start_step=trace.n_loop_done,
    )
