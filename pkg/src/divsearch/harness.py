"""Benchmark harness: synthetic strategy landscapes and the search-vs-random
comparison.

The take-off benchmark builds a piecewise-flat landscape from representative
take-off states of discovered jumping strategies: inputs are assigned to the
nearest mode center (normalized coordinates), each mode maps to a distinct
angular outcome feature, and wide flat basins make uniform random sampling
rediscover the same modes repeatedly, which is exactly the regime the
surrogate-guided search is built for.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from math import pi
from pathlib import Path

import numpy as np

from .bds import (
    _KEY_INIT,
    _KEY_ORACLE,
    _KEY_RANDOM_SEARCH,
    BdsConfig,
    TraceRecord,
    _dumps,
    _evaluate,
    derived_rng,
    read_trace,
    run_bds,
)
from .errors import DivSearchError
from .features import FeatureMetric
from .optimizers import BoxBounds

REPORT_SCHEMA_VERSION = 1

# Default clustering threshold for angular strategy features: well under the
# pi/2 novelty threshold, and a sixth of the inter-mode spacing used below.
DEFAULT_ANGULAR_CLUSTER_THRESHOLD = pi / 6

# Representative take-off state features (v_z, omega_x, omega_z, alpha) of
# the six high-jump strategies used as benchmark mode centers.
HIGHJUMP_TAKEOFF_STATES = {
    "fosbury_flop": (-2.40, -3.00, 1.00, -0.05),
    "western_roll_up": (-0.50, 1.00, -1.00, 2.09),
    "straddle": (-2.21, 1.00, 0.88, 1.65),
    "front_kick": (-0.52, 1.00, -0.26, 0.45),
    "side_dive": (-1.83, -2.78, -0.32, 1.18),
    "side_jump": (-1.99, -1.44, 0.44, 0.70),
}

# Obstacle-jump take-off states (omega_x, omega_y, omega_z).
OBSTACLE_TAKEOFF_STATES = {
    "front_kick": (1.15, -1.11, 3.89),
    "side_kick": (3.00, 3.00, -2.00),
    "twist_jump_cw": (-1.50, 1.50, -2.00),
    "straddle": (0.00, 0.00, 1.00),
    "twist_jump_ccw": (-2.67, 0.00, -1.44),
    "dive_turn": (-0.74, -2.15, -0.41),
}


@dataclass
class SyntheticOracle:
    """Deterministic-or-noisy stand-in for the expensive outcome function.

    Inputs are assigned to the nearest mode center after normalizing each
    dimension to [0, 1] by the bounds; ties break to the lowest mode index.
    Within ``plateau_radius`` (normalized distance) of a center the feature
    is exactly that mode's feature; beyond it a small radial drift of
    ``drift_gain`` per unit distance is added, keeping basins flat in
    character without being perfectly constant. Gaussian ``feature_noise``
    is added per component and angular features are wrapped to the
    principal range.
    """

    mode_centers: np.ndarray
    mode_features: np.ndarray
    bounds: BoxBounds
    metric: FeatureMetric
    cluster_threshold: float
    plateau_radius: float = 0.35
    feature_noise: float = 0.0
    drift_gain: float = 0.2

    def __post_init__(self):
        self.mode_centers = np.atleast_2d(np.asarray(self.mode_centers, dtype=float))
        self.mode_features = np.atleast_2d(np.asarray(self.mode_features, dtype=float))
        if self.mode_centers.shape[0] < 2:
            raise ValueError("a synthetic oracle needs at least 2 modes")
        if self.mode_centers.shape[0] != self.mode_features.shape[0]:
            raise ValueError("mode centers and features must pair up")
        for c in self.mode_centers:
            if not self.bounds.contains(c):
                raise ValueError(f"mode center {c} lies outside the bounds")
        m = self.mode_features.shape[0]
        for i in range(m):
            for j in range(i + 1, m):
                d = self.metric.distance(self.mode_features[i], self.mode_features[j])
                if d < 2.0 * self.cluster_threshold - 1e-12:
                    raise ValueError(
                        f"mode features {i} and {j} are separated by {d:.4g}, "
                        f"need >= 2 * cluster_threshold = {2 * self.cluster_threshold:.4g}"
                    )
        self._centers_norm = self.bounds.normalize(self.mode_centers)

    @property
    def feature_dim(self) -> int:
        return self.mode_features.shape[1]

    @property
    def feature_range(self) -> np.ndarray:
        if self.metric.is_angular:
            half = 0.5 * self.metric.period
            return np.tile([-half, half], (self.feature_dim, 1))
        lo = self.mode_features.min(axis=0)
        hi = self.mode_features.max(axis=0)
        pad = 0.25 * (hi - lo) + 4.0 * self.feature_noise
        return np.stack([lo - pad, hi + pad], axis=1)

    def assign(self, x: np.ndarray) -> int:
        xn = self.bounds.normalize(np.asarray(x, dtype=float))
        d2 = np.sum((self._centers_norm - xn[None, :]) ** 2, axis=1)
        return int(np.argmin(d2))

    def evaluate(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        k = self.assign(x)
        xn = self.bounds.normalize(np.asarray(x, dtype=float))
        r = float(np.linalg.norm(xn - self._centers_norm[k]))
        f = self.mode_features[k].copy()
        f += self.drift_gain * max(0.0, r - self.plateau_radius)
        if self.feature_noise > 0.0:
            f += rng.normal(0.0, self.feature_noise, size=self.feature_dim)
        return self.metric.wrap(f)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "bounds": self.bounds.to_dict(),
            "metric": self.metric.to_dict(),
            "modes": [
                {"x": [float(v) for v in c], "f": [float(v) for v in f]}
                for c, f in zip(self.mode_centers, self.mode_features)
            ],
            "cluster_threshold": self.cluster_threshold,
            "plateau_radius": self.plateau_radius,
            "feature_noise": self.feature_noise,
            "drift_gain": self.drift_gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticOracle":
        return cls(
            mode_centers=np.asarray([m["x"] for m in d["modes"]], dtype=float),
            mode_features=np.asarray([m["f"] for m in d["modes"]], dtype=float),
            bounds=BoxBounds.from_dict(d["bounds"]),
            metric=FeatureMetric.from_dict(d["metric"]),
            cluster_threshold=float(d["cluster_threshold"]),
            plateau_radius=float(d.get("plateau_radius", 0.35)),
            feature_noise=float(d.get("feature_noise", 0.0)),
            drift_gain=float(d.get("drift_gain", 0.2)),
        )


def _envelope_bounds(centers: np.ndarray, margin: float = 0.25) -> BoxBounds:
    lo = centers.min(axis=0)
    hi = centers.max(axis=0)
    span = hi - lo
    return BoxBounds(lo - margin * span, hi + margin * span)


def make_takeoff_benchmark(
    task: str = "highjump",
    feature_noise: float = 0.05,
) -> tuple[SyntheticOracle, BoxBounds, FeatureMetric]:
    """Benchmark landscape built from the representative take-off states.

    Each of the six modes maps to a distinct 1-D angular strategy feature
    (evenly spaced pi/3 apart, clear of the wrap seam); the input box is the
    per-dimension envelope of the centers widened by 25% on each side.
    """
    if task == "highjump":
        centers = np.asarray(list(HIGHJUMP_TAKEOFF_STATES.values()), dtype=float)
    elif task == "obstacle":
        centers = np.asarray(list(OBSTACLE_TAKEOFF_STATES.values()), dtype=float)
    else:
        raise ValueError(f"unknown take-off benchmark task {task!r}")
    bounds = _envelope_bounds(centers)
    metric = FeatureMetric.angular(2.0 * pi)
    n_modes = centers.shape[0]
    features = (-5.0 * pi / 6.0 + np.arange(n_modes) * (pi / 3.0)).reshape(-1, 1)
    oracle = SyntheticOracle(
        mode_centers=centers,
        mode_features=features,
        bounds=bounds,
        metric=metric,
        cluster_threshold=DEFAULT_ANGULAR_CLUSTER_THRESHOLD,
        feature_noise=feature_noise,
    )
    return oracle, bounds, metric


def distinct_strategies(
    features, metric: FeatureMetric, cluster_threshold: float
) -> tuple[int, list[int]]:
    """Greedy sequential clustering of outcome features.

    A feature starts a new cluster iff its distance to every existing
    cluster representative exceeds the threshold; representatives are the
    first members. Deterministic in input order.
    """
    if not cluster_threshold > 0.0:
        raise ValueError("cluster_threshold must be > 0")
    reps: list[np.ndarray] = []
    labels: list[int] = []
    for f in np.atleast_2d(np.asarray(features, dtype=float)):
        for j, rep in enumerate(reps):
            if metric.distance(f, rep) <= cluster_threshold:
                labels.append(j)
                break
        else:
            reps.append(f)
            labels.append(len(reps) - 1)
    return len(reps), labels


@dataclass
class CellResult:
    method: str
    seed: int
    budget: int
    distinct_count: int | None
    ok: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "budget": self.budget,
            "distinct_count": self.distinct_count,
            "ok": self.ok,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        return cls(
            method=str(d["method"]),
            seed=int(d["seed"]),
            budget=int(d["budget"]),
            distinct_count=None if d["distinct_count"] is None else int(d["distinct_count"]),
            ok=bool(d["ok"]),
            error=d["error"],
        )


@dataclass
class RunSamples:
    """All queried points and returned features of one (method, seed) run."""

    method: str
    seed: int
    x: list[list[float]]
    f: list  # per-sample feature list, or None for failed evaluations
    ok: list[bool]

    def to_dict(self) -> dict:
        return {"method": self.method, "seed": self.seed, "x": self.x, "f": self.f, "ok": self.ok}

    @classmethod
    def from_dict(cls, d: dict) -> "RunSamples":
        return cls(
            method=str(d["method"]),
            seed=int(d["seed"]),
            x=[[float(v) for v in row] for row in d["x"]],
            f=[None if row is None else [float(v) for v in row] for row in d["f"]],
            ok=[bool(v) for v in d["ok"]],
        )


@dataclass
class ComparisonReport:
    budgets: list[int]
    seeds: list[int]
    n_init: int
    cluster_threshold: float
    metric: dict
    cells: list[CellResult]
    runs: list[RunSamples]
    aggregates: dict
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def failed_fraction(self) -> float:
        if not self.cells:
            return 0.0
        return sum(1 for c in self.cells if not c.ok) / len(self.cells)

    def mean_distinct(self, method: str, budget: int) -> float:
        return float(self.aggregates[method][str(budget)]["mean"])

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "budgets": self.budgets,
            "seeds": self.seeds,
            "n_init": self.n_init,
            "cluster_threshold": self.cluster_threshold,
            "metric": self.metric,
            "cells": [c.to_dict() for c in self.cells],
            "runs": [r.to_dict() for r in self.runs],
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        if d.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(
            budgets=[int(v) for v in d["budgets"]],
            seeds=[int(v) for v in d["seeds"]],
            n_init=int(d["n_init"]),
            cluster_threshold=float(d["cluster_threshold"]),
            metric=d["metric"],
            cells=[CellResult.from_dict(c) for c in d["cells"]],
            runs=[RunSamples.from_dict(r) for r in d["runs"]],
            aggregates=d["aggregates"],
        )

    def save(self, path: Path | str):
        """Write the JSON report and a CSV table next to it."""
        path = Path(path)
        path.write_text(_dumps(self.to_dict()) + "\n")
        with open(path.with_suffix(".csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "seed", "budget", "distinct_count"])
            for c in self.cells:
                if c.ok:
                    writer.writerow([c.method, c.seed, c.budget, c.distinct_count])

    @classmethod
    def load(cls, path: Path | str) -> "ComparisonReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _prefix_counts(
    records: list[TraceRecord],
    budgets: list[int],
    n_init: int,
    metric: FeatureMetric,
    threshold: float,
) -> dict[int, int | None]:
    """Distinct-strategy count over the first (n_init + budget) samples."""
    counts: dict[int, int | None] = {}
    n_loop_done = sum(1 for r in records if r.step is not None)
    for b in budgets:
        if b > n_loop_done or n_init > sum(1 for r in records if r.step is None):
            counts[b] = None
            continue
        feats = [r.f for r in records[: n_init + b] if r.ok]
        counts[b] = distinct_strategies(feats, metric, threshold)[0] if feats else 0
    return counts


def _random_search_run(
    oracle,
    bounds: BoxBounds,
    seed: int,
    n_init: int,
    budget: int,
    trace_path: Path | None,
    config_dict: dict,
) -> list[TraceRecord]:
    """Uniform-random baseline sharing the initialization prefix with the
    surrogate-guided run for the same seed."""
    records: list[TraceRecord] = []
    lines = []
    lines.append(_dumps({"kind": "header", "schema_version": 1, "seed": seed, "config": config_dict}))
    for index in range(n_init + budget):
        if index < n_init:
            x = bounds.lower + derived_rng(seed, _KEY_INIT, index).uniform(size=bounds.dim) * bounds.span
            step, phase = None, "init"
        else:
            j = index - n_init
            x = bounds.lower + derived_rng(seed, _KEY_RANDOM_SEARCH, j).uniform(size=bounds.dim) * bounds.span
            step, phase = j, "random"
        f, ok, err = _evaluate(oracle, x, derived_rng(seed, _KEY_ORACLE, index))
        rec = TraceRecord(
            index=index,
            step=step,
            phase=phase,
            x=[float(v) for v in x],
            f=None if f is None else [float(v) for v in f],
            ok=ok,
            error=err,
            acq=None,
            gp={},
        )
        records.append(rec)
        lines.append(_dumps(rec.to_dict()))
    if trace_path is not None:
        trace_path.write_text("\n".join(lines) + "\n")
    return records


def run_comparison(
    oracle,
    bounds: BoxBounds,
    metric: FeatureMetric,
    budgets: list[int],
    seeds: list[int],
    bds_config: BdsConfig,
    out_path: Path | str,
    cluster_threshold: float | None = None,
    trace_dir: Path | str | None = None,
) -> ComparisonReport:
    """Paired search-vs-random comparison over seeds and budget prefixes.

    For each seed both methods share the same ``n_init`` initialization
    samples and then add up to ``max(budgets)`` method-specific samples;
    distinct-strategy counts are reported at every budget prefix. A run
    that aborts leaves failed cells for the budgets it did not reach; the
    report aggregates over completed cells only.
    """
    if not budgets or not seeds:
        raise ValueError("budgets and seeds must be non-empty")
    budgets = sorted(int(b) for b in budgets)
    seeds = [int(s) for s in seeds]
    if cluster_threshold is None:
        cluster_threshold = getattr(oracle, "cluster_threshold", None)
        if cluster_threshold is None:
            raise ValueError("cluster_threshold is required for oracles without a default")
    max_budget = budgets[-1]
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)

    cells: list[CellResult] = []
    runs: list[RunSamples] = []
    for seed in seeds:
        config = replace(bds_config, seed=seed, n=max_budget, bounds=bounds, metric=metric)
        trace_path = None if trace_dir is None else trace_dir / f"bds_seed{seed}.jsonl"
        error = None
        try:
            result = run_bds(oracle, config, trace_path=trace_path)
            records = result.trace.records
        except DivSearchError as exc:
            error = f"{type(exc).__name__}: {exc}"
            records = read_trace(trace_path).records if trace_path is not None and trace_path.exists() else []
        counts = _prefix_counts(records, budgets, config.n_init, metric, cluster_threshold)
        for b in budgets:
            ok = counts[b] is not None
            cells.append(CellResult("bds", seed, b, counts[b], ok, None if ok else error or "incomplete run"))
        runs.append(RunSamples("bds", seed, [r.x for r in records], [r.f for r in records], [r.ok for r in records]))

        rnd_path = None if trace_dir is None else trace_dir / f"random_seed{seed}.jsonl"
        rnd_records = _random_search_run(
            oracle, bounds, seed, config.n_init, max_budget, rnd_path, config.to_dict()
        )
        rnd_counts = _prefix_counts(rnd_records, budgets, config.n_init, metric, cluster_threshold)
        for b in budgets:
            ok = rnd_counts[b] is not None
            cells.append(CellResult("random", seed, b, rnd_counts[b], ok))
        runs.append(
            RunSamples("random", seed, [r.x for r in rnd_records], [r.f for r in rnd_records], [r.ok for r in rnd_records])
        )

    aggregates: dict = {}
    for method in ("bds", "random"):
        aggregates[method] = {}
        for b in budgets:
            vals = [c.distinct_count for c in cells if c.method == method and c.budget == b and c.ok]
            if vals:
                mean = float(np.mean(vals))
                std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            else:
                mean, std = float("nan"), float("nan")
            aggregates[method][str(b)] = {"mean": mean, "std": std, "count": len(vals)}

    report = ComparisonReport(
        budgets=budgets,
        seeds=seeds,
        n_init=bds_config.n_init,
        cluster_threshold=float(cluster_threshold),
        metric=metric.to_dict(),
        cells=cells,
        runs=runs,
        aggregates=aggregates,
    )
    report.save(out_path)
    return report
