"""Inner maximizers for acquisition functions.

``direct_maximize`` is a classic DIRECT (DIviding RECTangles) global search
over a box: derivative-free, deterministic, and tolerant of noisy
objectives. ``lbfgs_maximize`` is a multi-restart quasi-Newton local search
for smooth objectives, backed by SciPy's bounded L-BFGS.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import OptimizerFailure


@dataclass(frozen=True)
class BoxBounds:
    """Axis-aligned box with strictly ordered per-dimension bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("bounds require lower < upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def uniform(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.span

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.span

    def to_dict(self) -> dict:
        return {"lower": [float(v) for v in self.lower], "upper": [float(v) for v in self.upper]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoxBounds":
        return cls(np.asarray(d["lower"], dtype=float), np.asarray(d["upper"], dtype=float))


@dataclass(frozen=True)
class OptimizerBudget:
    """Evaluation/iteration caps and a minimum-improvement stopping tolerance."""

    max_evals: int = 500
    max_iters: int = 1000
    tol: float = 0.0

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")

    def to_dict(self) -> dict:
        return {"max_evals": self.max_evals, "max_iters": self.max_iters, "tol": self.tol}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerBudget":
        return cls(int(d["max_evals"]), int(d["max_iters"]), float(d["tol"]))


class _BudgetExhausted(Exception):
    pass


@dataclass
class _Rect:
    center: np.ndarray          # normalized coordinates
    levels: np.ndarray          # trisection count per dimension
    fval: float                 # objective at the center (minimization sign)
    index: int                  # insertion order, used for deterministic ties
    diameter: float = field(init=False)

    def __post_init__(self):
        sides = 3.0 ** (-self.levels.astype(float))
        self.diameter = 0.5 * float(np.linalg.norm(sides))


def _potentially_optimal(rects: list[_Rect], f_min: float, eps: float) -> list[_Rect]:
    """Jones' two-condition selection applied to per-diameter class minima."""
    by_diam: dict[float, _Rect] = {}
    for r in rects:
        cur = by_diam.get(r.diameter)
        if cur is None or (r.fval, r.index) < (cur.fval, cur.index):
            by_diam[r.diameter] = r
    diams = sorted(by_diam)
    fvals = [by_diam[d].fval for d in diams]
    chosen = []
    for j, dj in enumerate(diams):
        fj = fvals[j]
        left = [(fj - fvals[i]) / (dj - diams[i]) for i in range(j)]
        right = [(fvals[i] - fj) / (diams[i] - dj) for i in range(j + 1, len(diams))]
        k_lo = max(left) if left else 0.0
        k_hi = min(right) if right else np.inf
        if k_lo > k_hi:
            continue
        if np.isfinite(k_hi):
            if fj - k_hi * dj > f_min - eps * abs(f_min):
                continue
        chosen.append(by_diam[dj])
    return chosen


def direct_maximize(
    objective,
    bounds: BoxBounds,
    budget: OptimizerBudget | None = None,
    eps: float = 1e-4,
) -> tuple[np.ndarray, float]:
    """Maximize a black-box objective over a box with DIRECT.

    Non-finite objective values are treated as worst-possible so the search
    continues around them; if every evaluation is non-finite the search
    raises ``OptimizerFailure``. The evaluation sequence does not depend on
    the budget, so the returned value is non-decreasing in ``max_evals``.

    Returns ``(x_best, value_best)`` with ``x_best`` inside the bounds.
    """
    budget = budget or OptimizerBudget()
    dim = bounds.dim
    state = {"evals": 0, "best_f": np.inf, "best_x": None}

    def f_norm(u: np.ndarray) -> float:
        if state["evals"] >= budget.max_evals:
            raise _BudgetExhausted
        state["evals"] += 1
        v = objective(bounds.denormalize(u))
        v = -float(v) if np.isfinite(v) else np.inf
        if v < state["best_f"]:
            state["best_f"] = v
            state["best_x"] = u.copy()
        return v

    rects: list[_Rect] = []
    counter = 0
    try:
        c0 = np.full(dim, 0.5)
        rects.append(_Rect(c0, np.zeros(dim, dtype=int), f_norm(c0), counter))
        counter += 1
        for _ in range(budget.max_iters):
            f_before = state["best_f"]
            selected = _potentially_optimal(rects, state["best_f"], eps)
            if not selected:
                break
            selected.sort(key=lambda r: (r.diameter, r.index))
            for rect in selected:
                max_level = rect.levels.min()  # smallest level = longest side
                dims = np.flatnonzero(rect.levels == max_level)
                delta = 3.0 ** (-(max_level + 1))
                trial: list[tuple[float, int, np.ndarray, float, np.ndarray, float]] = []
                for i in dims:
                    cp = rect.center.copy()
                    cp[i] += delta
                    cm = rect.center.copy()
                    cm[i] -= delta
                    fp = f_norm(cp)
                    fm = f_norm(cm)
                    trial.append((min(fp, fm), int(i), cp, fp, cm, fm))
                trial.sort(key=lambda t: (t[0], t[1]))
                levels = rect.levels.copy()
                for _, i, cp, fp, cm, fm in trial:
                    levels = levels.copy()
                    levels[i] += 1
                    rects.append(_Rect(cp, levels, fp, counter))
                    counter += 1
                    rects.append(_Rect(cm, levels, fm, counter))
                    counter += 1
                rect.levels = levels
                rect.__post_init__()  # refresh diameter after shrinking
            if budget.tol > 0.0 and f_before - state["best_f"] < budget.tol:
                break
    except _BudgetExhausted:
        pass

    if state["best_x"] is None or not np.isfinite(state["best_f"]):
        raise OptimizerFailure("DIRECT saw no finite objective value")
    return bounds.denormalize(state["best_x"]), -state["best_f"]


def _central_diff_grad(fun, bounds: BoxBounds, rel_step: float = 1e-6):
    h = rel_step * bounds.span

    def grad(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        for i in range(x.size):
            hi = min(x[i] + h[i], bounds.upper[i])
            lo = max(x[i] - h[i], bounds.lower[i])
            xp = x.copy()
            xp[i] = hi
            xm = x.copy()
            xm[i] = lo
            g[i] = (fun(xp) - fun(xm)) / (hi - lo)
        return g

    return grad


def lbfgs_maximize(
    objective,
    bounds: BoxBounds,
    gradient=None,
    restarts: int = 16,
    budget: OptimizerBudget | None = None,
    seed: int | np.random.Generator | None = None,
) -> tuple[np.ndarray, float]:
    """Maximize a smooth objective with L-BFGS from uniform random restarts.

    When no analytic ``gradient`` is supplied, central finite differences
    with per-dimension step ``1e-6 * (upper - lower)`` are used, with the
    stencil clamped to the box. Restart points are drawn sequentially from
    ``seed``, so a longer run extends a shorter one. If every restart fails
    to improve on its start point, the best sampled start is returned with
    a ``RuntimeWarning``.
    """
    budget = budget or OptimizerBudget(max_evals=200, max_iters=100)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def neg(x: np.ndarray) -> float:
        v = objective(np.asarray(x, dtype=float))
        return -float(v) if np.isfinite(v) else 1e300

    jac = (lambda x: -np.asarray(gradient(x), dtype=float)) if gradient is not None else _central_diff_grad(neg, bounds)
    scipy_bounds = list(zip(bounds.lower, bounds.upper))
    options = {
        "maxcor": 10,
        "maxiter": budget.max_iters,
        "maxfun": budget.max_evals,
        "ftol": max(budget.tol, 1e-12),
    }

    best_x = None
    best_v = -np.inf
    best_start_x = None
    best_start_v = -np.inf
    improved = False
    for _ in range(max(1, restarts)):
        x0 = bounds.uniform(rng)
        v0 = -neg(x0)
        if v0 > best_start_v:
            best_start_v = v0
            best_start_x = x0
        if v0 > best_v:
            best_v = v0
            best_x = x0
        res = minimize(neg, x0, jac=jac, method="L-BFGS-B", bounds=scipy_bounds, options=options)
        xr = bounds.clip(res.x)
        vr = -neg(xr)
        if np.isfinite(vr) and vr > best_v:
            best_x, best_v = xr, vr
        if np.isfinite(vr) and vr > v0:
            improved = True

    if not improved:
        warnings.warn("L-BFGS improved on no restart; returning best start point", RuntimeWarning)
        return np.asarray(best_start_x, dtype=float), best_start_v
    return np.asarray(best_x, dtype=float), best_v
