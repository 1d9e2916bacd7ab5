"""Gaussian-process surrogate of the expensive outcome function.

One scalar GP per output dimension, all sharing the inputs, the Matern-5/2
kernel with per-dimension Mahalanobis weights, and the observation noise.
Inputs are affinely mapped to the unit box internally so the weight fitting
stays well conditioned; raw coordinates are used at every interface.

The kernel distance is the Mahalanobis distance
``d = sqrt((x - x')^T diag(lambda) (x - x'))``; using the raw quadratic form
instead would make the Gram matrix indefinite on ordinary point sets.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from . import backend
from .errors import SurrogateFailure
from .optimizers import BoxBounds

# Jitter ladder applied to (K + eta^2 I) before declaring the surrogate dead.
_JITTERS = (1e-10, 1e-9, 1e-8)

SNAPSHOT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 parameters: signal variance and per-dimension weights."""

    theta: float
    lam: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if not (np.isfinite(self.theta) and self.theta > 0.0):
            raise ValueError("theta must be positive and finite")
        if lam.ndim != 1 or not np.all(np.isfinite(lam) & (lam > 0.0)):
            raise ValueError("every lambda component must be positive and finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def input_dim(self) -> int:
        return self.lam.size


@dataclass(frozen=True)
class HyperBounds:
    """Search box for (theta, lambda, eta) during hyperparameter fitting."""

    theta: tuple[float, float]
    lam: tuple[float, float]
    eta: tuple[float, float]

    def __post_init__(self):
        for name, (lo, hi) in (("theta", self.theta), ("lam", self.lam), ("eta", self.eta)):
            if not (0.0 < lo < hi) and not (name == "eta" and 0.0 <= lo < hi):
                raise ValueError(f"{name} bounds must satisfy 0 < lo < hi")

    @classmethod
    def default_for_range(cls, feature_span: float) -> "HyperBounds":
        s = max(float(feature_span), 1e-8)
        return cls(
            theta=(1e-6 * s * s, 4.0 * s * s),
            lam=(1e-2, 4e2),
            eta=(1e-4 * s, 0.5 * s),
        )

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "lambda": list(self.lam), "eta": list(self.eta)}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperBounds":
        return cls(tuple(d["theta"]), tuple(d["lambda"]), tuple(d["eta"]))


@dataclass(frozen=True)
class ObservationSet:
    """Paired inputs (t, dx) and outputs (t, df) plus the noise level eta."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_eta: float = 0.0

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if inputs.shape[0] != outputs.shape[0]:
            raise ValueError("inputs and outputs must have equal count")
        if self.noise_eta < 0.0:
            raise ValueError("noise_eta must be >= 0")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "noise_eta", float(self.noise_eta))

    @classmethod
    def empty(cls, input_dim: int, output_dim: int, noise_eta: float = 0.0) -> "ObservationSet":
        return cls(np.empty((0, input_dim)), np.empty((0, output_dim)), noise_eta)

    @property
    def count(self) -> int:
        return self.inputs.shape[0]

    @property
    def output_dim(self) -> int:
        return self.outputs.shape[1]

    def appended(self, x: np.ndarray, f: np.ndarray) -> "ObservationSet":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = np.atleast_1d(np.asarray(f, dtype=float))
        return ObservationSet(
            np.vstack([self.inputs, x[None, :]]) if self.count else x[None, :].copy(),
            np.vstack([self.outputs, f[None, :]]) if self.count else f[None, :].copy(),
            self.noise_eta,
        )


@dataclass(frozen=True)
class PosteriorEstimate:
    """Per-output-dimension posterior mean and (clamped, >= 0) variance."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "variance", np.atleast_1d(np.asarray(self.variance, dtype=float)))

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def matern52(x: np.ndarray, x2: np.ndarray, params: KernelParams) -> float:
    """Matern-5/2 kernel value ``theta (1 + sqrt5 d + 5/3 d^2) exp(-sqrt5 d)``.

    ``d`` is the Mahalanobis distance between the points under
    ``diag(params.lam)``. Symmetric in its arguments; equals ``theta`` at
    zero distance.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.size != params.input_dim:
        raise ValueError(
            f"point dims {x.shape}/{x2.shape} do not match lambda dim {params.input_dim}"
        )
    diff = x - x2
    d = np.sqrt(max(float(np.dot(params.lam * diff, diff)), 0.0))
    return float(params.theta * (1.0 + np.sqrt(5.0) * d + (5.0 / 3.0) * d * d) * np.exp(-np.sqrt(5.0) * d))


def _chol_with_jitter(gram: np.ndarray, eta: float, theta: float):
    """Cholesky of (gram + eta^2 I), escalating jitter up to 1e-8 * theta."""
    t = gram.shape[0]
    a = gram + (eta * eta) * np.eye(t)
    for jitter in (0.0,) + tuple(j * theta for j in _JITTERS):
        try:
            return cho_factor(a + jitter * np.eye(t), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise SurrogateFailure(
        f"Gram matrix indefinite after max jitter {_JITTERS[-1]:g} * theta"
    )


class GpModel:
    """GP surrogate with a cached factorization of (K + eta^2 I).

    ``posterior`` is a pure read and safe to call concurrently;
    ``updated``/refitting produce new state. Hyperparameters are refit on
    update per ``refit_until``/``refit_every`` when ``hyper_bounds`` is set.
    """

    def __init__(
        self,
        params: KernelParams,
        prior_mean: np.ndarray,
        bounds: BoxBounds,
        observations: ObservationSet | None = None,
        hyper_bounds: HyperBounds | None = None,
        fit_seed: int = 0,
        fit_restarts: int = 8,
        refit_until: int = 20,
        refit_every: int = 5,
    ):
        self.params = params
        self.prior_mean = np.atleast_1d(np.asarray(prior_mean, dtype=float))
        self.bounds = bounds
        self.observations = observations if observations is not None else ObservationSet.empty(
            bounds.dim, self.prior_mean.size
        )
        if params.input_dim != bounds.dim:
            raise ValueError("kernel lambda dimension must match the input bounds")
        if self.observations.count and self.observations.output_dim != self.prior_mean.size:
            raise ValueError("prior_mean dimension must match the outputs")
        self.hyper_bounds = hyper_bounds
        self.fit_seed = int(fit_seed)
        self.fit_restarts = int(fit_restarts)
        self.refit_until = int(refit_until)
        self.refit_every = int(refit_every)
        self.fit_warned = False
        self._refresh()

    @classmethod
    def create(
        cls,
        bounds: BoxBounds,
        feature_range: np.ndarray,
        hyper_bounds: HyperBounds | None = None,
        noise_eta: float | None = None,
        **kwargs,
    ) -> "GpModel":
        """Fresh model with the prior mean at the center of the feature range.

        ``feature_range`` is (df, 2) rows of [lo, hi]; the prior mean is
        exactly ``(lo + hi) / 2`` per output dimension.
        """
        feature_range = np.atleast_2d(np.asarray(feature_range, dtype=float))
        prior_mean = 0.5 * (feature_range[:, 0] + feature_range[:, 1])
        span = float(np.max(feature_range[:, 1] - feature_range[:, 0]))
        if hyper_bounds is None:
            hyper_bounds = HyperBounds.default_for_range(span)
        params = KernelParams(theta=max(span * span / 4.0, 1e-8), lam=np.full(bounds.dim, 25.0))
        eta = 0.05 * span if noise_eta is None else noise_eta
        obs = ObservationSet.empty(bounds.dim, prior_mean.size, noise_eta=eta)
        return cls(params, prior_mean, bounds, obs, hyper_bounds=hyper_bounds, **kwargs)

    # -- internal state ----------------------------------------------------

    def _refresh(self):
        obs = self.observations
        self._xn = self.bounds.normalize(obs.inputs) if obs.count else np.empty((0, self.bounds.dim))
        if obs.count == 0:
            self._ainv = None
            self._alpha = None
            return
        gram = backend.matern52_gram(self._xn, self.params.lam, self.params.theta)
        cf = _chol_with_jitter(gram, obs.noise_eta, self.params.theta)
        eye = np.eye(obs.count)
        self._ainv = cho_solve(cf, eye)
        self._alpha = cho_solve(cf, obs.outputs - self.prior_mean[None, :])

    def _should_refit(self, count: int) -> bool:
        if self.hyper_bounds is None or count < 2:
            return False
        return count <= self.refit_until or count % self.refit_every == 0

    def _fit_rng(self, count: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.fit_seed, spawn_key=(count,)))

    # -- public operations ---------------------------------------------------

    def posterior(self, x: np.ndarray) -> PosteriorEstimate:
        """Closed-form posterior mean and variance at a query point.

        mean = k(X,x)^T (K + eta^2 I)^-1 (F - m) + m
        var  = k(x,x) + eta^2 - k(X,x)^T (K + eta^2 I)^-1 k(X,x)
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.bounds.dim:
            raise ValueError(f"query dim {x.size} does not match input dim {self.bounds.dim}")
        obs = self.observations
        df = self.prior_mean.size
        eta2 = obs.noise_eta * obs.noise_eta
        if obs.count == 0:
            var = self.params.theta + eta2
            return PosteriorEstimate(self.prior_mean.copy(), np.full(df, var))
        xn = self.bounds.normalize(x)
        v = backend.matern52_cross(xn[None, :], self._xn, self.params.lam, self.params.theta)[0]
        mean = self.prior_mean + v @ self._alpha
        var = self.params.theta + eta2 - float(v @ (self._ainv @ v))
        return PosteriorEstimate(mean, np.full(df, max(var, 0.0)))

    def updated(self, x: np.ndarray, f: np.ndarray) -> "GpModel":
        """New model with (x, f) appended; refits on schedule, then refactors."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.bounds.contains(x):
            raise ValueError(f"update point {x} lies outside the model bounds")
        obs = self.observations.appended(x, f)
        params, warned = self.params, self.fit_warned
        if self._should_refit(obs.count):
            result = fit_hyperparameters(
                ObservationSet(self.bounds.normalize(obs.inputs), obs.outputs, obs.noise_eta),
                self.hyper_bounds,
                prior_mean=self.prior_mean,
                restarts=self.fit_restarts,
                rng=self._fit_rng(obs.count),
            )
            params = result.params
            obs = replace(obs, noise_eta=result.eta)
            warned = warned or not result.improved
        model = GpModel(
            params,
            self.prior_mean,
            self.bounds,
            obs,
            hyper_bounds=self.hyper_bounds,
            fit_seed=self.fit_seed,
            fit_restarts=self.fit_restarts,
            refit_until=self.refit_until,
            refit_every=self.refit_every,
        )
        model.fit_warned = warned
        return model

    # -- persistence --------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "schema_version": SNAPSHOT_SCHEMA_VERSION,
            "kernel": {
                "theta": float(self.params.theta),
                "lambda": [float(v) for v in self.params.lam],
            },
            "noise_eta": float(self.observations.noise_eta),
            "prior_mean": [float(v) for v in self.prior_mean],
            "bounds": self.bounds.to_dict(),
            "observations": {
                "inputs": [[float(v) for v in row] for row in self.observations.inputs],
                "outputs": [[float(v) for v in row] for row in self.observations.outputs],
            },
        }

    @classmethod
    def from_snapshot(cls, snap: dict, **kwargs) -> "GpModel":
        if snap.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
            raise ValueError(f"unsupported snapshot schema_version {snap.get('schema_version')!r}")
        bounds = BoxBounds.from_dict(snap["bounds"])
        prior_mean = np.asarray(snap["prior_mean"], dtype=float)
        obs_d = snap["observations"]
        inputs = np.asarray(obs_d["inputs"], dtype=float).reshape(-1, bounds.dim)
        outputs = np.asarray(obs_d["outputs"], dtype=float).reshape(-1, prior_mean.size)
        obs = ObservationSet(inputs, outputs, float(snap["noise_eta"]))
        params = KernelParams(snap["kernel"]["theta"], np.asarray(snap["kernel"]["lambda"], dtype=float))
        return cls(params, prior_mean, bounds, obs, **kwargs)

    def snapshot_json(self) -> str:
        return json.dumps(self.to_snapshot(), sort_keys=True, separators=(",", ":"))


def posterior(model: GpModel, x: np.ndarray) -> PosteriorEstimate:
    return model.posterior(x)


def update(model: GpModel, x: np.ndarray, f: np.ndarray) -> GpModel:
    return model.updated(x, f)


@dataclass(frozen=True)
class FitResult:
    params: KernelParams
    eta: float
    improved: bool
    nll: float


def _nll(log_p: np.ndarray, xn: np.ndarray, outputs: np.ndarray, prior_mean: np.ndarray) -> float:
    """Negative log marginal likelihood, summed over output dimensions."""
    t, df = outputs.shape
    theta = np.exp(log_p[0])
    lam = np.exp(log_p[1:-1])
    eta = np.exp(log_p[-1])
    gram = backend.matern52_gram(xn, lam, theta) + (eta * eta) * np.eye(t)
    try:
        cf = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError:
        return 1e300
    resid = outputs - prior_mean[None, :]
    alpha = cho_solve(cf, resid)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    quad = float(np.sum(resid * alpha))
    return 0.5 * quad + 0.5 * df * logdet + 0.5 * df * t * np.log(2.0 * np.pi)


def fit_hyperparameters(
    observations: ObservationSet,
    bounds: HyperBounds,
    prior_mean: np.ndarray | None = None,
    restarts: int = 8,
    rng: int | np.random.Generator | None = None,
    maxiter: int = 60,
) -> FitResult:
    """Maximize the log marginal likelihood over (theta, lambda, eta).

    Multi-restart bounded L-BFGS in log-parameter space; deterministic for
    a fixed ``rng`` seed. The eta search floor is raised to 1e-4 of the
    observed output range. If no restart improves on the initial guess the
    guess is returned with ``improved=False`` and a ``RuntimeWarning``.
    """
    if observations.count < 2:
        raise ValueError("hyperparameter fitting requires at least 2 observations")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    xn = observations.inputs
    outputs = observations.outputs
    dx = xn.shape[1]
    if prior_mean is None:
        prior_mean = outputs.mean(axis=0)
    prior_mean = np.asarray(prior_mean, dtype=float)

    out_range = float(outputs.max() - outputs.min())
    eta_lo = max(bounds.eta[0], 1e-4 * out_range)
    eta_hi = max(bounds.eta[1], eta_lo * (1.0 + 1e-12))
    lo = np.log(np.array([bounds.theta[0]] + [bounds.lam[0]] * dx + [max(eta_lo, 1e-300)]))
    hi = np.log(np.array([bounds.theta[1]] + [bounds.lam[1]] * dx + [eta_hi]))

    var0 = float(outputs.var()) if out_range > 0 else bounds.theta[0]
    guess = np.clip(
        np.log(np.array([max(var0, 1e-300)] + [1.0] * dx + [max(0.05 * max(out_range, 1e-8), 1e-300)])),
        lo,
        hi,
    )
    obj = lambda p: _nll(p, xn, outputs, prior_mean)
    best_p = guess
    best_val = obj(guess)
    improved = False
    starts = [guess] + [rng.uniform(lo, hi) for _ in range(max(0, restarts))]
    for x0 in starts:
        res = minimize(
            obj,
            x0,
            method="L-BFGS-B",
            bounds=list(zip(lo, hi)),
            options={"maxiter": maxiter, "maxcor": 10},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val = float(res.fun)
            best_p = np.clip(res.x, lo, hi)
            improved = True
    if not improved:
        warnings.warn("hyperparameter fit did not improve on the initial guess", RuntimeWarning)
    params = KernelParams(theta=float(np.exp(best_p[0])), lam=np.exp(best_p[1:-1]))
    return FitResult(params=params, eta=float(np.exp(best_p[-1])), improved=improved, nll=best_val)
