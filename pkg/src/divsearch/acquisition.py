"""Acquisition functions over the GP surrogate.

The diversity value of a candidate is the expected minimum feature distance
of its predicted outcome to everything already observed; exploration value
is the posterior standard deviation. The driver alternates between the two
on a fixed schedule instead of blending them with a trade-off coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr

from . import backend
from .features import FeatureMetric
from .gp import PosteriorEstimate

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Phase(Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


@dataclass(frozen=True)
class AcquisitionConfig:
    """Monte-Carlo sample counts, the optional UCB coefficient, and the seed.

    ``n_mc`` is used inside the inner optimizer (where a fixed draw set
    makes the objective deterministic); ``n_mc_final`` re-ranks the top
    candidates once per step. ``beta`` only affects ``ucb_value``.
    """

    n_mc: int = 256
    n_mc_final: int = 4096
    beta: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_mc < 1 or self.n_mc_final < 1:
            raise ValueError("Monte-Carlo sample counts must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_mc": self.n_mc,
            "n_mc_final": self.n_mc_final,
            "beta": self.beta,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionConfig":
        return cls(int(d["n_mc"]), int(d["n_mc_final"]), float(d["beta"]), int(d["rng_seed"]))


def phase_for_step(t: int, n_exp: int, n_opt: int) -> Phase:
    """Explore iff ``t mod (n_exp + n_opt) < n_exp``."""
    if n_exp < 0 or n_opt < 0 or n_exp + n_opt < 1:
        raise ValueError("need n_exp >= 0, n_opt >= 0, n_exp + n_opt >= 1")
    return Phase.EXPLORE if t % (n_exp + n_opt) < n_exp else Phase.EXPLOIT


def _as_ref_matrix(observed_features, metric: FeatureMetric) -> np.ndarray:
    refs = np.atleast_2d(np.asarray(observed_features, dtype=float))
    if refs.size == 0 or refs.shape[0] == 0:
        raise ValueError("diversity is undefined for an empty observed-feature set")
    if metric.is_angular:
        refs = metric.wrap(refs)
    return refs


def diversity_value_mc(
    post: PosteriorEstimate,
    observed_features,
    metric: FeatureMetric,
    cfg: AcquisitionConfig,
    draws: np.ndarray | None = None,
) -> float:
    """Monte-Carlo estimate of E[min_i dist(f_hat, f_i)], f_hat ~ N(mu, sigma^2).

    ``draws`` are standard-normal samples of shape (n, df); passing the same
    draw set across calls gives common random numbers, which keeps the
    objective seen by the inner optimizer deterministic. Angular features
    are sampled in the ambient coordinate and wrapped before distancing.
    """
    refs = _as_ref_matrix(observed_features, metric)
    mu = post.mean
    if mu.size != refs.shape[1]:
        raise ValueError(f"posterior dim {mu.size} does not match features dim {refs.shape[1]}")
    if draws is None:
        rng = np.random.default_rng(cfg.rng_seed)
        draws = rng.standard_normal((cfg.n_mc, mu.size))
    period = metric.period if metric.is_angular else 0.0
    return backend.mc_min_dist_mean(mu, post.std, draws, refs, period)


def diversity_value_exact_1d(post: PosteriorEstimate, observed_features) -> float:
    """Exact E[min_i |f_hat - f_i|] for a scalar Gaussian f_hat.

    Piecewise integration over the Voronoi cells of the observed values:
    within the cell of f_j the min distance is |f_hat - f_j|, and each
    partial expectation has a Gaussian CDF/PDF closed form.
    """
    if post.mean.size != 1:
        raise ValueError("exact diversity value requires 1-D features")
    refs = np.unique(np.asarray(observed_features, dtype=float).ravel())
    if refs.size == 0:
        raise ValueError("diversity is undefined for an empty observed-feature set")
    mu = float(post.mean[0])
    sigma = float(post.std[0])
    if sigma <= 1e-12 * max(1.0, np.abs(refs - mu).max()):
        return float(np.abs(refs - mu).min())

    # Voronoi cell of refs[j] is [edges[j], edges[j+1]].
    edges = np.concatenate([[-np.inf], 0.5 * (refs[:-1] + refs[1:]), [np.inf]])
    a = (edges[:-1] - mu) / sigma
    b = (edges[1:] - mu) / sigma
    c = (refs - mu) / sigma

    def pdf(z):
        return np.where(np.isfinite(z), _INV_SQRT_2PI * np.exp(-0.5 * np.square(np.where(np.isfinite(z), z, 0.0))), 0.0)

    def partial(zlo, zhi, cz):
        # E[(X - ref) 1{zlo <= Z <= zhi}] / sigma = -cz (Phi(zhi) - Phi(zlo)) + ... , in z units
        return (ndtr(zhi) - ndtr(zlo)) * (-cz) + (pdf(zlo) - pdf(zhi))

    total = np.sum(partial(c, b, c) - partial(a, c, c))
    return float(sigma * total)


def exploration_value(post: PosteriorEstimate) -> float:
    """Posterior standard deviation; multi-output posteriors aggregate as
    the root of the summed per-dimension variances."""
    return float(np.sqrt(np.sum(post.variance)))


def ucb_value(
    post: PosteriorEstimate,
    observed_features,
    metric: FeatureMetric,
    cfg: AcquisitionConfig,
    draws: np.ndarray | None = None,
) -> float:
    """Composite diversity-plus-uncertainty score: a_hat + beta * sigma.

    Provided for completeness; the default search loop alternates phases
    instead of relying on a tuned beta.
    """
    return diversity_value_mc(post, observed_features, metric, cfg, draws=draws) + cfg.beta * exploration_value(post)
