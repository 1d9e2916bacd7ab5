"""Pure-NumPy reference implementations of the hot kernels.

These mirror the compiled extension in ``_fastcore.pyx`` exactly; the
package falls back to this module when the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

SQRT5 = np.sqrt(5.0)


def _matern52_of_dist(d: np.ndarray, theta: float) -> np.ndarray:
    return theta * (1.0 + SQRT5 * d + (5.0 / 3.0) * d * d) * np.exp(-SQRT5 * d)


def matern52_cross(xa: np.ndarray, xb: np.ndarray, lam: np.ndarray, theta: float) -> np.ndarray:
    """Cross-covariance matrix k(xa_i, xb_j), shape (n, m)."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    lam = np.asarray(lam, dtype=float)
    diff = xa[:, None, :] - xb[None, :, :]
    q = np.einsum("ijk,k,ijk->ij", diff, lam, diff)
    d = np.sqrt(np.clip(q, 0.0, None))
    return _matern52_of_dist(d, theta)


def matern52_gram(x: np.ndarray, lam: np.ndarray, theta: float) -> np.ndarray:
    """Symmetric Gram matrix with diagonal exactly ``theta``."""
    k = matern52_cross(x, x, lam, theta)
    k = 0.5 * (k + k.T)
    np.fill_diagonal(k, theta)
    return k


def _wrapped_sq_dists(pts: np.ndarray, refs: np.ndarray, period: float) -> np.ndarray:
    diff = np.abs(pts[:, None, :] - refs[None, :, :])
    if period > 0.0:
        diff = np.mod(diff, period)
        diff = np.minimum(diff, period - diff)
    return np.sum(diff * diff, axis=2)


def min_dist(pts: np.ndarray, refs: np.ndarray, period: float = 0.0) -> np.ndarray:
    """Per-point minimum distance to the reference set.

    ``period > 0`` selects the per-component circular distance.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    refs = np.atleast_2d(np.asarray(refs, dtype=float))
    return np.sqrt(_wrapped_sq_dists(pts, refs, period).min(axis=1))


def mc_min_dist_mean(
    mu: np.ndarray,
    sigma: np.ndarray,
    z: np.ndarray,
    refs: np.ndarray,
    period: float = 0.0,
) -> float:
    """Mean over draws of the min distance from ``mu + sigma * z`` to ``refs``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    samples = mu[None, :] + sigma[None, :] * z
    if period > 0.0:
        half = 0.5 * period
        samples = np.mod(samples + half, period) - half
    return float(min_dist(samples, refs, period).mean())
