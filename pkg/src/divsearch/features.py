"""Distances on the outcome-feature space.

Two metrics are supported: plain Euclidean, and an angular (geodesic)
metric for periodic features such as orientations, where each component
is compared on a circle of a given period.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import tau

import numpy as np


@dataclass(frozen=True)
class FeatureMetric:
    """Distance on feature vectors.

    kind
        ``"euclidean"`` or ``"angular"``.
    period
        Circle period in radians; used only by the angular metric, where
        per-component distances never exceed ``period / 2``.
    """

    kind: str
    period: float = 0.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "angular"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "angular" and not self.period > 0.0:
            raise ValueError("angular metric requires period > 0")

    @classmethod
    def euclidean(cls) -> "FeatureMetric":
        return cls("euclidean")

    @classmethod
    def angular(cls, period: float = tau) -> "FeatureMetric":
        return cls("angular", period)

    @property
    def is_angular(self) -> bool:
        return self.kind == "angular"

    def wrap(self, f: np.ndarray) -> np.ndarray:
        """Wrap feature values into the principal range [-period/2, period/2)."""
        if not self.is_angular:
            return np.asarray(f, dtype=float)
        half = 0.5 * self.period
        return np.mod(np.asarray(f, dtype=float) + half, self.period) - half

    def distance(self, f: np.ndarray, g: np.ndarray) -> float:
        """Distance between two feature vectors."""
        f = np.atleast_1d(np.asarray(f, dtype=float))
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if f.shape != g.shape:
            raise ValueError(f"feature shape mismatch: {f.shape} vs {g.shape}")
        diff = np.abs(f - g)
        if self.is_angular:
            diff = np.mod(diff, self.period)
            diff = np.minimum(diff, self.period - diff)
        return float(np.sqrt(np.sum(diff * diff)))

    def min_distance(self, f: np.ndarray, refs: np.ndarray) -> float:
        """Minimum distance from ``f`` to a non-empty set of reference vectors."""
        refs = np.atleast_2d(np.asarray(refs, dtype=float))
        if refs.shape[0] == 0:
            raise ValueError("reference feature set is empty")
        f = np.atleast_1d(np.asarray(f, dtype=float))
        diff = np.abs(refs - f[None, :])
        if self.is_angular:
            diff = np.mod(diff, self.period)
            diff = np.minimum(diff, self.period - diff)
        return float(np.sqrt(np.sum(diff * diff, axis=1)).min())

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.is_angular:
            d["period"] = self.period
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMetric":
        return cls(d["kind"], float(d.get("period", 0.0)))
