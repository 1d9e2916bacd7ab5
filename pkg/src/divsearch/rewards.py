"""Scalar reward utilities for two-stage strategy training loops.

All functions are pure and deterministic. Callers own feature extraction
and any per-episode aggregation (e.g. averaging offset norms or angular
velocities); these functions only evaluate the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMetric


@dataclass(frozen=True)
class NoveltyConfig:
    """Desired novelty distance, the feature metric, and the discovered set."""

    d_threshold: float
    metric: FeatureMetric
    existing_features: np.ndarray

    def __post_init__(self):
        if not self.d_threshold > 0.0:
            raise ValueError("d_threshold must be > 0")
        object.__setattr__(
            self, "existing_features", np.atleast_2d(np.asarray(self.existing_features, dtype=float))
        )


@dataclass(frozen=True)
class NaturalnessConfig:
    """Maximum allowed action-offset magnitude."""

    c_offset: float

    def __post_init__(self):
        if not self.c_offset > 0.0:
            raise ValueError("c_offset must be > 0")


def novelty_reward(f: np.ndarray, cfg: NoveltyConfig) -> float:
    """Clip(min_i dist(f_i, f) / d_threshold, 0.01, 1)."""
    if cfg.existing_features.shape[0] == 0:
        raise ValueError("novelty is undefined without existing features")
    d_min = cfg.metric.min_distance(np.asarray(f, dtype=float), cfg.existing_features)
    return float(min(max(d_min / cfg.d_threshold, 0.01), 1.0))


def naturalness_reward(offset_l1: float, cfg: NaturalnessConfig) -> float:
    """1 - Clip((offset_l1 / c_offset)^2, 0, 1)."""
    if offset_l1 < 0.0:
        raise ValueError("offset_l1 must be >= 0")
    ratio = offset_l1 / cfg.c_offset
    return 1.0 - min(ratio * ratio, 1.0)


def task_reward(complete: bool, mean_root_angvel: float, safe_landing: bool) -> float:
    """r_complete * exp(-0.02 * |omega|) * (1.0 if safe else 0.7)."""
    if not complete:
        return 0.0
    r_omega = float(np.exp(-0.02 * mean_root_angvel))
    return r_omega * (1.0 if safe_landing else 0.7)


def stage_reward(task: float, naturalness: float, novelty: float | None = None) -> float:
    """Product of the factors; the novelty factor only applies in stage two."""
    r = task * naturalness
    return r if novelty is None else r * novelty


def runup_reward_highjump(omega, omega_bar, v_z: float, v_z_bar: float) -> float:
    """exp(-1/3 ||omega - omega_bar||_1 - 0.7 (v_z - v_z_bar)^2)."""
    l1 = float(np.sum(np.abs(np.asarray(omega, dtype=float) - np.asarray(omega_bar, dtype=float))))
    dv = v_z - v_z_bar
    return float(np.exp(-l1 / 3.0 - 0.7 * dv * dv))


def runup_reward_obstacle(omega, omega_bar) -> float:
    """exp(-1/3 ||omega - omega_bar||_1)."""
    l1 = float(np.sum(np.abs(np.asarray(omega, dtype=float) - np.asarray(omega_bar, dtype=float))))
    return float(np.exp(-l1 / 3.0))
