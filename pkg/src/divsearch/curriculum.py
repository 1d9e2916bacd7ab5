"""Adaptive task-difficulty scheduling.

Difficulty ``z`` (bar height or obstacle width, in meters) advances by a
fixed increment whenever the reward accumulated since the last advance
crosses a threshold. The control frequency and the offset-penalty
coefficient are scheduled from ``z`` through the normalized difficulty
``rho`` (``2z - 1`` for high jumps, ``z`` for obstacle jumps).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class TaskKind(Enum):
    HIGH_JUMP = "high_jump"
    OBSTACLE_JUMP = "obstacle_jump"


@dataclass(frozen=True)
class CurriculumConfig:
    z_min: float
    z_max: float
    delta_z: float
    r_threshold: float
    task_kind: TaskKind

    def __post_init__(self):
        if self.z_min > self.z_max:
            raise ValueError("z_min must be <= z_max")
        if not self.delta_z > 0.0:
            raise ValueError("delta_z must be > 0")
        if not self.r_threshold > 0.0:
            raise ValueError("r_threshold must be > 0")

    @classmethod
    def high_jump(cls) -> "CurriculumConfig":
        # 50 cm .. 200 cm in 1 cm steps, threshold 30
        return cls(0.50, 2.00, 0.01, 30.0, TaskKind.HIGH_JUMP)

    @classmethod
    def obstacle_jump(cls) -> "CurriculumConfig":
        # 5 cm .. 250 cm in 5 cm steps, threshold 50
        return cls(0.05, 2.50, 0.05, 50.0, TaskKind.OBSTACLE_JUMP)


@dataclass(frozen=True)
class CurriculumState:
    z: float
    accumulator: float = 0.0


def advance(state: CurriculumState, avg_iter_reward: float, cfg: CurriculumConfig) -> CurriculumState:
    """Accumulate reward; past the threshold, step z up (capped) and reset."""
    if avg_iter_reward < 0.0:
        raise ValueError("avg_iter_reward must be >= 0")
    acc = state.accumulator + avg_iter_reward
    if acc > cfg.r_threshold:
        return CurriculumState(z=min(state.z + cfg.delta_z, cfg.z_max), accumulator=0.0)
    return CurriculumState(z=state.z, accumulator=acc)


def _rho(z: float, task_kind: TaskKind) -> float:
    rho = 2.0 * z - 1.0 if task_kind is TaskKind.HIGH_JUMP else z
    return min(max(rho, 0.0), 1.0)


def control_frequency(z: float, task_kind: TaskKind) -> float:
    """10 + 20 * Clip(rho, 0, 1), in Hz."""
    return 10.0 + 20.0 * _rho(z, task_kind)


def offset_penalty_coefficient(z: float, task_kind: TaskKind) -> float:
    """48 - 33 * Clip(rho, 0, 1)."""
    return 48.0 - 33.0 * _rho(z, task_kind)
