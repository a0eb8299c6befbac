"""Key-frame sampling strategies: head-continue, uniform, and hybrid.

All samplers are pure: given (T, N) they return the same sorted, unique,
in-bounds index set every time, never empty, never larger than min(N, T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, InvalidInputError

DEFAULT_BUDGET = 40
DEFAULT_HEAD_FRACTION = 0.5


class Strategy(Enum):
    HEAD_CONTINUE = "head-continue"
    UNIFORM = "uniform"
    HYBRID = "hybrid"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        name = str(value).strip().lower().replace("_", "-")
        for strategy in cls:
            if strategy.value == name:
                return strategy
        raise ConfigError(f"unknown sampling strategy {value!r}; expected one of "
                          f"{[s.value for s in cls]}")


@dataclass(frozen=True)
class SamplerConfig:
    strategy: Strategy = Strategy.HYBRID
    budget: int = DEFAULT_BUDGET
    head_fraction: float = DEFAULT_HEAD_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if not 0.0 < self.head_fraction < 1.0:
            raise ConfigError(f"head fraction must be in (0, 1), got {self.head_fraction}")


@dataclass(frozen=True)
class KeyFrameSet:
    """Strictly increasing frame indices in [0, T)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", indices)
        if not indices:
            raise InvalidInputError("key frame set is empty")
        if any(i < 0 for i in indices):
            raise InvalidInputError("negative frame index")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InvalidInputError("frame indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices


def _check_args(frame_count: int, budget: int) -> None:
    if frame_count < 1:
        raise InvalidInputError(f"frame count must be >= 1, got {frame_count}")
    if budget < 1:
        raise InvalidInputError(f"budget must be >= 1, got {budget}")


def sample_head_continue(frame_count: int, budget: int) -> KeyFrameSet:
    """First min(N, T) frames."""
    _check_args(frame_count, budget)
    return KeyFrameSet(tuple(range(min(budget, frame_count))))


def sample_uniform(frame_count: int, budget: int) -> KeyFrameSet:
    """Evenly spaced frames over [0, T-1], endpoints included when N >= 2.

    Index i maps to round-half-up(i * (T-1) / (N-1)); integer arithmetic keeps
    the rounding exact.
    """
    _check_args(frame_count, budget)
    if budget >= frame_count:
        return KeyFrameSet(tuple(range(frame_count)))
    if budget == 1:
        return KeyFrameSet((0,))
    span = frame_count - 1
    steps = budget - 1
    indices = [(2 * i * span + steps) // (2 * steps) for i in range(budget)]
    return KeyFrameSet(tuple(sorted(set(indices))))


def sample_hybrid(frame_count: int, budget: int,
                  head_fraction: float = DEFAULT_HEAD_FRACTION) -> KeyFrameSet:
    """Head prefix of ceil(head_fraction * N) frames plus a uniform pass over
    the remaining budget, deduplicated without topping back up to N. A budget
    covering the whole video returns every frame."""
    _check_args(frame_count, budget)
    if not 0.0 < head_fraction < 1.0:
        raise InvalidInputError(f"head fraction must be in (0, 1), got {head_fraction}")
    if budget >= frame_count:
        return KeyFrameSet(tuple(range(frame_count)))
    head_budget = min(math.ceil(head_fraction * budget), budget)
    merged = set(sample_head_continue(frame_count, head_budget))
    uniform_budget = budget - head_budget
    if uniform_budget >= 1:
        merged.update(sample_uniform(frame_count, uniform_budget))
    return KeyFrameSet(tuple(sorted(merged)))


def sample(config: SamplerConfig, frame_count: int) -> KeyFrameSet:
    """Dispatch to the configured strategy."""
    if config.strategy is Strategy.HEAD_CONTINUE:
        return sample_head_continue(frame_count, config.budget)
    if config.strategy is Strategy.UNIFORM:
        return sample_uniform(frame_count, config.budget)
    if config.strategy is Strategy.HYBRID:
        return sample_hybrid(frame_count, config.budget, config.head_fraction)
    raise ConfigError(f"unknown sampling strategy {config.strategy!r}")
