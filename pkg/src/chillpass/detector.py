"""Baseline statistics and chill detection on heart-rate responses.

A chill is a run of at least ``min_chill_s`` seconds in which every sample
sits more than ``sigma_multiplier`` baseline standard deviations from the
baseline mean, all on the same side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .errors import EmptySeries, TooFewListens
from .trace import Channel, MonitoringCycle, SampleSeries

MIN_LISTENS = 2


class Direction(str, Enum):
    Above = "Above"
    Below = "Below"


@dataclass(frozen=True)
class DetectorConfig:
    min_chill_s: float = 5.0
    sigma_multiplier: float = 1.0
    require_direction_match: bool = False

    def __post_init__(self):
        if self.min_chill_s < 0 or self.sigma_multiplier < 0:
            raise ValueError("min_chill_s and sigma_multiplier must be non-negative")


@dataclass(frozen=True)
class BaselineStats:
    channel: Channel
    mean: float
    stdev: float
    sample_count: int


@dataclass(frozen=True)
class ChillInterval:
    """Seconds relative to the first sample of the scanned series."""

    start_s: float
    end_s: float
    direction: Direction

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class ChillMusicVerdict:
    verdict: bool
    per_cycle_intervals: tuple


def baseline_stats(series: SampleSeries) -> BaselineStats:
    """Mean and population standard deviation of the present samples."""
    values = series.values[~np.isnan(series.values)]
    if values.size == 0:
        raise EmptySeries(f"{series.channel}: no baseline samples")
    return BaselineStats(series.channel, float(np.mean(values)), float(np.std(values)),
                         int(values.size))


def min_steps(min_len_s: float, rate: float) -> int:
    """Index steps a run must span to last ``min_len_s`` seconds."""
    return max(0, math.ceil(min_len_s * rate - 1e-9))


def detect_chills(series: SampleSeries, stats: BaselineStats, min_len_s: float = 5.0,
                  sigma_multiplier: float = 1.0) -> list:
    """Maximal same-direction excursions lasting at least ``min_len_s``.

    Endpoints are the times of the first and last qualifying sample.
    """
    starts, ends, sides = kernels.chill_runs(series.values, stats.mean,
                                             sigma_multiplier * stats.stdev,
                                             min_steps(min_len_s, series.rate))
    return [ChillInterval(s / series.rate, e / series.rate,
                          Direction.Above if d > 0 else Direction.Below)
            for s, e, d in zip(starts.tolist(), ends.tolist(), sides.tolist())]


def cycle_chills(cycle: MonitoringCycle, cfg: DetectorConfig | None = None) -> list:
    """Chills in the stimulus heart rate against the cycle's own baseline."""
    cfg = cfg or DetectorConfig()
    stats = baseline_stats(cycle.baseline[Channel.HeartRate])
    return detect_chills(cycle.stimulus[Channel.HeartRate], stats,
                         cfg.min_chill_s, cfg.sigma_multiplier)


def is_chill_music(cycles: Sequence[MonitoringCycle], cfg: DetectorConfig | None = None) -> ChillMusicVerdict:
    """Music qualifies when every full listen contains at least one chill."""
    if len(cycles) < MIN_LISTENS:
        raise TooFewListens(f"need {MIN_LISTENS} full listens, got {len(cycles)}")
    ids = {(c.subject_id, c.music_id) for c in cycles}
    if len(ids) != 1:
        raise ValueError(f"listens mix subjects/music: {sorted(ids)}")
    per_cycle = tuple(tuple(cycle_chills(c, cfg)) for c in cycles)
    return ChillMusicVerdict(all(per_cycle), per_cycle)
