"""One-minute chill segment selection and verification."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .detector import DetectorConfig, Direction, cycle_chills
from .errors import (
    NoQualifyingOverlap,
    SegmentOutsideTrack,
    TrackTooShort,
    ValidationFailed,
)
from .trace import MonitoringCycle, ValidationConfig, validate_cycle

SEGMENT_S = 60.0
_HALF = SEGMENT_S / 2
_TOL = 1e-9


class SegmentSource(str, Enum):
    Auto = "Auto"
    Manual = "Manual"


@dataclass(frozen=True)
class ChillSegment:
    music_id: str
    start_s: float
    end_s: float
    source: SegmentSource

    def __post_init__(self):
        object.__setattr__(self, "source", SegmentSource(self.source))
        if self.start_s < -_TOL:
            raise SegmentOutsideTrack(f"segment starts before the track ({self.start_s})")
        if abs((self.end_s - self.start_s) - SEGMENT_S) > _TOL:
            raise ValueError(f"segment must last {SEGMENT_S:g} s, got {self.end_s - self.start_s:g}")

    @property
    def midpoint(self) -> float:
        return (self.start_s + self.end_s) / 2


def _as_pairs(intervals):
    out = []
    for iv in intervals:
        if hasattr(iv, "start_s"):
            out.append((float(iv.start_s), float(iv.end_s)))
        else:
            s, e = iv
            out.append((float(s), float(e)))
    return out


def _union(pairs):
    """Sort and merge overlapping or touching intervals."""
    merged = []
    for s, e in sorted(pairs):
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def _intersect_all(lists):
    current = _union(lists[0])
    for other in lists[1:]:
        other = _union(other)
        a = np.array(current, dtype=np.float64).reshape(-1, 2)
        b = np.array(other, dtype=np.float64).reshape(-1, 2)
        lo, hi = kernels.intersect_intervals(a[:, 0], a[:, 1], b[:, 0], b[:, 1])
        current = list(zip(lo.tolist(), hi.tolist()))
        if not current:
            break
    return _union(current)


def overlap_intervals(interval_lists: Sequence, require_direction_match: bool = False) -> list:
    """Maximal spans covered by some interval of every list, sorted by start.

    With ``require_direction_match`` only intervals of equal direction are
    intersected (inputs must then be :class:`ChillInterval`).
    """
    if len(interval_lists) < 2:
        raise ValueError("overlap needs at least two interval lists")
    if not require_direction_match:
        return _intersect_all([_as_pairs(lst) for lst in interval_lists])
    pieces = []
    for direction in Direction:
        lists = [_as_pairs(iv for iv in lst if iv.direction is direction) for lst in interval_lists]
        pieces += _intersect_all(lists)
    return sorted(pieces)


def _window(center: float, track_duration_s: float) -> float:
    start = center - _HALF
    return min(max(start, 0.0), track_duration_s - SEGMENT_S)


def _check_track(track_duration_s: float):
    if track_duration_s < SEGMENT_S - _TOL:
        raise TrackTooShort(f"track is {track_duration_s:g} s, a segment needs {SEGMENT_S:g} s")


def auto_select_segment(interval_lists: Sequence, track_duration_s: float, *, music_id: str = "",
                        min_overlap_s: float = 5.0, require_direction_match: bool = False) -> ChillSegment:
    """Centre a one-minute window on the longest overlap across listens.

    Ties go to the earliest overlap; windows near the track edges are shifted
    inward.
    """
    _check_track(track_duration_s)
    overlaps = overlap_intervals(interval_lists, require_direction_match)
    best = None
    for s, e in overlaps:
        if best is None or (e - s) > (best[1] - best[0]):
            best = (s, e)
    if best is None or best[1] - best[0] < min_overlap_s - _TOL:
        raise NoQualifyingOverlap(
            f"no overlap of at least {min_overlap_s:g} s across {len(interval_lists)} listens")
    start = _window((best[0] + best[1]) / 2, track_duration_s)
    return ChillSegment(music_id, start, start + SEGMENT_S, SegmentSource.Auto)


def manual_select_segment(point_s: float, track_duration_s: float, *, music_id: str = "") -> ChillSegment:
    _check_track(track_duration_s)
    if not (0.0 <= point_s <= track_duration_s):
        raise SegmentOutsideTrack(f"point {point_s:g} s is outside the {track_duration_s:g} s track")
    start = _window(point_s, track_duration_s)
    return ChillSegment(music_id, start, start + SEGMENT_S, SegmentSource.Manual)


def verify_segment(cycle: MonitoringCycle, cfg: DetectorConfig | None = None,
                   validation: ValidationConfig | None = None) -> bool:
    """True when the segment playback produced at least one chill.

    Raises :class:`ValidationFailed` if the cycle fails its equipment checks.
    """
    report = validate_cycle(cycle, validation)
    if not report.passed:
        raise ValidationFailed(report)
    return bool(cycle_chills(cycle, cfg))
