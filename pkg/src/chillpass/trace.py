"""Signal data model, trace files, resampling, cycle validation and sanitation.

A trace file is UTF-8 JSON-lines: one header record followed by one record
per sample::

    {"type":"header","subject":"S1","music":"M1","phase_boundaries":{"baseline_s":60,"stimulus_s":60}}
    {"type":"sample","t":12.5,"channel":"HeartRate","value":74.0}

``t`` is seconds from cycle start; samples with ``t < baseline_s`` belong to
the baseline phase.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .errors import (
    EmptySeries,
    MalformedRecord,
    MissingChannel,
    NoCommonChannels,
    ShortBaseline,
    StimulusMismatch,
    StimulusTooShort,
)

MIN_BASELINE_S = 60.0
MIN_STIMULUS_S = 30.0
TRIM_S = 10.0
_TOL = 1e-9


class Channel(str, Enum):
    HeartRate = "HeartRate"
    Alpha1 = "Alpha1"
    Alpha2 = "Alpha2"
    Beta1 = "Beta1"
    Beta2 = "Beta2"
    Gamma1 = "Gamma1"
    Gamma2 = "Gamma2"
    Delta = "Delta"
    Theta = "Theta"

    @property
    def is_neurological(self) -> bool:
        return self is not Channel.HeartRate

    def __str__(self) -> str:
        return self.value


CHANNEL_ORDER = tuple(Channel)
NEURO_CHANNELS = tuple(c for c in Channel if c.is_neurological)

# comparison rates after sanitation: heart rate ~2 Hz, EEG ~1 Hz
COMMON_RATES = {Channel.HeartRate: 2.0, **{c: 1.0 for c in NEURO_CHANNELS}}


def channel_sort_key(ch: Channel) -> int:
    return CHANNEL_ORDER.index(Channel(ch))


@dataclass(frozen=True, eq=False)
class SampleSeries:
    """Uniformly sampled values of one channel.

    ``values`` may hold NaN for missing samples (gaps); present values are
    non-negative. ``start_offset`` is seconds from cycle start.
    """

    channel: Channel
    rate: float
    values: np.ndarray
    start_offset: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise EmptySeries(f"{self.channel}: series must be a non-empty 1-d sequence")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive, got {self.rate}")
        present = values[~np.isnan(values)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise ValueError(f"{self.channel}: values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel", Channel(self.channel))
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "start_offset", float(self.start_offset))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.rate

    @property
    def times(self) -> np.ndarray:
        return self.start_offset + np.arange(len(self)) / self.rate

    def __eq__(self, other):
        if not isinstance(other, SampleSeries):
            return NotImplemented
        return (self.channel is other.channel
                and self.rate == other.rate
                and self.start_offset == other.start_offset
                and np.array_equal(self.values, other.values, equal_nan=True))

    __hash__ = None

    def __repr__(self):
        return (f"SampleSeries({self.channel.value}, rate={self.rate:g}, "
                f"n={len(self)}, start={self.start_offset:g})")


def _freeze(series: Mapping[Channel, SampleSeries]) -> Mapping[Channel, SampleSeries]:
    ordered = sorted(((Channel(k), v) for k, v in series.items()),
                     key=lambda kv: channel_sort_key(kv[0]))
    return MappingProxyType(dict(ordered))


@dataclass(frozen=True)
class MonitoringCycle:
    """One baseline period followed by one stimulus period."""

    subject_id: str
    music_id: str
    baseline: Mapping[Channel, SampleSeries]
    stimulus: Mapping[Channel, SampleSeries]
    stimulus_duration: float
    baseline_duration: float = MIN_BASELINE_S

    def __post_init__(self):
        object.__setattr__(self, "baseline", _freeze(self.baseline))
        object.__setattr__(self, "stimulus", _freeze(self.stimulus))
        for phase in (self.baseline, self.stimulus):
            for ch, s in phase.items():
                if s.channel is not ch:
                    raise ValueError(f"series for {ch} carries channel {s.channel}")
        if set(self.baseline) != set(self.stimulus):
            odd = sorted(set(self.baseline) ^ set(self.stimulus), key=channel_sort_key)
            raise MissingChannel(f"channels present in only one phase: {[c.value for c in odd]}")
        if Channel.HeartRate not in self.baseline:
            raise MissingChannel("no HeartRate channel")
        if not any(c.is_neurological for c in self.baseline):
            raise MissingChannel("no neurological channel")
        if self.baseline_duration < MIN_BASELINE_S - _TOL:
            raise ShortBaseline(f"baseline is {self.baseline_duration:g} s, need {MIN_BASELINE_S:g} s")
        for ch, s in self.baseline.items():
            if s.duration < MIN_BASELINE_S - _TOL:
                raise ShortBaseline(f"{ch} baseline covers {s.duration:g} s, need {MIN_BASELINE_S:g} s")
        if not self.stimulus_duration > 0:
            raise ValueError("stimulus_duration must be positive")

    @property
    def channels(self) -> tuple:
        return tuple(self.baseline)


# -- trace files -------------------------------------------------------------

def _sample_key(ch):
    return channel_sort_key(ch)


def serialize_trace(cycle: MonitoringCycle) -> bytes:
    """Encode a cycle as JSON-lines; missing (NaN) samples are omitted."""
    header = {
        "type": "header",
        "subject": cycle.subject_id,
        "music": cycle.music_id,
        "phase_boundaries": {
            "baseline_s": cycle.baseline_duration,
            "stimulus_s": cycle.stimulus_duration,
        },
    }
    records = []
    for phase in (cycle.baseline, cycle.stimulus):
        for ch, s in phase.items():
            for t, v in zip(s.times, s.values):
                if not np.isnan(v):
                    records.append((float(t), _sample_key(ch), ch.value, float(v)))
    records.sort()
    lines = [json.dumps(header)]
    lines += [json.dumps({"type": "sample", "t": t, "channel": name, "value": v})
              for t, _, name, v in records]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _to_series(channel, samples, rate, lineno_of):
    t0 = samples[0][0]
    slots = {}
    for t, v in samples:
        pos = (t - t0) * rate
        k = int(round(pos))
        if abs(pos - k) > 0.25:
            raise MalformedRecord(
                f"line {lineno_of[(channel, t)]}: {channel} sample at t={t} is off the {rate:g} Hz grid")
        if k in slots:
            raise MalformedRecord(f"line {lineno_of[(channel, t)]}: duplicate {channel} sample slot")
        slots[k] = v
    values = np.full(max(slots) + 1, np.nan)
    for k, v in slots.items():
        values[k] = v
    return SampleSeries(channel, rate, values, start_offset=t0)


def parse_trace(data: bytes | str) -> MonitoringCycle:
    """Parse a JSON-lines trace into a validated :class:`MonitoringCycle`."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedRecord(f"trace is not UTF-8: {exc}") from None
    header = None
    per_channel: dict[Channel, list] = {}
    lineno_of = {}
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise MalformedRecord(f"line {lineno}: record must be an object")
        kind = rec.get("type")
        if kind == "header":
            if header is not None:
                raise MalformedRecord(f"line {lineno}: second header")
            try:
                bounds = rec["phase_boundaries"]
                header = (str(rec["subject"]), str(rec["music"]),
                          float(bounds["baseline_s"]), float(bounds["stimulus_s"]))
            except (KeyError, TypeError, ValueError):
                raise MalformedRecord(f"line {lineno}: incomplete header") from None
        elif kind == "sample":
            if header is None:
                raise MalformedRecord(f"line {lineno}: sample before header")
            try:
                t = float(rec["t"])
                value = float(rec["value"])
                channel = Channel(rec["channel"])
            except (KeyError, TypeError, ValueError):
                raise MalformedRecord(f"line {lineno}: bad sample record") from None
            if not (math.isfinite(t) and t >= 0):
                raise MalformedRecord(f"line {lineno}: bad timestamp {rec['t']!r}")
            if not (math.isfinite(value) and value >= 0):
                raise MalformedRecord(f"line {lineno}: bad value {rec['value']!r}")
            if t >= header[2] + header[3] + _TOL:
                raise MalformedRecord(f"line {lineno}: sample after end of stimulus")
            per_channel.setdefault(channel, []).append((t, value))
            lineno_of[(channel, t)] = lineno
        else:
            raise MalformedRecord(f"line {lineno}: unknown record type {kind!r}")
    if header is None:
        raise MalformedRecord("missing header record")
    subject, music, baseline_s, stimulus_s = header
    if Channel.HeartRate not in per_channel:
        raise MissingChannel("no HeartRate samples")
    if baseline_s < MIN_BASELINE_S - _TOL:
        raise ShortBaseline(f"baseline is {baseline_s:g} s, need {MIN_BASELINE_S:g} s")

    baseline, stimulus = {}, {}
    for ch, samples in per_channel.items():
        samples.sort()
        times = np.array([t for t, _ in samples])
        steps = np.diff(times)
        if steps.size == 0 or np.any(steps <= 0):
            raise MalformedRecord(f"{ch}: need at least two samples with distinct timestamps")
        rate = round(1.0 / float(np.median(steps)), 6)
        base = [s for s in samples if s[0] < baseline_s]
        stim = [s for s in samples if s[0] >= baseline_s]
        if not base or not stim:
            raise MissingChannel(f"{ch} has samples in only one phase")
        baseline[ch] = _to_series(ch, base, rate, lineno_of)
        stimulus[ch] = _to_series(ch, stim, rate, lineno_of)
    return MonitoringCycle(subject, music, baseline, stimulus,
                           stimulus_duration=stimulus_s, baseline_duration=baseline_s)


def read_trace(path) -> MonitoringCycle:
    with open(path, "rb") as fh:
        return parse_trace(fh.read())


def write_trace(path, cycle: MonitoringCycle) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_trace(cycle))


# -- resampling --------------------------------------------------------------

def interpolate_at(series: SampleSeries, times) -> np.ndarray:
    """Linear interpolation of the present samples at absolute ``times``."""
    ok = ~np.isnan(series.values)
    if not ok.any():
        raise EmptySeries(f"{series.channel}: no samples present")
    return np.interp(np.asarray(times, dtype=np.float64),
                     series.times[ok], series.values[ok])


def resample(series: SampleSeries, target_rate: float) -> SampleSeries:
    """Linearly interpolate onto a uniform grid at ``target_rate``.

    The new grid starts on the first sample and covers the first-to-last
    sample span, so the first value is kept exactly.
    """
    if not target_rate > 0:
        raise ValueError("target_rate must be positive")
    if len(series) == 0:  # pragma: no cover - SampleSeries forbids it
        raise EmptySeries("empty series")
    if float(target_rate) == series.rate:
        return SampleSeries(series.channel, series.rate, series.values, series.start_offset)
    span = (len(series) - 1) / series.rate
    count = int(math.floor(span * target_rate + 1e-9)) + 1
    grid = series.start_offset + np.arange(count) / target_rate
    return SampleSeries(series.channel, target_rate, interpolate_at(series, grid),
                        series.start_offset)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationConfig:
    max_gap_s: float = 5.0
    max_flatline_s: float = 5.0
    comfort_band: tuple = (50.0, 100.0)

    def __post_init__(self):
        lo, hi = self.comfort_band
        object.__setattr__(self, "comfort_band", (float(lo), float(hi)))
        if not lo < hi:
            raise ValueError("comfort_band must be (low, high) with low < high")
        if self.max_gap_s < 0 or self.max_flatline_s < 0:
            raise ValueError("gap / flatline limits must be non-negative")


@dataclass(frozen=True)
class CheckResult:
    check: str
    channel: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]


def _gap_seconds(series: SampleSeries, phase_start: float, phase_end: float) -> float:
    missing = kernels.longest_true_run(np.isnan(series.values)) / series.rate
    lead = series.start_offset - phase_start
    tail = phase_end - (series.start_offset + series.duration)
    return max(missing, lead, tail, 0.0)


def _flatline_seconds(series: SampleSeries) -> float:
    v = series.values
    if len(v) < 2:
        return 0.0
    return kernels.longest_true_run(v[1:] == v[:-1]) / series.rate


def validate_cycle(cycle: MonitoringCycle, cfg: ValidationConfig | None = None) -> ValidationReport:
    """Equipment and comfort checks; failures are report entries, not exceptions."""
    cfg = cfg or ValidationConfig()
    entries = []
    phases = (("baseline", cycle.baseline, 0.0, cycle.baseline_duration),
              ("stimulus", cycle.stimulus, cycle.baseline_duration,
               cycle.baseline_duration + cycle.stimulus_duration))
    for ch in cycle.channels:
        for name, phase, start, end in phases:
            gap = _gap_seconds(phase[ch], start, end)
            entries.append(CheckResult("gap", f"{ch.value}/{name}", gap <= cfg.max_gap_s + _TOL,
                                       f"longest gap {gap:.2f} s (limit {cfg.max_gap_s:g} s)"))
    for name, phase, _, _ in phases:
        flat = _flatline_seconds(phase[Channel.HeartRate])
        entries.append(CheckResult("flatline", f"HeartRate/{name}", flat <= cfg.max_flatline_s + _TOL,
                                   f"longest flatline {flat:.2f} s (limit {cfg.max_flatline_s:g} s)"))
    hr = cycle.baseline[Channel.HeartRate].values
    mean = float(np.nanmean(hr))
    lo, hi = cfg.comfort_band
    entries.append(CheckResult("comfort", "HeartRate/baseline", lo <= mean <= hi,
                               f"baseline mean {mean:.1f} BPM (band [{lo:g}, {hi:g}])"))
    return ValidationReport(tuple(entries))


# -- sanitation --------------------------------------------------------------

@dataclass(frozen=True)
class SanitizedPair:
    reference: Mapping[Channel, SampleSeries] = field(default_factory=dict)
    probe: Mapping[Channel, SampleSeries] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "reference", _freeze(self.reference))
        object.__setattr__(self, "probe", _freeze(self.probe))

    @property
    def channels(self) -> tuple:
        return tuple(self.reference)


def sanitize_stimulus(cycle: MonitoringCycle, trim_s: float = TRIM_S,
                      channels: Iterable[Channel] | None = None) -> dict:
    """Drop the baseline, trim ``trim_s`` from both stimulus ends and put each
    channel on its common comparison rate."""
    if cycle.stimulus_duration < MIN_STIMULUS_S - _TOL:
        raise StimulusTooShort(
            f"stimulus is {cycle.stimulus_duration:g} s, need at least {MIN_STIMULUS_S:g} s")
    window = cycle.stimulus_duration - 2 * trim_s
    t0 = cycle.baseline_duration + trim_s
    wanted = cycle.channels if channels is None else [c for c in cycle.channels if c in set(channels)]
    out = {}
    for ch in wanted:
        rate = COMMON_RATES[ch]
        n = int(round(window * rate))
        grid = t0 + np.arange(n) / rate
        out[ch] = SampleSeries(ch, rate, interpolate_at(cycle.stimulus[ch], grid), start_offset=t0)
    return out


def sanitize(reference_cycle: MonitoringCycle, probe_cycle: MonitoringCycle,
             trim_s: float = TRIM_S) -> SanitizedPair:
    if abs(reference_cycle.stimulus_duration - probe_cycle.stimulus_duration) > _TOL:
        raise StimulusMismatch(
            f"stimulus durations differ: {reference_cycle.stimulus_duration:g} s vs "
            f"{probe_cycle.stimulus_duration:g} s")
    common = set(reference_cycle.channels) & set(probe_cycle.channels)
    if Channel.HeartRate not in common or len(common) < 2:
        raise NoCommonChannels(
            f"need HeartRate plus one neurological channel in common, have {sorted(c.value for c in common)}")
    return SanitizedPair(sanitize_stimulus(reference_cycle, trim_s, common),
                         sanitize_stimulus(probe_cycle, trim_s, common))
