"""Synthetic subjects, music and monitoring cycles.

The response model is deliberately simple: white sensor noise around a
subject's resting levels, plus a latency-shifted plateau (or trapezoid) in
heart rate inside the music's chill regions, scaled by the subject's
affinity for that music, with proportional shifts in each EEG band. Stress
raises heart rate, inflates its variance and pushes the EEG towards an
arousal pattern; drift attenuates responses on a later day.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import SegmentOutsideTrack
from .segments import SEGMENT_S, ChillSegment, SegmentSource
from .trace import (
    NEURO_CHANNELS,
    Channel,
    MonitoringCycle,
    SampleSeries,
    channel_sort_key,
    sanitize,
)
from . import kernels

STRESS_HR_BPM = 40.0
# fractional EEG change at stress 1.0 (alpha/theta suppressed, beta/gamma up)
STRESS_EEG_SHIFT = {
    Channel.Alpha1: -0.6, Channel.Alpha2: -0.6,
    Channel.Beta1: 0.8, Channel.Beta2: 0.8,
    Channel.Gamma1: 0.8, Channel.Gamma2: 0.8,
    Channel.Delta: 0.3, Channel.Theta: -0.4,
}
# typical band powers, unitless
BAND_LEVELS = {
    Channel.Delta: 200000.0, Channel.Theta: 60000.0,
    Channel.Alpha1: 20000.0, Channel.Alpha2: 15000.0,
    Channel.Beta1: 12000.0, Channel.Beta2: 10000.0,
    Channel.Gamma1: 5000.0, Channel.Gamma2: 3000.0,
}
RNG_NAMES = ("pcg64", "philox")


class ChillShape(str, Enum):
    Plateau = "Plateau"
    Ramp = "Ramp"


def _channel_map(m) -> dict:
    return dict(sorted(((Channel(k), float(v)) for k, v in m.items()),
                       key=lambda kv: channel_sort_key(kv[0])))


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    resting_hr_mean: float
    resting_hr_stdev: float
    eeg_band_means: Mapping[Channel, float]
    eeg_band_stdevs: Mapping[Channel, float]
    chill_hr_amplitude: float
    chill_shape: ChillShape = ChillShape.Plateau
    response_latency_s: float = 2.0
    eeg_chill_shift: Mapping[Channel, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "eeg_band_means", _channel_map(self.eeg_band_means))
        object.__setattr__(self, "eeg_band_stdevs", _channel_map(self.eeg_band_stdevs))
        object.__setattr__(self, "eeg_chill_shift", _channel_map(self.eeg_chill_shift))
        object.__setattr__(self, "chill_shape", ChillShape(self.chill_shape))
        if not 50.0 <= self.resting_hr_mean <= 100.0:
            raise ValueError(f"{self.subject_id}: resting_hr_mean must lie in [50, 100]")
        if self.resting_hr_stdev < 0:
            raise ValueError(f"{self.subject_id}: resting_hr_stdev must be non-negative")
        if not self.chill_hr_amplitude > 2 * self.resting_hr_stdev:
            raise ValueError(f"{self.subject_id}: chill amplitude must exceed twice the resting stdev")
        if not self.eeg_band_means or set(self.eeg_band_means) != set(self.eeg_band_stdevs):
            raise ValueError(f"{self.subject_id}: EEG means and stdevs must cover the same bands")
        if any(not c.is_neurological for c in self.eeg_band_means):
            raise ValueError("eeg_band_means may only hold neurological channels")
        if self.response_latency_s < 0:
            raise ValueError("response_latency_s must be non-negative")

    @property
    def bands(self) -> tuple:
        return tuple(self.eeg_band_means)


@dataclass(frozen=True)
class MusicProfile:
    music_id: str
    duration_s: float
    chill_regions: tuple = ()

    def __post_init__(self):
        regions = tuple(sorted((float(s), float(e)) for s, e in self.chill_regions))
        object.__setattr__(self, "chill_regions", regions)
        for s, e in regions:
            if s < 0 or e > self.duration_s:
                raise ValueError(f"{self.music_id}: chill region ({s}, {e}) outside track")
            if e - s < 5.0:
                raise ValueError(f"{self.music_id}: chill region ({s}, {e}) shorter than 5 s")

    def longest_region(self):
        if not self.chill_regions:
            return None
        return max(self.chill_regions, key=lambda r: (r[1] - r[0], -r[0]))


class AffinityMap:
    """``(subject_id, music_id) -> affinity`` in [0, 1]; missing pairs are 0."""

    def __init__(self, pairs=None):
        self._pairs = {}
        for (subject, music), value in dict(pairs or {}).items():
            self[subject, music] = value

    def __setitem__(self, key, value):
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"affinity for {key} must lie in [0, 1], got {value}")
        self._pairs[tuple(key)] = value

    def __getitem__(self, key) -> float:
        return self._pairs.get(tuple(key), 0.0)

    def items(self):
        return sorted(self._pairs.items())

    def __eq__(self, other):
        return isinstance(other, AffinityMap) and self._pairs == other._pairs


@dataclass(frozen=True)
class PerturbationSpec:
    """Later-day drift and coercion stress applied to one synthesized cycle.

    ``drift_target`` is ``"response"`` (scale every stimulus response, the
    time-decay model) or ``"chill"`` (scale only the chill amplitude).
    """

    drift_pct: float = 0.0
    stress_level: float = 0.0
    noise_seed: int = 0
    drift_target: str = "response"

    def __post_init__(self):
        if not 0.0 <= self.drift_pct < 100.0:
            raise ValueError("drift_pct must lie in [0, 100)")
        if not 0.0 <= self.stress_level <= 1.0:
            raise ValueError("stress_level must lie in [0, 1]")
        if self.drift_target not in ("response", "chill"):
            raise ValueError("drift_target must be 'response' or 'chill'")


@dataclass(frozen=True)
class SimulationConfig:
    rng: str = "pcg64"
    hr_rate: float = 2.0
    eeg_rate: float = 1.0
    baseline_s: float = 60.0
    eeg_bands: tuple = tuple(c.value for c in NEURO_CHANNELS)
    n_subjects: int = 5
    musics_per_subject: int = 3
    hr_mean_range: tuple = (58.0, 88.0)
    hr_stdev_range: tuple = (0.5, 1.0)
    chill_amplitude_range: tuple = (8.0, 14.0)
    latency_range: tuple = (1.0, 3.0)
    eeg_rel_noise: float = 0.01
    eeg_subject_spread: float = 0.7
    eeg_chill_shift_range: tuple = (0.1, 0.3)
    track_range: tuple = (180.0, 300.0)
    regions_per_track: tuple = (1, 3)
    region_length_range: tuple = (10.0, 20.0)
    first_choice_failure_rate: float = 0.2
    segment_attempts: int = 3
    calibration_repeats: int = 8
    calibration_max_drift_pct: float = 7.0

    def __post_init__(self):
        if self.rng not in RNG_NAMES:
            raise ValueError(f"rng must be one of {RNG_NAMES}, got {self.rng!r}")
        bands = tuple(Channel(b) for b in self.eeg_bands)
        if not bands or any(not b.is_neurological for b in bands):
            raise ValueError("eeg_bands must name at least one neurological channel")
        object.__setattr__(self, "eeg_bands", tuple(b.value for b in bands))
        for name in ("hr_mean_range", "hr_stdev_range", "chill_amplitude_range", "latency_range",
                     "eeg_chill_shift_range", "track_range", "regions_per_track",
                     "region_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be (low, high)")
            object.__setattr__(self, name, (lo, hi))
        if self.track_range[0] < SEGMENT_S:
            raise ValueError("tracks must be at least one minute long")


# -- randomness --------------------------------------------------------------

def stable_id(text: str) -> int:
    return zlib.crc32(str(text).encode("utf-8"))


def derive_seed(seed: int, *parts) -> int:
    """Deterministic 63-bit seed from a base seed and labels."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [stable_id(p) for p in parts]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def make_rng(kind: str, seed: int, noise_seed: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(noise_seed) & 0xFFFFFFFF])
    if kind == "pcg64":
        return np.random.Generator(np.random.PCG64(seq))
    if kind == "philox":
        return np.random.Generator(np.random.Philox(seq))
    raise ValueError(f"unknown rng {kind!r}")


# -- cycles ------------------------------------------------------------------

def chill_profile(t, regions, shape: ChillShape) -> np.ndarray:
    """Response envelope in [0, 1] at music times ``t``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    for s, e in regions:
        if shape is ChillShape.Plateau:
            env = ((t >= s) & (t <= e)).astype(np.float64)
        else:
            ramp = min(3.0, (e - s) / 4)
            env = np.clip(np.minimum(t - s, e - t) / ramp, 0.0, 1.0)
        out = np.maximum(out, env)
    return out


def synth_cycle(subject: SubjectProfile, music: MusicProfile, segment: ChillSegment | None,
                affinity: float, perturb: PerturbationSpec | None = None, seed: int = 0,
                sim: SimulationConfig | None = None) -> MonitoringCycle:
    """One baseline + stimulus cycle; fully determined by the arguments."""
    sim = sim or SimulationConfig()
    perturb = perturb or PerturbationSpec()
    if segment is None:
        offset, duration = 0.0, float(music.duration_s)
    else:
        if segment.music_id not in ("", music.music_id):
            raise SegmentOutsideTrack(f"segment belongs to {segment.music_id}, not {music.music_id}")
        if segment.start_s < 0 or segment.end_s > music.duration_s + 1e-9:
            raise SegmentOutsideTrack(
                f"segment [{segment.start_s:g}, {segment.end_s:g}] outside {music.duration_s:g} s track")
        offset, duration = float(segment.start_s), float(segment.end_s - segment.start_s)
    if not 0.0 <= affinity <= 1.0:
        raise ValueError("affinity must lie in [0, 1]")

    rng = make_rng(sim.rng, seed, perturb.noise_seed)
    stress = perturb.stress_level
    drift = perturb.drift_pct / 100.0
    strength = affinity * ((1.0 - drift) if perturb.drift_target == "chill" else 1.0)
    response_scale = (1.0 - drift) if perturb.drift_target == "response" else 1.0
    base_s = sim.baseline_s

    def grid(rate, seconds):
        return np.arange(int(round(seconds * rate))) / rate

    hr_level = subject.resting_hr_mean + stress * STRESS_HR_BPM
    hr_sd = subject.resting_hr_stdev * (1.0 + 2.0 * stress)
    tb = grid(sim.hr_rate, base_s)
    ts = grid(sim.hr_rate, duration)
    hr_env = chill_profile(offset + ts - subject.response_latency_s, music.chill_regions, subject.chill_shape)
    hr_base = hr_level + rng.normal(0.0, hr_sd, tb.size)
    hr_stim = (hr_level + subject.chill_hr_amplitude * strength * hr_env
               + rng.normal(0.0, hr_sd, ts.size)) * response_scale
    baseline = {Channel.HeartRate: SampleSeries(Channel.HeartRate, sim.hr_rate, np.maximum(hr_base, 0.0), 0.0)}
    stimulus = {Channel.HeartRate: SampleSeries(Channel.HeartRate, sim.hr_rate, np.maximum(hr_stim, 0.0), base_s)}

    tb = grid(sim.eeg_rate, base_s)
    ts = grid(sim.eeg_rate, duration)
    eeg_env = chill_profile(offset + ts - subject.response_latency_s, music.chill_regions, subject.chill_shape)
    wanted = {Channel(b) for b in sim.eeg_bands}
    for band in subject.bands:
        if band not in wanted:
            continue
        level = subject.eeg_band_means[band] * (1.0 + stress * STRESS_EEG_SHIFT[band])
        sd = subject.eeg_band_stdevs[band]
        shift = subject.eeg_chill_shift.get(band, 0.0)
        b = level + rng.normal(0.0, sd, tb.size)
        s = (level * (1.0 + shift * strength * eeg_env) + rng.normal(0.0, sd, ts.size)) * response_scale
        baseline[band] = SampleSeries(band, sim.eeg_rate, np.maximum(b, 0.0), 0.0)
        stimulus[band] = SampleSeries(band, sim.eeg_rate, np.maximum(s, 0.0), base_s)
    return MonitoringCycle(subject.subject_id, music.music_id, baseline, stimulus,
                           stimulus_duration=duration, baseline_duration=base_s)


def series_percent_difference(reference: Mapping, probe: Mapping, epsilon: float = 1e-9) -> float:
    """Mean over shared channels of the mean pointwise relative difference, in percent."""
    common = [c for c in reference if c in probe]
    if not common:
        raise ValueError("no shared channels")
    diffs = [kernels.mean_relative_difference(reference[c].values, probe[c].values, epsilon)
             for c in common]
    return 100.0 * float(np.mean(diffs))


def percent_difference(reference_cycle: MonitoringCycle, probe_cycle: MonitoringCycle) -> float:
    pair = sanitize(reference_cycle, probe_cycle)
    return series_percent_difference(pair.reference, pair.probe)


# -- populations -------------------------------------------------------------

@dataclass
class Population:
    """Everything the harness needs to synthesize an experiment.

    ``preselected`` lists, per subject, the music tried during registration
    in order. ``cross_subject`` names whose registered segment each subject
    hears as the "other subject's chill music" probe.
    """

    subjects: dict
    musics: dict
    affinity: AffinityMap
    preselected: dict
    cross_subject: dict = field(default_factory=dict)
    constant_music: str | None = None
    random_music: dict = field(default_factory=dict)
    perturbations: dict = field(default_factory=dict)

    def perturbation_for(self, subject_id: str) -> PerturbationSpec:
        return self.perturbations.get(subject_id, PerturbationSpec())

    def to_dict(self) -> dict:
        def subject(p: SubjectProfile):
            d = asdict(p)
            d["chill_shape"] = p.chill_shape.value
            for k in ("eeg_band_means", "eeg_band_stdevs", "eeg_chill_shift"):
                d[k] = {c.value: v for c, v in getattr(p, k).items()}
            return d

        return {
            "subjects": [subject(s) for s in self.subjects.values()],
            "musics": [{"music_id": m.music_id, "duration_s": m.duration_s,
                        "chill_regions": [list(r) for r in m.chill_regions]}
                       for m in self.musics.values()],
            "affinity": [{"subject": s, "music": m, "affinity": a} for (s, m), a in self.affinity.items()],
            "preselected": {k: list(v) for k, v in self.preselected.items()},
            "cross_subject": dict(self.cross_subject),
            "constant_music": self.constant_music,
            "random_music": dict(self.random_music),
            "perturbations": {k: asdict(v) for k, v in self.perturbations.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Population":
        subjects = {}
        for s in d["subjects"]:
            p = SubjectProfile(**s)
            subjects[p.subject_id] = p
        musics = {}
        for m in d["musics"]:
            p = MusicProfile(m["music_id"], m["duration_s"], tuple(tuple(r) for r in m.get("chill_regions", ())))
            musics[p.music_id] = p
        affinity = AffinityMap({(a["subject"], a["music"]): a["affinity"] for a in d.get("affinity", ())})
        pop = cls(subjects, musics, affinity,
                  {k: list(v) for k, v in d.get("preselected", {}).items()},
                  dict(d.get("cross_subject", {})), d.get("constant_music"),
                  dict(d.get("random_music", {})),
                  {k: PerturbationSpec(**v) for k, v in d.get("perturbations", {}).items()})
        pop.check()
        return pop

    def check(self):
        for sid, musics in self.preselected.items():
            if sid not in self.subjects:
                raise ValueError(f"preselected names unknown subject {sid}")
            for m in musics:
                if m not in self.musics:
                    raise ValueError(f"{sid} preselects unknown music {m}")
        refs = list(self.random_music.values()) + ([self.constant_music] if self.constant_music else [])
        for m in refs:
            if m not in self.musics:
                raise ValueError(f"unknown music {m}")
        for a, b in self.cross_subject.items():
            if a not in self.subjects or b not in self.subjects or a == b:
                raise ValueError(f"cross_subject {a} -> {b} must name two different known subjects")

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Population":
        return cls.from_dict(json.loads(text))


def _random_music(rng, music_id, sim: SimulationConfig) -> MusicProfile:
    duration = float(np.round(rng.uniform(*sim.track_range)))
    n_regions = int(rng.integers(sim.regions_per_track[0], sim.regions_per_track[1] + 1))
    # split the track into equal slots and drop one region in each, away from the edges
    regions = []
    slot = (duration - 40.0) / n_regions
    for k in range(n_regions):
        length = float(np.round(rng.uniform(*sim.region_length_range), 1))
        length = min(length, slot - 2.0)
        start = 20.0 + k * slot + float(rng.uniform(0.0, slot - length))
        regions.append((round(start, 1), round(start + length, 1)))
    return MusicProfile(music_id, duration, tuple(regions))


def generate_population(seed: int = 0, sim: SimulationConfig | None = None) -> Population:
    """Paper-shaped population: each subject preselects several pieces, one
    constant piece is heard by everyone, and each subject gets one unique
    random piece."""
    sim = sim or SimulationConfig()
    rng = make_rng(sim.rng, derive_seed(seed, "population"))
    bands = [Channel(b) for b in sim.eeg_bands]
    subjects, musics, preselected, random_music = {}, {}, {}, {}
    affinity = AffinityMap()
    ids = [f"S{i + 1}" for i in range(sim.n_subjects)]
    for sid in ids:
        means = {b: float(BAND_LEVELS[b] * np.exp(rng.normal(0.0, sim.eeg_subject_spread))) for b in bands}
        shifts = {b: float(rng.choice([-1.0, 1.0]) * rng.uniform(*sim.eeg_chill_shift_range)) for b in bands}
        subjects[sid] = SubjectProfile(
            subject_id=sid,
            resting_hr_mean=float(np.round(rng.uniform(*sim.hr_mean_range), 2)),
            resting_hr_stdev=float(np.round(rng.uniform(*sim.hr_stdev_range), 3)),
            eeg_band_means=means,
            eeg_band_stdevs={b: sim.eeg_rel_noise * v for b, v in means.items()},
            chill_hr_amplitude=float(np.round(rng.uniform(*sim.chill_amplitude_range), 2)),
            chill_shape=ChillShape.Plateau if rng.random() < 0.5 else ChillShape.Ramp,
            response_latency_s=float(np.round(rng.uniform(*sim.latency_range), 1)),
            eeg_chill_shift=shifts,
        )
        picks = []
        for k in range(sim.musics_per_subject):
            mid = f"{sid}-M{k + 1}"
            musics[mid] = _random_music(rng, mid, sim)
            picks.append(mid)
            high = float(np.round(rng.uniform(0.6, 1.0), 3))
            if k == 0 and rng.random() < sim.first_choice_failure_rate:
                affinity[sid, mid] = 0.0
            else:
                affinity[sid, mid] = high
        preselected[sid] = picks
        rid = f"R{sid[1:]}"
        musics[rid] = _random_music(rng, rid, sim)
        random_music[sid] = rid
    musics["C"] = _random_music(rng, "C", sim)
    cross = {sid: ids[i - 1] for i, sid in enumerate(ids)} if len(ids) > 1 else {}
    return Population(subjects, musics, affinity, preselected, cross, "C", random_music)


def probe_segment(music: MusicProfile) -> ChillSegment:
    """Segment played when a piece is used only as a probe stimulus."""
    region = music.longest_region()
    center = (region[0] + region[1]) / 2 if region else music.duration_s / 2
    start = min(max(center - SEGMENT_S / 2, 0.0), music.duration_s - SEGMENT_S)
    return ChillSegment(music.music_id, start, start + SEGMENT_S, SegmentSource.Manual)
