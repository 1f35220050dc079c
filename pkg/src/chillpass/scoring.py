"""Coefficient of difference between a registered template and a probe.

Physiological score: mean of a categorical (binned agreement) test and a
relative-difference penalty test on heart rate. Neurological score: per band,
the mean of a penalty test and four mean-comparison tests (rms, geometric,
harmonic, arithmetic), then averaged over bands. The final coefficient is
the sum of both; at or below ``threshold`` passes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels
from .detector import DetectorConfig, baseline_stats, detect_chills
from .errors import LengthMismatch, NoCommonChannels
from .trace import (
    Channel,
    MonitoringCycle,
    SampleSeries,
    ValidationConfig,
    channel_sort_key,
    sanitize_stimulus,
)

MEAN_KINDS = ("rms", "geometric", "harmonic", "arithmetic")


@dataclass(frozen=True)
class ScoringConfig:
    bin_width_bpm: float = 5.0
    penalty_scale_physio: float = 10.0
    penalty_scale_neuro: float = 10.0
    mean_scale: float = 1.0
    epsilon: float = 1e-9
    neuro_bands: tuple | None = None
    threshold: float = 2.0
    stress_gate_enabled: bool = False
    stress_sigma: float = 3.0
    require_probe_chill: bool = False

    def __post_init__(self):
        if self.neuro_bands is not None:
            bands = tuple(sorted({Channel(b) for b in self.neuro_bands}, key=channel_sort_key))
            if any(not b.is_neurological for b in bands):
                raise ValueError("neuro_bands may only name neurological channels")
            object.__setattr__(self, "neuro_bands", bands)
        for name in ("bin_width_bpm", "penalty_scale_physio", "penalty_scale_neuro",
                     "mean_scale", "threshold", "epsilon", "stress_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CoefficientBreakdown:
    physio_categorical: float
    physio_penalty: float
    physio_total: float
    neuro_penalty_per_band: Mapping = field(default_factory=dict)
    neuro_means_per_band: Mapping = field(default_factory=dict)
    neuro_total: float = 0.0
    total: float = 0.0
    passed: bool = False

    @classmethod
    def from_parts(cls, physio_categorical, physio_penalty, neuro_penalty_per_band,
                   neuro_means_per_band, threshold) -> "CoefficientBreakdown":
        physio_total = (physio_categorical + physio_penalty) / 2
        band_scores = [
            (neuro_penalty_per_band[b] + sum(neuro_means_per_band[b][k] for k in MEAN_KINDS))
            / (1 + len(MEAN_KINDS))
            for b in neuro_penalty_per_band
        ]
        neuro_total = float(np.mean(band_scores)) if band_scores else 0.0
        total = physio_total + neuro_total
        return cls(physio_categorical, physio_penalty, physio_total,
                   dict(neuro_penalty_per_band), {b: dict(m) for b, m in neuro_means_per_band.items()},
                   neuro_total, total, passes(total, threshold))


def passes(total: float, threshold: float) -> bool:
    return total <= threshold


def _pair_values(reference: SampleSeries, probe: SampleSeries):
    if len(reference) != len(probe) or reference.rate != probe.rate:
        raise LengthMismatch(
            f"{reference.channel}: reference {len(reference)}@{reference.rate:g} Hz vs "
            f"probe {len(probe)}@{probe.rate:g} Hz")
    return reference.values, probe.values


def physio_categorical(reference: SampleSeries, probe: SampleSeries, cfg: ScoringConfig | None = None) -> float:
    """One minus the fraction of time indices whose values share a bin."""
    cfg = cfg or ScoringConfig()
    ref, prb = _pair_values(reference, probe)
    return 1.0 - kernels.bin_agreement(ref, prb, cfg.bin_width_bpm)


def penalty_test(reference: SampleSeries, probe: SampleSeries, scale: float, epsilon: float = 1e-9) -> float:
    """``scale`` times the mean pointwise relative difference."""
    ref, prb = _pair_values(reference, probe)
    return scale * kernels.mean_relative_difference(ref, prb, epsilon)


def power_means(values, epsilon: float = 1e-9) -> dict:
    x = np.maximum(np.asarray(values, dtype=np.float64), epsilon)
    return {
        "rms": float(np.sqrt(np.mean(x * x))),
        "geometric": float(np.exp(np.mean(np.log(x)))),
        "harmonic": float(x.size / np.sum(1.0 / x)),
        "arithmetic": float(np.mean(x)),
    }


def average_test(reference: SampleSeries, probe: SampleSeries, cfg: ScoringConfig | None = None) -> dict:
    """Relative difference of each of the four means, scaled by ``mean_scale``."""
    cfg = cfg or ScoringConfig()
    ref = power_means(reference.values, cfg.epsilon)
    prb = power_means(probe.values, cfg.epsilon)
    return {k: cfg.mean_scale * abs(prb[k] - ref[k]) / ref[k] for k in MEAN_KINDS}


def score_series(reference: Mapping, probe: Mapping, cfg: ScoringConfig | None = None) -> CoefficientBreakdown:
    """Score already-sanitized per-channel responses."""
    cfg = cfg or ScoringConfig()
    hr = Channel.HeartRate
    if hr not in reference or hr not in probe:
        raise NoCommonChannels("HeartRate missing from reference or probe")
    common = set(reference) & set(probe)
    bands = [c for c in sorted(common, key=channel_sort_key) if c.is_neurological]
    if cfg.neuro_bands is not None:
        bands = [b for b in bands if b in cfg.neuro_bands]
    if not bands:
        raise NoCommonChannels("no neurological band shared by reference and probe")
    categorical = physio_categorical(reference[hr], probe[hr], cfg)
    physio_pen = penalty_test(reference[hr], probe[hr], cfg.penalty_scale_physio, cfg.epsilon)
    band_pen = {b: penalty_test(reference[b], probe[b], cfg.penalty_scale_neuro, cfg.epsilon) for b in bands}
    band_means = {b: average_test(reference[b], probe[b], cfg) for b in bands}
    return CoefficientBreakdown.from_parts(categorical, physio_pen, band_pen, band_means, cfg.threshold)


def coefficient_of_difference(template, probe_cycle: MonitoringCycle,
                              cfg: ScoringConfig | None = None) -> CoefficientBreakdown:
    """Sanitize the probe and score it against the template's stored responses."""
    probe = sanitize_stimulus(probe_cycle, channels=template.reference_responses)
    return score_series(template.reference_responses, probe, cfg)


@dataclass(frozen=True)
class GateDecision:
    passed: bool
    reason: str | None = None


def stress_gate(template, probe_cycle: MonitoringCycle, cfg: ScoringConfig | None = None,
                validation: ValidationConfig | None = None) -> GateDecision:
    """Reject probes whose resting heart rate is far from the enrolled one."""
    cfg = cfg or ScoringConfig()
    if not cfg.stress_gate_enabled:
        return GateDecision(True)
    validation = validation or ValidationConfig()
    enrolled = template.baseline_stats[Channel.HeartRate]
    probe_mean = baseline_stats(probe_cycle.baseline[Channel.HeartRate]).mean
    lo, hi = validation.comfort_band
    if not lo <= probe_mean <= hi:
        return GateDecision(False, f"baseline {probe_mean:.1f} BPM outside comfort band [{lo:g}, {hi:g}]")
    deviation = abs(probe_mean - enrolled.mean)
    limit = cfg.stress_sigma * enrolled.stdev
    if deviation > limit:
        return GateDecision(False, f"baseline deviates {deviation:.1f} BPM from enrolled mean (limit {limit:.1f})")
    return GateDecision(True)


@dataclass(frozen=True)
class AttemptResult:
    passed: bool
    breakdown: CoefficientBreakdown | None
    reason: str | None = None


def authenticate(template, probe_cycle: MonitoringCycle, cfg: ScoringConfig | None = None,
                 validation: ValidationConfig | None = None, detector=None) -> AttemptResult:
    """Stress gate, then scoring, then the optional probe-chill requirement."""
    cfg = cfg or ScoringConfig()
    gate = stress_gate(template, probe_cycle, cfg, validation)
    if not gate.passed:
        return AttemptResult(False, None, gate.reason)
    breakdown = coefficient_of_difference(template, probe_cycle, cfg)
    if not breakdown.passed:
        return AttemptResult(False, breakdown, "coefficient above threshold")
    if cfg.require_probe_chill:
        det = detector or DetectorConfig()
        stats = baseline_stats(probe_cycle.baseline[Channel.HeartRate])
        probe_hr = sanitize_stimulus(probe_cycle, channels=[Channel.HeartRate])[Channel.HeartRate]
        if not detect_chills(probe_hr, stats, det.min_chill_s, det.sigma_multiplier):
            return AttemptResult(False, breakdown, "no chill in probe response")
    return AttemptResult(True, breakdown)
