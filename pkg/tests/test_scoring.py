import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chillpass.enrollment import build_template
from chillpass.errors import LengthMismatch
from chillpass.scoring import (
    MEAN_KINDS, CoefficientBreakdown, ScoringConfig, authenticate, average_test,
    coefficient_of_difference, passes, penalty_test, physio_categorical, power_means, score_series,
    stress_gate,
)
from chillpass.detector import BaselineStats
from chillpass.trace import Channel, SampleSeries

from conftest import A1, HR, make_cycle
from oracles import closed_form_means
from test_enrollment import registered_session


def hr(values, rate=1.0):
    return SampleSeries(HR, rate, values)


def eeg(values):
    return SampleSeries(A1, 1.0, values)


def test_categorical_examples():
    assert physio_categorical(hr([72, 74, 80]), hr([73, 79, 81])) == pytest.approx(1 / 3)
    assert physio_categorical(hr([72, 74, 80]), hr([72, 74, 80])) == 0.0
    assert physio_categorical(hr([72, 74, 80]), hr([77, 79, 85])) == 1.0
    with pytest.raises(LengthMismatch):
        physio_categorical(hr([72, 74]), hr([72, 74, 80]))


def test_penalty_examples():
    assert penalty_test(hr([60, 60]), hr([66, 60]), 10.0) == pytest.approx(0.5)
    assert penalty_test(hr([60, 60]), hr([60, 60]), 10.0) == 0.0
    for base in (1.0, 70.0, 2e5):
        ref = np.full(10, base)
        assert penalty_test(hr(ref), hr(ref * 1.01), 10.0) == pytest.approx(0.1)


def test_means_closed_form():
    m = power_means([1, 2, 4])
    assert m["arithmetic"] == pytest.approx(7 / 3)
    assert m["geometric"] == pytest.approx(2.0)
    assert m["harmonic"] == pytest.approx(12 / 7)
    assert m["rms"] == pytest.approx(math.sqrt(7))


def test_means_against_oracle(rng):
    for _ in range(20):
        x = rng.uniform(0.1, 50, 25)
        got, want = power_means(x), closed_form_means(x)
        for k in MEAN_KINDS:
            assert got[k] == pytest.approx(want[k], rel=1e-12)


def test_average_test_examples():
    ref = eeg([100.0, 100.0])
    assert average_test(ref, ref) == {k: 0.0 for k in MEAN_KINDS}
    got = average_test(ref, eeg([110.0, 110.0]))
    assert got["arithmetic"] == pytest.approx(0.10)
    # lengths may differ
    assert average_test(eeg([1.0, 2.0, 4.0]), eeg([2.0, 2.0]))["geometric"] == pytest.approx(0.0)


def test_average_test_floors_zero_power():
    got = average_test(eeg([0.0, 1.0]), eeg([0.0, 1.0]))
    assert all(math.isfinite(v) and v == 0 for v in got.values())


def test_breakdown_combination():
    b = CoefficientBreakdown.from_parts(0.2, 0.6, {A1: 1.0, Channel.Beta1: 0.5},
                                        {A1: dict.fromkeys(MEAN_KINDS, 0.25),
                                         Channel.Beta1: dict.fromkeys(MEAN_KINDS, 0.0)}, 2.0)
    assert b.physio_total == pytest.approx(0.4)
    assert b.neuro_total == pytest.approx(((1.0 + 1.0) / 5 + 0.5 / 5) / 2)
    assert b.total == pytest.approx(b.physio_total + b.neuro_total)
    assert b.passed


def test_threshold_boundary():
    assert passes(2.0, 2.0)
    assert not passes(2.0 + 1e-6, 2.0)
    exact = CoefficientBreakdown.from_parts(1.0, 1.0, {A1: 5.0}, {A1: dict.fromkeys(MEAN_KINDS, 0.0)}, 2.0)
    assert exact.total == 2.0 and exact.passed


def test_score_series_identity_and_offset():
    ref = {HR: hr(70 + np.arange(80) % 7, 2.0), A1: eeg(np.linspace(50, 150, 40))}
    assert score_series(ref, ref).total == 0.0
    prev = 0.0
    for delta in (0.5, 1.0, 3.0, 6.0):
        probe = {HR: hr(ref[HR].values + delta, 2.0), A1: ref[A1]}
        b = score_series(ref, probe)
        assert b.physio_penalty > prev
        prev = b.physio_penalty


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 20))
def test_offset_monotone(seed, delta):
    r = np.random.default_rng(seed)
    ref = hr(r.uniform(55, 95, 40))
    small = hr(ref.values + delta)
    large = hr(ref.values + 2 * delta)
    assert penalty_test(ref, large, 10) > penalty_test(ref, small, 10)
    assert physio_categorical(ref, large) >= physio_categorical(ref, hr(ref.values)) - 1e-15


def test_channel_order_independent():
    r = np.random.default_rng(7)
    a = {HR: hr(r.uniform(60, 80, 80), 2.0), A1: eeg(r.uniform(1, 9, 40)),
         Channel.Beta1: SampleSeries(Channel.Beta1, 1.0, r.uniform(1, 9, 40))}
    b = {k: SampleSeries(k, v.rate, v.values * 1.1) for k, v in a.items()}
    rev_a = dict(reversed(list(a.items())))
    rev_b = dict(reversed(list(b.items())))
    assert score_series(a, b).total == score_series(rev_a, rev_b).total


def test_neuro_band_selection():
    r = np.random.default_rng(8)
    a = {HR: hr(r.uniform(60, 80, 80), 2.0), A1: eeg(r.uniform(1, 9, 40)),
         Channel.Beta1: SampleSeries(Channel.Beta1, 1.0, r.uniform(1, 9, 40))}
    b = dict(a)
    b[Channel.Beta1] = SampleSeries(Channel.Beta1, 1.0, a[Channel.Beta1].values * 2)
    only_alpha = score_series(a, b, ScoringConfig(neuro_bands=("Alpha1",)))
    assert only_alpha.total == 0.0
    assert score_series(a, b).neuro_total > 0
    with pytest.raises(ValueError):
        ScoringConfig(neuro_bands=("HeartRate",))
    with pytest.raises(ValueError):
        ScoringConfig(threshold=0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 3), min_size=7, max_size=7), st.lists(st.floats(0, 1), min_size=7, max_size=7))
def test_decision_monotone(parts, bumps):
    def build(v):
        return CoefficientBreakdown.from_parts(v[0], v[1], {A1: v[2]}, {A1: dict(zip(MEAN_KINDS, v[3:]))}, 2.0)

    lo = build(parts)
    hi = build([p + b for p, b in zip(parts, bumps)])
    if not lo.passed:
        assert not hi.passed


def test_self_comparison():
    session = registered_session()
    t = build_template(session, registered_at="x")
    b = coefficient_of_difference(t, session.verification_cycle)
    assert b.total == pytest.approx(0.0, abs=1e-9) and b.passed


def _template_with_baseline(mean, sd):
    t = build_template(registered_session(), registered_at="x")
    stats = dict(t.baseline_stats)
    stats[HR] = BaselineStats(HR, mean, sd, 120)
    from dataclasses import replace
    return replace(t, baseline_stats=stats)


def test_stress_gate_examples():
    t = _template_with_baseline(65.0, 3.0)
    on = ScoringConfig(stress_gate_enabled=True)
    same = make_cycle(np.full(120, 70.0) + np.tile([0, 1], 60), hr_base=65 + np.tile([-1.0, 1.0], 60))
    assert stress_gate(t, same, on).passed
    high = make_cycle(np.full(120, 95.0) + np.tile([0, 1], 60), hr_base=90 + np.tile([-1.0, 1.0], 60))
    decision = stress_gate(t, high, on)
    assert not decision.passed and "deviates 25.0" in decision.reason
    assert stress_gate(t, high, ScoringConfig()).passed
    outside = make_cycle(np.full(120, 110.0), hr_base=104 + np.tile([-1.0, 1.0], 60))
    assert "comfort" in stress_gate(_template_with_baseline(100.0, 3.0), outside, on).reason


def test_authenticate_gate_skips_scoring():
    t = _template_with_baseline(65.0, 3.0)
    high = make_cycle(np.full(120, 95.0) + np.tile([0, 1], 60), hr_base=90 + np.tile([-1.0, 1.0], 60))
    res = authenticate(t, high, ScoringConfig(stress_gate_enabled=True))
    assert not res.passed and res.breakdown is None


def test_require_probe_chill():
    session = registered_session()
    t = build_template(session, registered_at="x")
    flat = make_cycle(70 + np.tile([-0.5, 0.5], 60))
    loose = ScoringConfig(threshold=100.0)
    assert authenticate(t, flat, loose).passed
    res = authenticate(t, flat, ScoringConfig(threshold=100.0, require_probe_chill=True))
    assert not res.passed and res.reason == "no chill in probe response"
    assert authenticate(t, session.verification_cycle, ScoringConfig(require_probe_chill=True)).passed
