import numpy as np
import pytest

from chillpass.trace import Channel, MonitoringCycle, SampleSeries

HR = Channel.HeartRate
A1 = Channel.Alpha1


def make_cycle(hr_stim, hr_base=None, *, eeg_stim=None, eeg_base=None, subject="S1", music="M1",
               hr_rate=2.0, eeg_rate=1.0, baseline_s=60.0, stimulus_s=None, extra=None):
    """Cycle with HeartRate plus Alpha1 (and any ``extra`` {channel: (base, stim)})."""
    hr_stim = np.asarray(hr_stim, dtype=float)
    if stimulus_s is None:
        stimulus_s = len(hr_stim) / hr_rate
    if hr_base is None:
        hr_base = 70.0 + np.tile([-1.0, 1.0], int(baseline_s * hr_rate) // 2)
    n_eeg_b = int(baseline_s * eeg_rate)
    n_eeg_s = int(round(stimulus_s * eeg_rate))
    if eeg_base is None:
        eeg_base = 100.0 + np.tile([-2.0, 2.0], n_eeg_b // 2 + 1)[:n_eeg_b]
    if eeg_stim is None:
        eeg_stim = 100.0 + np.tile([-2.0, 2.0], n_eeg_s // 2 + 1)[:n_eeg_s]
    baseline = {HR: SampleSeries(HR, hr_rate, hr_base, 0.0), A1: SampleSeries(A1, eeg_rate, eeg_base, 0.0)}
    stimulus = {HR: SampleSeries(HR, hr_rate, hr_stim, baseline_s),
                A1: SampleSeries(A1, eeg_rate, eeg_stim, baseline_s)}
    for ch, (b, s) in (extra or {}).items():
        baseline[ch] = SampleSeries(ch, eeg_rate, b, 0.0)
        stimulus[ch] = SampleSeries(ch, eeg_rate, s, baseline_s)
    return MonitoringCycle(subject, music, baseline, stimulus, stimulus_s, baseline_s)


def chill_cycle(music="M1", subject="S1", stimulus_s=60.0, chill=(20.0, 30.0), amp=10.0):
    """Alternating 69/71 stimulus (never beyond 1 sigma of the 70 +/- 1 baseline)
    with a plateau of ``amp`` BPM over ``chill`` seconds."""
    n = int(stimulus_s * 2)
    hr = 70.0 + np.tile([-0.5, 0.5], n // 2)
    if chill is not None:
        t = np.arange(n) / 2
        hr[(t >= chill[0]) & (t <= chill[1])] += amp
    return make_cycle(hr, subject=subject, music=music, stimulus_s=stimulus_s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for ac in sorted(results):
            terminalreporter.write_line(results[ac])
