"""Experiment harness: registration runs, the attempt matrix, time decay,
threshold sweeps and scale calibration over synthetic populations."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .config import Config
from .detector import cycle_chills
from .enrollment import (
    GiveUpMusic,
    ProposeAuto,
    ProposeManual,
    RegisteredTemplate,
    SessionState,
    SubmitFullListen,
    SubmitSegmentListen,
    advance,
    build_template,
    start_session,
)
from .errors import CalibrationDiverged, NoChillMusicForSubject, NoQualifyingOverlap
from .scoring import MEAN_KINDS, AttemptResult, authenticate, passes
from .synth import (
    PerturbationSpec,
    Population,
    derive_seed,
    probe_segment,
    series_percent_difference,
    synth_cycle,
)
from .trace import Channel, MonitoringCycle, sanitize_stimulus

log = logging.getLogger(__name__)


class AttemptCategory(str, Enum):
    ValidAttempt = "ValidAttempt"
    SameUserDifferentMusic = "SameUserDifferentMusic"
    DifferentUserRegisteredMusic = "DifferentUserRegisteredMusic"
    InvalidAttempt = "InvalidAttempt"


CATEGORY_ORDER = tuple(AttemptCategory)
IMPOSTOR_CATEGORIES = (AttemptCategory.DifferentUserRegisteredMusic, AttemptCategory.InvalidAttempt)


def categorize(template_subject, template_music, probe_subject, probe_music) -> AttemptCategory:
    same_subject = template_subject == probe_subject
    same_music = template_music == probe_music
    if same_subject:
        return AttemptCategory.ValidAttempt if same_music else AttemptCategory.SameUserDifferentMusic
    return AttemptCategory.DifferentUserRegisteredMusic if same_music else AttemptCategory.InvalidAttempt


# -- registration ------------------------------------------------------------

@dataclass
class RegistrationResult:
    templates: dict
    failures: dict
    listens: dict
    verification_cycles: dict

    def template_list(self) -> list:
        return [self.templates[k] for k in sorted(self.templates)]


def _manual_points(session) -> list:
    """Fallback points a subject would pick: midpoints of detected chills,
    longest first."""
    intervals = [iv for c in session.full_listen_cycles for iv in cycle_chills(c, session.detector)]
    intervals.sort(key=lambda iv: (-(iv.end_s - iv.start_s), iv.start_s))
    points = []
    for iv in intervals:
        p = (iv.start_s + iv.end_s) / 2
        if all(abs(p - q) > 1.0 for q in points):
            points.append(p)
    return points


def register_subject(config: Config, population: Population, subject_id: str, seed: int,
                     registered_at=None):
    """Walk the registration state machine over the subject's preselected music.

    Returns ``(template, listens, verification_cycle)``; raises :class:`NoChillMusicForSubject`
    when every piece is rejected.
    """
    subject = population.subjects[subject_id]
    sim = config.simulation
    listens = 0
    for music_id in population.preselected.get(subject_id, []):
        music = population.musics[music_id]
        affinity = population.affinity[subject_id, music_id]
        session = start_session(subject_id, music_id, segment_attempts=sim.segment_attempts,
                                detector=config.detector, validation=config.validation)
        for k in range(session.required_full_listens):
            cycle = synth_cycle(subject, music, None, affinity, None,
                                derive_seed(seed, "full", subject_id, music_id, k), sim)
            listens += 1
            session = advance(session, SubmitFullListen(cycle))
        if session.state is SessionState.RejectedMusic:
            log.info("%s: %s is not chill music, trying next piece", subject_id, music_id)
            continue
        fallback = _manual_points(session)
        attempt = 0
        while not session.state.terminal:
            if attempt == 0:
                try:
                    session = advance(session, ProposeAuto())
                except NoQualifyingOverlap:
                    pass
            if session.state is SessionState.AwaitingSegmentChoice:
                if not fallback:
                    session = advance(session, GiveUpMusic())
                    break
                session = advance(session, ProposeManual(fallback.pop(0)))
            cycle = synth_cycle(subject, music, session.candidate_segment, affinity, None,
                                derive_seed(seed, "segment", subject_id, music_id, attempt), sim)
            listens += 1
            attempt += 1
            session = advance(session, SubmitSegmentListen(cycle))
        if session.state is SessionState.Registered:
            return build_template(session, registered_at=registered_at), listens, session.verification_cycle
        log.info("%s: no verifiable segment in %s", subject_id, music_id)
    raise NoChillMusicForSubject(f"{subject_id}: none of the preselected music qualified")


def run_registration(config: Config, population: Population, seed: int = 0,
                     registered_at=None) -> RegistrationResult:
    templates, failures, listens, cycles = {}, {}, {}, {}
    for sid in sorted(population.subjects):
        try:
            templates[sid], listens[sid], cycles[sid] = register_subject(
                config, population, sid, seed, registered_at)
        except NoChillMusicForSubject as exc:
            failures[sid] = str(exc)
    return RegistrationResult(templates, failures, listens, cycles)


# -- probes and the attempt matrix -------------------------------------------

@dataclass(frozen=True)
class Probe:
    probe_id: str
    subject_id: str
    music_id: str
    kind: str
    cycle: MonitoringCycle


def synth_probe(config: Config, population: Population, subject_id: str, music_id: str, segment,
                seed: int, label: str, perturb: PerturbationSpec | None = None) -> MonitoringCycle:
    return synth_cycle(population.subjects[subject_id], population.musics[music_id], segment,
                       population.affinity[subject_id, music_id],
                       perturb if perturb is not None else population.perturbation_for(subject_id),
                       derive_seed(seed, label, subject_id, music_id), config.simulation)


def default_probes(config: Config, population: Population, templates: dict, seed: int = 0) -> list:
    """Four probes per enrolled subject: own segment, another subject's
    segment, the shared constant piece and the subject's unique random piece."""
    probes = []
    for sid in sorted(templates):
        own = templates[sid]
        plan = [("own", own.music_id, own.segment)]
        other = population.cross_subject.get(sid)
        if other in templates:
            plan.append(("other", templates[other].music_id, templates[other].segment))
        if population.constant_music:
            m = population.musics[population.constant_music]
            plan.append(("constant", m.music_id, probe_segment(m)))
        if sid in population.random_music:
            m = population.musics[population.random_music[sid]]
            plan.append(("random", m.music_id, probe_segment(m)))
        for kind, music_id, segment in plan:
            cycle = synth_probe(config, population, sid, music_id, segment, seed, "probe")
            probes.append(Probe(f"{sid}:{kind}:{music_id}", sid, music_id, kind, cycle))
    return probes


@dataclass(frozen=True)
class AttemptRow:
    category: AttemptCategory
    template_subject: str
    template_music: str
    probe_id: str
    probe_subject: str
    probe_music: str
    probe_kind: str
    result: AttemptResult
    stimulus_s: float

    @property
    def total(self) -> float:
        return self.result.breakdown.total if self.result.breakdown is not None else math.inf

    @property
    def passed(self) -> bool:
        return self.result.passed


REPORT_COLUMNS = (
    "category", "template_subject", "template_music", "probe_id", "probe_subject", "probe_music",
    "probe_kind", "physio_categorical", "physio_penalty", "physio_total", "neuro_total", "total",
    "passed", "reason", "stimulus_s",
)


def _fmt(x) -> str:
    return "" if x is None or not math.isfinite(x) else f"{x:.9f}"


@dataclass
class MatrixReport:
    rows: list

    def counts(self) -> dict:
        out = {c: [0, 0] for c in CATEGORY_ORDER}
        for r in self.rows:
            out[r.category][1] += 1
            out[r.category][0] += int(r.passed)
        return {c: tuple(v) for c, v in out.items()}

    @property
    def accuracy(self) -> float:
        """Correct decisions over valid and impostor attempts; same-user,
        different-music attempts are left out."""
        good = total = 0
        for r in self.rows:
            if r.category is AttemptCategory.ValidAttempt:
                good += r.passed
            elif r.category in IMPOSTOR_CATEGORIES:
                good += not r.passed
            else:
                continue
            total += 1
        return good / total if total else float("nan")

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            b = r.result.breakdown
            w.writerow([
                r.category.value, r.template_subject, r.template_music, r.probe_id, r.probe_subject,
                r.probe_music, r.probe_kind,
                _fmt(b.physio_categorical if b else None), _fmt(b.physio_penalty if b else None),
                _fmt(b.physio_total if b else None), _fmt(b.neuro_total if b else None),
                _fmt(b.total if b else None), int(r.passed), r.result.reason or "",
                f"{r.stimulus_s:g}",
            ])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"{'category':<30} {'passed/total':>12} {'percent':>9}"]
        for cat, (passed, total) in self.counts().items():
            pct = 100.0 * passed / total if total else float("nan")
            lines.append(f"{cat.value:<30} {f'{passed}/{total}':>12} {pct:>8.2f}%")
        lines.append(f"{'accuracy':<30} {'':>12} {100.0 * self.accuracy:>8.2f}%")
        return "\n".join(lines) + "\n"


def run_matrix(config: Config, templates, probes) -> MatrixReport:
    """Score every probe against every template."""
    templates = sorted(templates, key=lambda t: t.key)
    rows = []
    for t in templates:
        for p in probes:
            result = authenticate(t, p.cycle, config.scoring, config.validation, config.detector)
            rows.append(AttemptRow(categorize(t.subject_id, t.music_id, p.subject_id, p.music_id),
                                   t.subject_id, t.music_id, p.probe_id, p.subject_id, p.music_id,
                                   p.kind, result, p.cycle.stimulus_duration))
    rows.sort(key=lambda r: (CATEGORY_ORDER.index(r.category), r.total,
                             r.template_subject, r.template_music, r.probe_id))
    return MatrixReport(rows)


def traces_document(templates, probes, bands=(Channel.Alpha1,)) -> dict:
    """Sanitized heart-rate and EEG traces for plotting."""
    def pick(series_map):
        out = {"HeartRate": series_map[Channel.HeartRate].values.tolist()}
        for band in list(bands) + [c for c in series_map if c.is_neurological]:
            if band in series_map:
                out["band"] = band.value
                out["values"] = series_map[band].values.tolist()
                break
        return out

    return {
        "templates": {f"{t.subject_id}/{t.music_id}": pick(t.reference_responses) for t in templates},
        "probes": {p.probe_id: pick(sanitize_stimulus(p.cycle)) for p in probes},
    }


# -- report files ------------------------------------------------------------

@dataclass(frozen=True)
class ReportRecord:
    """One row read back from a report CSV."""

    category: AttemptCategory
    template_subject: str
    template_music: str
    probe_id: str
    total: float
    passed: bool


def read_report(text: str) -> list:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        total = float(rec["total"]) if rec["total"] else math.inf
        rows.append(ReportRecord(AttemptCategory(rec["category"]), rec["template_subject"],
                                 rec["template_music"], rec["probe_id"], total, rec["passed"] == "1"))
    return rows


# -- threshold sweep ---------------------------------------------------------

def parse_thresholds(text: str) -> list:
    """``start:stop:step`` (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("threshold step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    return [float(x) if x.strip().lower() not in ("inf", "infinity") else math.inf
            for x in text.split(",") if x.strip()]


def roc_sweep(config, report, thresholds) -> list:
    """``(threshold, FAR, FRR)`` per threshold.

    FAR counts impostor attempts passing; FRR counts valid attempts failing.
    Same-user, different-music attempts are excluded. Gate rejections stay
    rejected at every threshold.
    """
    rows = report.rows if isinstance(report, MatrixReport) else list(report)
    valid = np.array([r.total for r in rows if r.category is AttemptCategory.ValidAttempt])
    impostor = np.array([r.total for r in rows if r.category in IMPOSTOR_CATEGORIES])
    out = []
    for thr in thresholds:
        far = float(np.mean([passes(t, thr) and math.isfinite(t) for t in impostor])) if impostor.size else math.nan
        frr = float(np.mean([not (passes(t, thr) and math.isfinite(t)) for t in valid])) if valid.size else math.nan
        out.append((float(thr), far, frr))
    return out


def roc_csv_text(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("threshold", "far", "frr"))
    for thr, far, frr in points:
        w.writerow((f"{thr:g}", f"{far:.6f}", f"{frr:.6f}"))
    return buf.getvalue()


# -- time decay --------------------------------------------------------------

@dataclass(frozen=True)
class DecayRow:
    subject_id: str
    music_id: str
    drift_pct: float
    percent_difference: float
    total: float
    passed: bool


def run_time_decay(config: Config, population: Population, templates, drift_pcts, seed: int = 0) -> list:
    """Synthesize a later-day segment listen per template and drift value."""
    rows = []
    for t in sorted(templates, key=lambda t: t.key):
        for drift in drift_pcts:
            perturb = PerturbationSpec(drift_pct=float(drift))
            cycle = synth_probe(config, population, t.subject_id, t.music_id, t.segment, seed,
                                f"later-day:{drift!r}", perturb)
            probe = sanitize_stimulus(cycle, channels=t.reference_responses)
            pct = series_percent_difference(t.reference_responses, probe, config.scoring.epsilon)
            result = authenticate(t, cycle, config.scoring, config.validation, config.detector)
            total = result.breakdown.total if result.breakdown else math.inf
            rows.append(DecayRow(t.subject_id, t.music_id, float(drift), pct, total, result.passed))
    return rows


def decay_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("subject", "music", "drift_pct", "percent_difference", "total", "passed"))
    for r in rows:
        w.writerow((r.subject_id, r.music_id, f"{r.drift_pct:g}", f"{r.percent_difference:.6f}",
                    _fmt(r.total), int(r.passed)))
    return buf.getvalue()


# -- calibration -------------------------------------------------------------

@dataclass(frozen=True)
class Components:
    """Scale-free pieces of one comparison, so totals can be recomputed for
    any penalty scale without rescoring."""

    categorical: float
    physio_rel: float
    band_rel: tuple
    band_mean_sums: tuple

    def physio_total(self, kp: float) -> float:
        return (self.categorical + kp * self.physio_rel) / 2

    def neuro_total(self, kn: float) -> float:
        per_band = [(kn * r + m) / (1 + len(MEAN_KINDS)) for r, m in zip(self.band_rel, self.band_mean_sums)]
        return float(np.mean(per_band))


def components_of(template: RegisteredTemplate, cycle: MonitoringCycle, config: Config) -> Components:
    unit = replace(config.scoring, penalty_scale_physio=1.0, penalty_scale_neuro=1.0)
    b = authenticate(template, cycle, replace(unit, stress_gate_enabled=False, require_probe_chill=False,
                                              threshold=math.inf)).breakdown
    bands = list(b.neuro_penalty_per_band)
    return Components(b.physio_categorical, b.physio_penalty,
                      tuple(b.neuro_penalty_per_band[x] for x in bands),
                      tuple(sum(b.neuro_means_per_band[x].values()) for x in bands))


def _largest_scale(valid, total_fn, lo, hi, target, tol=1e-4):
    def p95(k):
        return float(np.percentile([total_fn(c, k) for c in valid], 95))

    if p95(lo) > target:
        return None
    if p95(hi) <= target:
        return hi
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if p95(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_from_components(valid, invalid, base, bracket=(1.0, 100.0), target=1.0):
    """Largest penalty scales keeping the valid 95th percentile of each
    sub-total at or below ``target``; larger scales only raise the impostor
    medians, so the largest feasible scale maximizes them."""
    if not valid or not invalid:
        raise CalibrationDiverged("need both valid and impostor attempts")
    kp = _largest_scale(valid, lambda c, k: c.physio_total(k), *bracket, target)
    kn = _largest_scale(valid, lambda c, k: c.neuro_total(k), *bracket, target)
    if kp is None or kn is None:
        raise CalibrationDiverged(f"valid attempts exceed {target} even at scale {bracket[0]}")
    sep_p = (np.median([c.physio_total(kp) for c in invalid])
             - np.percentile([c.physio_total(kp) for c in valid], 95))
    sep_n = (np.median([c.neuro_total(kn) for c in invalid])
             - np.percentile([c.neuro_total(kn) for c in valid], 95))
    if sep_p <= 0 and sep_n <= 0:
        raise CalibrationDiverged("impostor medians do not rise above the valid 95th percentile")
    return replace(base, penalty_scale_physio=round(kp, 4), penalty_scale_neuro=round(kn, 4))


def calibrate_scales(config: Config, population: Population, seed: int = 0):
    reg = run_registration(config, population, seed)
    templates = reg.template_list()
    if not templates:
        raise CalibrationDiverged("no subject could be registered")
    sim = config.simulation
    valid = []
    for t in templates:
        # later-day repeats spread over the drift range valid users must tolerate
        for k, drift in enumerate(np.linspace(0.0, sim.calibration_max_drift_pct, sim.calibration_repeats)):
            cycle = synth_probe(config, population, t.subject_id, t.music_id, t.segment, seed,
                                f"calibration:{k}", PerturbationSpec(drift_pct=float(drift)))
            valid.append(components_of(t, cycle, config))
    invalid = []
    for p in default_probes(config, population, reg.templates, seed):
        for t in templates:
            cat = categorize(t.subject_id, t.music_id, p.subject_id, p.music_id)
            if cat in IMPOSTOR_CATEGORIES:
                invalid.append(components_of(t, p.cycle, config))
    return calibrate_from_components(valid, invalid, config.scoring)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
