"""Registration state machine, templates and the on-disk template store.

States and the events each accepts::

    AwaitingFullListens          SubmitFullListen, GiveUpMusic
    AwaitingSegmentChoice        ProposeAuto, ProposeManual, GiveUpMusic
    AwaitingSegmentVerification  SubmitSegmentListen, GiveUpMusic
    Registered, RejectedMusic    (terminal)
"""
from __future__ import annotations

import json
import os
import tempfile
import zlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .detector import BaselineStats, DetectorConfig, baseline_stats, detect_chills, is_chill_music
from .errors import (
    CorruptTemplate,
    DuplicateTemplate,
    IllegalTransition,
    StimulusMismatch,
    TemplateNotFound,
    ValidationFailed,
)
from .segments import (
    ChillSegment,
    SegmentSource,
    auto_select_segment,
    manual_select_segment,
    verify_segment,
)
from .trace import (
    Channel,
    MonitoringCycle,
    SampleSeries,
    ValidationConfig,
    channel_sort_key,
    sanitize_stimulus,
    validate_cycle,
)

TEMPLATE_FORMAT = 1


class SessionState(str, Enum):
    AwaitingFullListens = "AwaitingFullListens"
    AwaitingSegmentChoice = "AwaitingSegmentChoice"
    AwaitingSegmentVerification = "AwaitingSegmentVerification"
    Registered = "Registered"
    RejectedMusic = "RejectedMusic"

    @property
    def terminal(self) -> bool:
        return self in (SessionState.Registered, SessionState.RejectedMusic)


# -- events ------------------------------------------------------------------

@dataclass(frozen=True)
class SubmitFullListen:
    cycle: MonitoringCycle


@dataclass(frozen=True)
class ProposeAuto:
    pass


@dataclass(frozen=True)
class ProposeManual:
    point_s: float


@dataclass(frozen=True)
class SubmitSegmentListen:
    cycle: MonitoringCycle


@dataclass(frozen=True)
class GiveUpMusic:
    pass


@dataclass(frozen=True)
class RegistrationSession:
    subject_id: str
    music_id: str
    state: SessionState = SessionState.AwaitingFullListens
    full_listen_cycles: tuple = ()
    candidate_segment: ChillSegment | None = None
    attempts_remaining: int = 3
    verification_cycle: MonitoringCycle | None = None
    required_full_listens: int = 2
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)

    def __post_init__(self):
        if self.required_full_listens < 2:
            raise ValueError("music verification needs at least two full listens")

    @property
    def track_duration_s(self) -> float:
        return min(c.stimulus_duration for c in self.full_listen_cycles)


def start_session(subject_id: str, music_id: str, *, segment_attempts: int = 3,
                  required_full_listens: int = 2, detector: DetectorConfig | None = None,
                  validation: ValidationConfig | None = None) -> RegistrationSession:
    return RegistrationSession(subject_id, music_id, attempts_remaining=segment_attempts,
                               required_full_listens=required_full_listens,
                               detector=detector or DetectorConfig(),
                               validation=validation or ValidationConfig())


def _check_cycle(session: RegistrationSession, cycle: MonitoringCycle):
    if (cycle.subject_id, cycle.music_id) != (session.subject_id, session.music_id):
        raise IllegalTransition(
            f"cycle for {cycle.subject_id}/{cycle.music_id} submitted to session "
            f"{session.subject_id}/{session.music_id}")
    report = validate_cycle(cycle, session.validation)
    if not report.passed:
        raise ValidationFailed(report)


def _retains_chill(cycle: MonitoringCycle, detector: DetectorConfig) -> bool:
    stats = baseline_stats(cycle.baseline[Channel.HeartRate])
    hr = sanitize_stimulus(cycle, channels=[Channel.HeartRate])[Channel.HeartRate]
    return bool(detect_chills(hr, stats, detector.min_chill_s, detector.sigma_multiplier))


def advance(session: RegistrationSession, event) -> RegistrationSession:
    """Apply one event and return the new session (the input is untouched).

    Errors leave the session as it was: :class:`IllegalTransition` for events
    the current state does not accept, :class:`ValidationFailed` for cycles
    failing equipment checks, ``StimulusMismatch`` for listens of the wrong
    length, and ``NoQualifyingOverlap`` from ``ProposeAuto``.
    """
    state = session.state
    if state.terminal:
        raise IllegalTransition(f"session is {state.value}")
    if isinstance(event, GiveUpMusic):
        return replace(session, state=SessionState.RejectedMusic, candidate_segment=None)

    if state is SessionState.AwaitingFullListens and isinstance(event, SubmitFullListen):
        _check_cycle(session, event.cycle)
        if session.full_listen_cycles and abs(
                event.cycle.stimulus_duration - session.full_listen_cycles[0].stimulus_duration) > 1e-9:
            raise StimulusMismatch("full listens of one piece must have the same length")
        cycles = session.full_listen_cycles + (event.cycle,)
        if len(cycles) < session.required_full_listens:
            return replace(session, full_listen_cycles=cycles)
        verdict = is_chill_music(cycles, session.detector)
        nxt = SessionState.AwaitingSegmentChoice if verdict.verdict else SessionState.RejectedMusic
        return replace(session, full_listen_cycles=cycles, state=nxt)

    if state is SessionState.AwaitingSegmentChoice and isinstance(event, ProposeAuto):
        det = session.detector
        per_cycle = is_chill_music(session.full_listen_cycles, det).per_cycle_intervals
        segment = auto_select_segment(per_cycle, session.track_duration_s, music_id=session.music_id,
                                      min_overlap_s=det.min_chill_s,
                                      require_direction_match=det.require_direction_match)
        return replace(session, candidate_segment=segment,
                       state=SessionState.AwaitingSegmentVerification)

    if state is SessionState.AwaitingSegmentChoice and isinstance(event, ProposeManual):
        segment = manual_select_segment(event.point_s, session.track_duration_s,
                                        music_id=session.music_id)
        return replace(session, candidate_segment=segment,
                       state=SessionState.AwaitingSegmentVerification)

    if state is SessionState.AwaitingSegmentVerification and isinstance(event, SubmitSegmentListen):
        _check_cycle(session, event.cycle)
        seg = session.candidate_segment
        if abs(event.cycle.stimulus_duration - (seg.end_s - seg.start_s)) > 1e-9:
            raise StimulusMismatch(
                f"segment listen lasts {event.cycle.stimulus_duration:g} s, segment is "
                f"{seg.end_s - seg.start_s:g} s")
        ok = verify_segment(event.cycle, session.detector, session.validation)
        # the stored reference is the trimmed middle, which must keep the chill
        if ok and _retains_chill(event.cycle, session.detector):
            return replace(session, state=SessionState.Registered, verification_cycle=event.cycle)
        left = session.attempts_remaining - 1
        nxt = SessionState.AwaitingSegmentChoice if left > 0 else SessionState.RejectedMusic
        return replace(session, state=nxt, attempts_remaining=left, candidate_segment=None)

    raise IllegalTransition(f"{type(event).__name__} not accepted in state {state.value}")


# -- templates ---------------------------------------------------------------

@dataclass(frozen=True)
class RegisteredTemplate:
    subject_id: str
    music_id: str
    segment: ChillSegment
    reference_responses: Mapping[Channel, SampleSeries]
    baseline_stats: Mapping[Channel, BaselineStats]
    registered_at: str

    @property
    def key(self) -> tuple:
        return self.subject_id, self.music_id


def build_template(session: RegistrationSession, verification_cycle: MonitoringCycle | None = None,
                   registered_at: datetime | str | None = None) -> RegisteredTemplate:
    if session.state is not SessionState.Registered:
        raise IllegalTransition(f"cannot build a template from a {session.state.value} session")
    cycle = verification_cycle or session.verification_cycle
    if registered_at is None:
        registered_at = datetime.now(timezone.utc)
    if isinstance(registered_at, datetime):
        registered_at = registered_at.isoformat()
    return RegisteredTemplate(
        subject_id=session.subject_id,
        music_id=session.music_id,
        segment=session.candidate_segment,
        reference_responses=sanitize_stimulus(cycle),
        baseline_stats={ch: baseline_stats(s) for ch, s in cycle.baseline.items()},
        registered_at=registered_at,
    )


def template_to_dict(t: RegisteredTemplate) -> dict:
    return {
        "format": TEMPLATE_FORMAT,
        "subject_id": t.subject_id,
        "music_id": t.music_id,
        "registered_at": t.registered_at,
        "segment": {"music_id": t.segment.music_id, "start_s": t.segment.start_s,
                    "end_s": t.segment.end_s, "source": t.segment.source.value},
        "reference_responses": {
            ch.value: {"rate": s.rate, "start_offset": s.start_offset,
                       "values": [None if np.isnan(v) else v for v in s.values.tolist()]}
            for ch, s in t.reference_responses.items()
        },
        "baseline_stats": {
            ch.value: {"mean": b.mean, "stdev": b.stdev, "sample_count": b.sample_count}
            for ch, b in t.baseline_stats.items()
        },
    }


def template_from_dict(d: dict) -> RegisteredTemplate:
    seg = d["segment"]
    refs = {}
    for name, s in d["reference_responses"].items():
        ch = Channel(name)
        values = [np.nan if v is None else v for v in s["values"]]
        refs[ch] = SampleSeries(ch, s["rate"], values, s["start_offset"])
    stats = {Channel(name): BaselineStats(Channel(name), b["mean"], b["stdev"], b["sample_count"])
             for name, b in d["baseline_stats"].items()}
    order = lambda m: dict(sorted(m.items(), key=lambda kv: channel_sort_key(kv[0])))  # noqa: E731
    return RegisteredTemplate(d["subject_id"], d["music_id"],
                              ChillSegment(seg["music_id"], seg["start_s"], seg["end_s"],
                                           SegmentSource(seg["source"])),
                              order(refs), order(stats), d["registered_at"])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_template(t: RegisteredTemplate) -> str:
    body = template_to_dict(t)
    crc = zlib.crc32(canonical_json(body).encode("utf-8"))
    return canonical_json({**body, "crc32": crc}) + "\n"


def loads_template(text: str) -> RegisteredTemplate:
    try:
        doc = json.loads(text)
        crc = doc.pop("crc32")
    except (json.JSONDecodeError, AttributeError, KeyError, TypeError):
        raise CorruptTemplate("template file is not a complete checksummed document") from None
    if zlib.crc32(canonical_json(doc).encode("utf-8")) != crc:
        raise CorruptTemplate("checksum mismatch")
    try:
        return template_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptTemplate(f"template fields invalid: {exc}") from None


class TemplateStore:
    """Templates on disk at ``<root>/<subject_id>/<music_id>.template.json``.

    Writes go through a temp file and a hard link, so a key is created
    atomically and an existing template is never overwritten by accident.
    """

    SUFFIX = ".template.json"

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, subject_id: str, music_id: str) -> Path:
        for part in (subject_id, music_id):
            if not part or "/" in part or "\\" in part or part in (".", ".."):
                raise ValueError(f"unsafe identifier {part!r}")
        return self.root / subject_id / f"{music_id}{self.SUFFIX}"

    def save(self, template: RegisteredTemplate, replace_existing: bool = False) -> Path:
        path = self.path_for(*template.key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(dumps_template(template))
            if replace_existing:
                os.replace(tmp, path)
            else:
                try:
                    os.link(tmp, path)
                except FileExistsError:
                    raise DuplicateTemplate(
                        f"template for {template.subject_id}/{template.music_id} already exists") from None
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return path

    def load(self, subject_id: str, music_id: str) -> RegisteredTemplate:
        path = self.path_for(subject_id, music_id)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise TemplateNotFound(f"no template for {subject_id}/{music_id}") from None
        return loads_template(text)

    def keys(self) -> list:
        found = []
        for path in sorted(self.root.glob(f"*/*{self.SUFFIX}")):
            found.append((path.parent.name, path.name[: -len(self.SUFFIX)]))
        return found

    def load_all(self) -> list:
        return [self.load(s, m) for s, m in self.keys()]


def save_template(store: TemplateStore, template: RegisteredTemplate) -> Path:
    return store.save(template)


def load_template(store: TemplateStore, subject_id: str, music_id: str) -> RegisteredTemplate:
    return store.load(subject_id, music_id)
