"""Exception hierarchy shared by every chillpass module."""


class ChillPassError(Exception):
    """Base class for all chillpass errors."""


# -- traces ------------------------------------------------------------------

class TraceError(ChillPassError, ValueError):
    pass


class MalformedRecord(TraceError):
    pass


class MissingChannel(TraceError):
    pass


class ShortBaseline(TraceError):
    pass


class EmptySeries(TraceError):
    pass


class StimulusTooShort(TraceError):
    pass


class StimulusMismatch(TraceError):
    """Reference and probe stimuli have different durations."""


class NoCommonChannels(TraceError):
    pass


class ValidationFailed(ChillPassError):
    """A cycle failed its equipment / comfort checks."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(f"{e.check}:{e.channel}" for e in report.failures)
        super().__init__(f"cycle failed validation ({failed})")


# -- detection / segments ----------------------------------------------------

class TooFewListens(ChillPassError, ValueError):
    pass


class NoQualifyingOverlap(ChillPassError):
    pass


class TrackTooShort(ChillPassError, ValueError):
    pass


class SegmentOutsideTrack(ChillPassError, ValueError):
    pass


# -- enrollment --------------------------------------------------------------

class IllegalTransition(ChillPassError):
    pass


class DuplicateTemplate(ChillPassError):
    pass


class TemplateNotFound(ChillPassError, KeyError):
    pass


NotFound = TemplateNotFound


class CorruptTemplate(ChillPassError):
    pass


# -- scoring / harness -------------------------------------------------------

class LengthMismatch(ChillPassError, ValueError):
    pass


class NoChillMusicForSubject(ChillPassError):
    pass


class CalibrationDiverged(ChillPassError):
    pass


class ConfigError(ChillPassError, ValueError):
    pass
