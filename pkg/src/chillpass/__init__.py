"""Music-response authentication: chill detection, enrollment, scoring and a
synthetic experiment harness."""
from .config import Config, load_config
from .detector import BaselineStats, ChillInterval, DetectorConfig, baseline_stats, detect_chills, is_chill_music
from .enrollment import RegisteredTemplate, RegistrationSession, TemplateStore, advance, start_session
from .errors import ChillPassError
from .harness import AttemptCategory, MatrixReport, categorize, run_matrix, run_registration, run_time_decay
from .scoring import ScoringConfig, authenticate, coefficient_of_difference
from .segments import ChillSegment, auto_select_segment, manual_select_segment
from .synth import PerturbationSpec, generate_population, percent_difference, synth_cycle
from .trace import Channel, MonitoringCycle, SampleSeries, parse_trace, sanitize, serialize_trace

__version__ = "0.1.0"

__all__ = [
    "AttemptCategory", "BaselineStats", "Channel", "ChillInterval", "ChillPassError", "ChillSegment",
    "Config", "DetectorConfig", "MatrixReport", "MonitoringCycle", "PerturbationSpec",
    "RegisteredTemplate", "RegistrationSession", "SampleSeries", "ScoringConfig", "TemplateStore",
    "advance", "authenticate", "auto_select_segment", "baseline_stats", "categorize",
    "coefficient_of_difference", "detect_chills", "generate_population", "is_chill_music",
    "load_config", "manual_select_segment", "parse_trace", "percent_difference", "run_matrix",
    "run_registration", "run_time_decay", "sanitize", "serialize_trace", "start_session",
    "synth_cycle",
]
