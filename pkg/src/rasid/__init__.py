"""Device-free passive motion detection from WLAN signal-strength variance."""

__version__ = "0.1.0"

from .density import KdeModel, fit, ks_two_sample
from .detector import DetectorConfig, GlobalDecision, RunResult, StreamVerdict, run
from .evaluation import EvalReport, score, score_alarms
from .profiling import FeatureKind, NormalProfile, build_profile, maybe_update
from .synth import SynthConfig, generate_synthetic, office_config, office_geometry
from .trace import (DataError, LabelTrack, RssTrace, SiteGeometry, StreamId, load_labels,
                    load_trace)

__all__ = [
    "DataError", "DetectorConfig", "EvalReport", "FeatureKind", "GlobalDecision", "KdeModel",
    "LabelTrack", "NormalProfile", "RssTrace", "RunResult", "SiteGeometry", "StreamId",
    "StreamVerdict", "SynthConfig", "build_profile", "fit", "generate_synthetic",
    "ks_two_sample", "load_labels", "load_trace", "maybe_update", "office_config",
    "office_geometry", "run", "score", "score_alarms",
]
