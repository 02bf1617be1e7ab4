"""Physical-layer simulator for relay attacks on multi-carrier phase ranging.

The package models a TDD short-range radio link, an amplify-and-forward
relay with per-tone phase and amplitude actuation, the phase-slope
distance estimator it manipulates, and the signal-strength and
reciprocity checks a defender can run. The ``harness`` subpackage turns
these parts into seeded, reproducible experiments with delimited output.
"""

from .channel import (
    SPEED_OF_LIGHT,
    ChannelModelSpec,
    ChannelResponse,
    Geometry,
    propagate,
    received_power_dbm,
)
from .detection import (
    ReciprocityReport,
    calibrate_epsilon,
    detect,
    ks_critical_value,
    ks_statistic,
    reciprocity_dissimilarity,
)
from .ranging import (
    DistanceEstimate,
    SweepObservation,
    ToneSweep,
    estimate_distance,
    run_sweep,
    unambiguous_range,
)
from .relay import (
    Direction,
    EqualizationProfile,
    InferenceMode,
    ManipulationProgram,
    RelayConfig,
    RelayState,
    advance_phase,
    equalization_profile,
    forward_tone,
    infer_tone_frequency,
    quantize_phase,
    required_phase_slope,
)
from .tdd import (
    DetectorTrace,
    EventFate,
    SweepNotDetectedError,
    SweepStartPattern,
    TimelineResult,
    TraceStep,
    TxEvent,
    count_sweep_tones,
    detect_sweep_start,
    simulate_timeline,
    tone_edges_after_pattern,
)

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "ChannelModelSpec",
    "ChannelResponse",
    "Geometry",
    "propagate",
    "received_power_dbm",
    "ToneSweep",
    "SweepObservation",
    "DistanceEstimate",
    "run_sweep",
    "estimate_distance",
    "unambiguous_range",
    "Direction",
    "InferenceMode",
    "RelayConfig",
    "RelayState",
    "ManipulationProgram",
    "EqualizationProfile",
    "required_phase_slope",
    "quantize_phase",
    "advance_phase",
    "infer_tone_frequency",
    "forward_tone",
    "equalization_profile",
    "TxEvent",
    "TraceStep",
    "DetectorTrace",
    "EventFate",
    "TimelineResult",
    "SweepStartPattern",
    "SweepNotDetectedError",
    "simulate_timeline",
    "detect_sweep_start",
    "count_sweep_tones",
    "tone_edges_after_pattern",
    "ReciprocityReport",
    "reciprocity_dissimilarity",
    "detect",
    "calibrate_epsilon",
    "ks_statistic",
    "ks_critical_value",
    "__version__",
]
