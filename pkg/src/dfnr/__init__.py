"""Two-stage streaming speech enhancement.

Stage 1 shapes the speech envelope with 32 perceptual band gains; stage 2
re-filters the lowest 96 bins with a 5-tap complex multi-frame filter.  A
frame-level SNR estimate gates both stages, an attenuation limiter bounds
how much the chain may remove, and everything runs hop-by-hop at 48 kHz
with 40 ms algorithmic latency.
"""

from .deep_filter import DfCoefSet, DfConfig, MultiFrameBuffer, apply_df, ls_oracle_coefs, stitch
from .engine import Engine, EngineConfig, MeterFrame, RtfReport, StageOverrides, run_stream
from .erb_bank import ErbFeatures, ErbGains, ErbLayout, apply_gains, compress, design_layout
from .estimators import (
    EstimatorOutput,
    SnrEstimate,
    blind_estimate,
    local_snr,
    make_estimator,
    oracle_estimate,
)
from .spectral_core import (
    NumericError,
    Spectrum,
    StftAnalyzer,
    StftConfig,
    StftSynthesizer,
    latency_samples,
)
from .stage_control import (
    AttenLimit,
    GateThresholds,
    StageDecision,
    apply_decision,
    decide,
    limit_attenuation,
)

__version__ = "0.1.0"

__all__ = [
    "AttenLimit",
    "DfCoefSet",
    "DfConfig",
    "Engine",
    "EngineConfig",
    "ErbFeatures",
    "ErbGains",
    "ErbLayout",
    "EstimatorOutput",
    "GateThresholds",
    "MeterFrame",
    "MultiFrameBuffer",
    "NumericError",
    "RtfReport",
    "SnrEstimate",
    "Spectrum",
    "StageDecision",
    "StageOverrides",
    "StftAnalyzer",
    "StftConfig",
    "StftSynthesizer",
    "apply_decision",
    "apply_df",
    "apply_gains",
    "blind_estimate",
    "compress",
    "decide",
    "design_layout",
    "latency_samples",
    "limit_attenuation",
    "local_snr",
    "ls_oracle_coefs",
    "make_estimator",
    "oracle_estimate",
    "run_stream",
    "stitch",
]
