"""SNR-driven stage gating plus an attenuation limiter.

Gating uses strict inequalities: below the silence threshold both stages
are off and a silent spectrum is returned; above the upper threshold only
the band-gain stage runs; otherwise everything runs.  Both threshold
values at exactly the boundary therefore land in the full path.

The limiter runs after gating, so a user-set attenuation cap wins over a
silence decision: per bin, the processed output is kept unless its
magnitude dropped below ``10^(-max_atten/20)`` of the noisy input, in
which case the scaled noisy bin (noisy phase) is used instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .estimators import XI_MAX_DB, XI_MIN_DB, SnrEstimate
from .spectral_core import Spectrum


class StageDecision(enum.Enum):
    SILENCE = "silence"
    ERB_ONLY = "erb_only"
    FULL = "full"


@dataclass(frozen=True)
class GateThresholds:
    silence_below_db: float = -10.0
    df_off_above_db: float = 20.0

    def __post_init__(self) -> None:
        lo, hi = float(self.silence_below_db), float(self.df_off_above_db)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("thresholds must be finite")
        if not lo < hi:
            raise ValueError("silence_below_db must be below df_off_above_db")
        if lo < XI_MIN_DB or hi > XI_MAX_DB:
            raise ValueError(f"thresholds must lie within [{XI_MIN_DB}, {XI_MAX_DB}] dB")


@dataclass(frozen=True)
class AttenLimit:
    """Maximum allowed attenuation in dB; 100 dB is effectively unlimited."""

    max_atten_db: float = 100.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.max_atten_db) or self.max_atten_db < 0.0:
            raise ValueError("max_atten_db must be finite and >= 0")

    @property
    def floor(self) -> float:
        return 10.0 ** (-self.max_atten_db / 20.0)


def decide(snr: SnrEstimate, th: GateThresholds) -> StageDecision:
    if snr.xi_db < th.silence_below_db:
        return StageDecision.SILENCE
    if snr.xi_db > th.df_off_above_db:
        return StageDecision.ERB_ONLY
    return StageDecision.FULL


def apply_decision(
    decision: StageDecision, noisy: Spectrum, erb_out: Spectrum, stitched: Spectrum
) -> Spectrum:
    if decision is StageDecision.SILENCE:
        return Spectrum(np.zeros_like(noisy.bins), noisy.frame_index)
    if decision is StageDecision.ERB_ONLY:
        return erb_out
    return stitched


def limit_attenuation(noisy: Spectrum, processed: Spectrum, lim: AttenLimit) -> Spectrum:
    """Bound every bin's effective gain magnitude from below by the limit
    floor.  Bins already above the floor pass through untouched."""
    floor = lim.floor
    keep = np.abs(processed.bins) >= floor * np.abs(noisy.bins)
    out = np.where(keep, processed.bins, (floor * noisy.bins).astype(processed.bins.dtype))
    return Spectrum(out.astype(np.complex64), processed.frame_index)
