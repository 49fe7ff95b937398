"""Streaming STFT analysis and synthesis for the 48 kHz / 20 ms / 10 ms regime.

Square-root Hann windows on both the analysis and synthesis side satisfy
constant overlap-add at 50% overlap, so a unity pass through
``analyze -> synthesize`` reconstructs the input exactly (up to float32
rounding) with a delay of ``window_len - hop_len`` samples.

Spectra are stored as complex64; all accumulation happens in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericError(ArithmeticError):
    """A frame contained non-finite values where finite ones are required."""


def periodic_hann(n: int) -> np.ndarray:
    # DFT-even variant; the symmetric one does not overlap-add to a constant.
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class StftConfig:
    """Frame geometry of the streaming transform.

    The defaults give 960-sample (20 ms) windows hopped by 480 samples
    (10 ms) at 48 kHz with two frames of look-ahead, i.e. 481 bins and a
    total algorithmic latency of 1920 samples (40 ms).
    """

    sample_rate_hz: int = 48000
    window_len: int = 960
    hop_len: int = 480
    fft_len: int = 960
    lookahead_frames: int = 2

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.window_len != self.fft_len:
            raise ValueError("window_len must equal fft_len (no zero padding)")
        if self.hop_len <= 0 or self.window_len % self.hop_len != 0:
            raise ValueError("hop_len must divide window_len")
        if self.window_len // self.hop_len != 2:
            raise ValueError("only 50% overlap is supported (window_len == 2 * hop_len)")
        if self.lookahead_frames < 0:
            raise ValueError("lookahead_frames must be >= 0")

    @property
    def bin_count(self) -> int:
        return self.fft_len // 2 + 1

    @property
    def hop_duration_s(self) -> float:
        return self.hop_len / self.sample_rate_hz


def latency_samples(cfg: StftConfig) -> int:
    """End-to-end algorithmic delay of the processing pipeline, in samples."""
    return cfg.window_len + cfg.lookahead_frames * cfg.hop_len


@dataclass
class Spectrum:
    """One STFT frame: ``fft_len/2 + 1`` complex bins on a linear frequency axis.

    For real input signals ``bins[0]`` and ``bins[-1]`` carry no imaginary
    part.  ``frame_index`` counts analysis frames from zero.
    """

    bins: np.ndarray
    frame_index: int = 0

    def copy(self) -> "Spectrum":
        return Spectrum(self.bins.copy(), self.frame_index)


class StftAnalyzer:
    """Sliding-window DFT analysis: feed one hop, receive one `Spectrum`.

    The internal ring starts zero-filled, so the first frame covers
    ``window_len - hop_len`` implicit leading zeros.
    """

    def __init__(self, cfg: StftConfig) -> None:
        self.cfg = cfg
        self.window = np.sqrt(periodic_hann(cfg.window_len))  # float64 table
        self._window32 = self.window.astype(np.float32)
        self._ring = np.zeros(cfg.window_len, dtype=np.float32)
        self._scratch = np.empty(cfg.window_len, dtype=np.float32)
        self._next_index = 0

    def analyze(self, hop: np.ndarray) -> Spectrum:
        """Push ``hop_len`` new samples and return the windowed DFT of the
        most recent ``window_len`` samples."""
        hop = np.asarray(hop)
        if hop.shape != (self.cfg.hop_len,):
            raise ValueError(
                f"expected hop of {self.cfg.hop_len} samples, got shape {hop.shape}"
            )
        h = self.cfg.hop_len
        self._ring[:-h] = self._ring[h:]
        self._ring[-h:] = hop
        np.multiply(self._ring, self._window32, out=self._scratch)
        # rfft computes in float64; the result is stored at 32-bit precision.
        bins = np.fft.rfft(self._scratch).astype(np.complex64)
        spec = Spectrum(bins, self._next_index)
        self._next_index += 1
        return spec


class StftSynthesizer:
    """Inverse DFT, synthesis window and overlap-add: one `Spectrum` in,
    one hop of time samples out."""

    def __init__(self, cfg: StftConfig) -> None:
        self.cfg = cfg
        self.window = np.sqrt(periodic_hann(cfg.window_len))
        self._acc = np.zeros(cfg.window_len, dtype=np.float64)

    def synthesize(self, spec: Spectrum) -> np.ndarray:
        """Overlap-add one frame and emit the next ``hop_len`` output samples."""
        bins = np.asarray(spec.bins)
        if bins.shape != (self.cfg.bin_count,):
            raise ValueError(
                f"expected {self.cfg.bin_count} bins, got shape {bins.shape}"
            )
        if not np.isfinite(bins).all():
            raise NumericError("spectrum contains non-finite bins")
        frame = np.fft.irfft(bins, n=self.cfg.fft_len)
        frame *= self.window
        self._acc += frame
        h = self.cfg.hop_len
        out = self._acc[:h].astype(np.float32)
        self._acc[:-h] = self._acc[h:]
        self._acc[-h:] = 0.0
        return out
