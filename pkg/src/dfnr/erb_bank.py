"""Rectangular perceptual filterbank between 481 linear bins and 32 bands.

Band edges are placed uniformly on the ERB-rate axis
``rate(f) = 21.4 * log10(1 + 0.00437 * f)`` and snapped to bin indices with
a minimum band width enforced from the low end, so every bin belongs to
exactly one band and band widths never decrease with frequency.

The forward direction pools per-band log power (the envelope feature); the
backward direction expands 32 band gains to per-bin gains by piecewise
constant replication, which keeps unit gains an exact identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral_core import Spectrum, StftConfig

ERB_RATE_SCALE = 21.4
ERB_RATE_SLOPE = 0.00437
POWER_FLOOR = 1e-10


def erb_rate(freq_hz):
    """Map frequency in Hz to the ERB-rate (perceptual band number) axis."""
    return ERB_RATE_SCALE * np.log10(1.0 + ERB_RATE_SLOPE * np.asarray(freq_hz, dtype=np.float64))


def erb_rate_inverse(rate):
    """Map an ERB-rate value back to frequency in Hz."""
    return (np.power(10.0, np.asarray(rate, dtype=np.float64) / ERB_RATE_SCALE) - 1.0) / ERB_RATE_SLOPE


@dataclass(frozen=True)
class ErbLayout:
    """A partition of ``[0, bin_count)`` into contiguous bands.

    ``band_edges`` has ``n_bands + 1`` entries with ``edges[0] == 0`` and
    ``edges[-1] == bin_count``; band ``b`` owns bins ``edges[b]:edges[b+1]``.
    """

    band_edges: tuple[int, ...]
    min_band_width: int
    bin_hz: float

    def __post_init__(self) -> None:
        e = np.asarray(self.band_edges, dtype=np.int64)
        if e[0] != 0:
            raise ValueError("first edge must be 0")
        widths = np.diff(e)
        if (widths < self.min_band_width).any():
            raise ValueError("band narrower than min_band_width")
        if (np.diff(widths) < 0).any():
            raise ValueError("band widths must be non-decreasing with frequency")

    @property
    def n_bands(self) -> int:
        return len(self.band_edges) - 1

    @property
    def bin_count(self) -> int:
        return self.band_edges[-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.band_edges, dtype=np.int64))

    def bin_to_band(self) -> np.ndarray:
        """Index map of length ``bin_count``: which band each bin belongs to."""
        return np.repeat(np.arange(self.n_bands), self.widths)

    def band_of_bin(self, bin_index: int) -> int:
        if not 0 <= bin_index < self.bin_count:
            raise ValueError(f"bin {bin_index} out of range")
        return int(np.searchsorted(self.band_edges, bin_index, side="right") - 1)

    def center_frequencies_hz(self) -> np.ndarray:
        e = np.asarray(self.band_edges, dtype=np.float64)
        return 0.5 * (e[:-1] + e[1:] - 1.0) * self.bin_hz

    def format_table(self) -> str:
        """Plain text dump: band index, first bin, last bin, center Hz."""
        lines = ["band first_bin last_bin center_hz"]
        centers = self.center_frequencies_hz()
        for b in range(self.n_bands):
            lines.append(
                f"{b:4d} {self.band_edges[b]:9d} {self.band_edges[b + 1] - 1:8d} {centers[b]:9.1f}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class ErbGains:
    """Per-band gains in [0, 1]; clamped on construction."""

    g: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=np.float32)
        if not np.isfinite(g).all():
            raise ValueError("gains must be finite")
        self.g = np.clip(g, 0.0, 1.0)

    @classmethod
    def unit(cls, n_bands: int) -> "ErbGains":
        return cls(np.ones(n_bands, dtype=np.float32))


@dataclass
class ErbFeatures:
    """Per-band log power in dB with a fixed floor so silence stays finite."""

    f: np.ndarray


def design_layout(cfg: StftConfig, n_bands: int = 32, min_width: int = 2) -> ErbLayout:
    """Partition the linear bins into ``n_bands`` ERB-spaced rectangular bands.

    Ideal edges are uniform on the ERB-rate axis between 0 Hz and Nyquist,
    snapped to bins, then repaired so every band has at least ``min_width``
    bins and widths are non-decreasing.  Deterministic for a given config.
    """
    nb = cfg.bin_count
    if n_bands < 1 or min_width < 1:
        raise ValueError("n_bands and min_width must be >= 1")
    if n_bands * min_width > nb:
        raise ValueError(
            f"{n_bands} bands of at least {min_width} bins do not fit in {nb} bins"
        )
    bin_hz = cfg.sample_rate_hz / cfg.fft_len
    nyquist = cfg.sample_rate_hz / 2.0
    rates = np.linspace(0.0, float(erb_rate(nyquist)), n_bands + 1)
    edges = np.rint(erb_rate_inverse(rates) / bin_hz).astype(np.int64)
    edges[0], edges[-1] = 0, nb

    # Enforce the minimum width from the low end, then re-anchor the top.
    for i in range(1, n_bands + 1):
        edges[i] = max(edges[i], edges[i - 1] + min_width)
    edges[-1] = nb
    for i in range(n_bands - 1, 0, -1):
        edges[i] = min(edges[i], edges[i + 1] - min_width)
    if edges[0] != 0 or (np.diff(edges) < min_width).any():
        raise ValueError("layout infeasible after snapping")

    # Make widths non-decreasing; rounding can leave a local dip.  Raise the
    # dips, then return the surplus by trimming the widest bands from the top.
    widths = np.diff(edges)
    for i in range(1, n_bands):
        widths[i] = max(widths[i], widths[i - 1])
    surplus = int(widths.sum()) - nb
    while surplus > 0:
        trimmed = False
        for i in range(n_bands - 1, -1, -1):
            lower = widths[i - 1] if i > 0 else min_width
            take = min(surplus, widths[i] - max(lower, min_width))
            if take > 0:
                widths[i] -= take
                surplus -= take
                trimmed = True
            if surplus == 0:
                break
        if not trimmed:
            raise ValueError("layout infeasible: cannot balance band widths")
    edges = np.concatenate(([0], np.cumsum(widths)))
    return ErbLayout(tuple(int(x) for x in edges), min_width, bin_hz)


def band_power(bins: np.ndarray, layout: ErbLayout) -> np.ndarray:
    """Mean power per band (float64)."""
    p = np.abs(bins.astype(np.complex128)) ** 2
    sums = np.add.reduceat(p, layout.band_edges[:-1])
    return sums / layout.widths


def compress(spec: Spectrum, layout: ErbLayout) -> ErbFeatures:
    """Per-band mean power in dB: ``10*log10(p + 1e-10)``."""
    p = band_power(spec.bins, layout)
    return ErbFeatures(10.0 * np.log10(p + POWER_FLOOR))


def apply_gains(spec: Spectrum, gains: ErbGains, layout: ErbLayout) -> Spectrum:
    """Expand band gains to bins (piecewise constant) and scale the spectrum.

    Real gains leave the phase of every bin untouched.
    """
    per_bin = np.repeat(gains.g, layout.widths)
    return Spectrum((spec.bins * per_bin).astype(np.complex64), spec.frame_index)


class FeatureNormalizer:
    """Optional exponential mean normalization of band features (off by
    default in the processing chain; the time constant defaults to 1 s)."""

    def __init__(self, n_bands: int, hop_s: float, time_constant_s: float = 1.0) -> None:
        self._alpha = float(np.exp(-hop_s / time_constant_s))
        self._mean = np.zeros(n_bands, dtype=np.float64)
        self._primed = False

    def normalize(self, feats: ErbFeatures) -> ErbFeatures:
        if not self._primed:
            self._mean[:] = feats.f
            self._primed = True
        else:
            self._mean *= self._alpha
            self._mean += (1.0 - self._alpha) * feats.f
        return ErbFeatures(feats.f - self._mean)
