"""Multi-frame complex filtering of the low spectrum bins.

A ring of the last ``order_n`` analysis frames provides, for an output
frame ``t``, the vector ``[X(t+l), X(t-1+l), ..., X(t-N+1+l)]`` per bin
(``l`` future frames are included, which is where the extra latency comes
from).  Applying a coefficient set computes, for every bin below
``df_bins``::

    Y(t, f) = sum_i conj(W_i(t, f)) * X(t - i + l, f)

i.e. a conjugated dot product between the taps and the multi-frame vector.
The filtered low band is then stitched with the band-gain stage output for
the remaining bins.

``ls_oracle_coefs`` is the reference coefficient estimator used for testing
and offline oracle processing: a per-bin least-squares fit against a clean
target, solved by loaded normal equations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral_core import NumericError, Spectrum

COEF_MAGIC = b"DFC1"
_COEF_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class DfConfig:
    """Filter order, look-ahead and the number of low bins it applies to."""

    order_n: int = 5
    lookahead_l: int = 2
    df_bins: int = 96
    tap_magnitude_cap: float = 10.0

    def __post_init__(self) -> None:
        if self.order_n < 1:
            raise ValueError("order_n must be >= 1")
        if not 0 <= self.lookahead_l < self.order_n:
            raise ValueError("lookahead_l must satisfy 0 <= l < order_n")
        if not 1 <= self.df_bins <= 481:
            raise ValueError("df_bins must be in [1, 481]")
        if self.tap_magnitude_cap <= 0:
            raise ValueError("tap_magnitude_cap must be positive")


@dataclass
class DfCoefSet:
    """Per-bin complex taps, shape ``(df_bins, order_n)``.

    Tap magnitudes are clamped to ``cap`` (phase preserved) on construction
    so runaway estimates cannot blow up the output.  ``flagged_bins`` lists
    bins where a solver fell back to identity taps.
    """

    w: np.ndarray
    cap: float = 10.0
    flagged_bins: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.complex64)
        if w.ndim != 2:
            raise ValueError("coefficients must be 2-D (df_bins, order_n)")
        if not np.isfinite(w).all():
            raise ValueError("coefficients must be finite")
        mag = np.abs(w)
        over = mag > self.cap
        if over.any():
            w = np.where(over, w * (self.cap / np.maximum(mag, 1e-30)), w)
        self.w = np.ascontiguousarray(w, dtype=np.complex64)

    @property
    def df_bins(self) -> int:
        return self.w.shape[0]

    @property
    def order_n(self) -> int:
        return self.w.shape[1]

    @classmethod
    def identity(cls, cfg: DfConfig) -> "DfCoefSet":
        """Taps that pass frame ``t`` through unchanged: 1 at the look-ahead
        tap, 0 elsewhere."""
        w = np.zeros((cfg.df_bins, cfg.order_n), dtype=np.complex64)
        w[:, cfg.lookahead_l] = 1.0
        return cls(w, cap=cfg.tap_magnitude_cap)


class MultiFrameBuffer:
    """Ring of the most recent ``order_n`` spectra.

    ``push`` returns the index of the frame that becomes ready for output
    (``newest - lookahead_l``) once enough frames are buffered, else None.
    Pre-stream slots are zero spectra, so early windows are well defined.
    """

    def __init__(self, cfg: DfConfig, bin_count: int) -> None:
        self.cfg = cfg
        self.bin_count = bin_count
        self._frames = np.zeros((cfg.order_n, bin_count), dtype=np.complex64)
        self._window = np.empty((cfg.order_n, bin_count), dtype=np.complex64)
        self._newest = -1
        self.frames_seen = 0

    def push(self, spec: Spectrum):
        if spec.bins.shape != (self.bin_count,):
            raise ValueError("spectrum size does not match buffer")
        if self.frames_seen and spec.frame_index != self._newest + 1:
            raise ValueError("frames must be pushed in sequence")
        self._newest = spec.frame_index
        self._frames[self._newest % self.cfg.order_n] = spec.bins
        self.frames_seen += 1
        if self.frames_seen > self.cfg.lookahead_l:
            return self._newest - self.cfg.lookahead_l
        return None

    def window(self, t: int) -> np.ndarray:
        """Rows ``[X(t+l), X(t-1+l), ..., X(t-N+1+l)]``; pre-stream frames
        are zeros.  The returned array is reused by the next call."""
        n, l = self.cfg.order_n, self.cfg.lookahead_l
        if t != self._newest - l:
            raise ValueError(f"frame {t} is not the current output frame")
        for i in range(n):
            src = t - i + l
            if src >= 0:
                self._window[i] = self._frames[src % n]
            else:
                self._window[i] = 0.0
        return self._window


def apply_df(buf: MultiFrameBuffer, coefs: DfCoefSet, t: int) -> np.ndarray:
    """Filter the low band of frame ``t``: per bin, the conjugated taps are
    dotted with the multi-frame vector.  Accumulates in complex128 and
    returns complex64 of length ``df_bins``."""
    if coefs.order_n != buf.cfg.order_n or coefs.df_bins > buf.bin_count:
        raise ValueError("coefficient shape does not match buffer")
    win = buf.window(t)[:, : coefs.df_bins]
    y = np.einsum(
        "fi,if->f",
        np.conj(coefs.w).astype(np.complex128),
        win.astype(np.complex128),
    )
    if not np.isfinite(y).all():
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NumericError(f"non-finite filter output at bin {bad}")
    return y.astype(np.complex64)


def stitch(df_low: np.ndarray, erb_out: Spectrum) -> Spectrum:
    """Low bins from the multi-frame filter, remaining bins from the
    band-gain stage; same frame."""
    k = df_low.shape[0]
    if k > erb_out.bins.shape[0]:
        raise ValueError("more filtered bins than spectrum bins")
    out = erb_out.bins.copy()
    out[:k] = df_low
    return Spectrum(out, erb_out.frame_index)


def ls_oracle_coefs(
    noisy_frames: np.ndarray, clean_frames: np.ndarray, cfg: DfConfig
) -> DfCoefSet:
    """Least-squares taps per bin over an aligned (noisy, clean) frame window.

    Minimizes ``sum_t |S(t) - w^H x(t)|^2`` via normal equations with
    diagonal loading ``1e-6 * trace / N``.  Bins whose normal matrix stays
    singular even after loading fall back to identity taps and appear in
    ``flagged_bins``.

    Both inputs are (T, bins) complex arrays with T >= 4 * order_n.
    """
    noisy = np.asarray(noisy_frames, dtype=np.complex128)
    clean = np.asarray(clean_frames, dtype=np.complex128)
    if noisy.shape != clean.shape or noisy.ndim != 2:
        raise ValueError("noisy and clean windows must have identical (T, bins) shapes")
    n, l, nf = cfg.order_n, cfg.lookahead_l, cfg.df_bins
    t_total = noisy.shape[0]
    if t_total < 4 * n:
        raise ValueError(f"window must hold at least {4 * n} frames, got {t_total}")
    if noisy.shape[1] < nf:
        raise ValueError("window has fewer bins than df_bins")

    t0, t1 = n - 1 - l, t_total - 1 - l
    steps = np.arange(t0, t1 + 1)
    # rows[tau, i] = index of X(t - i + l) for t = t0 + tau
    rows = steps[:, None] - np.arange(n)[None, :] + l
    x = noisy[rows][:, :, :nf]  # (T_valid, N, F)
    s = clean[t0 : t1 + 1, :nf]  # (T_valid, F)

    r = np.einsum("tif,tjf->fij", x, np.conj(x))
    rhs = np.einsum("tif,tf->fi", x, np.conj(s))
    trace = np.trace(r, axis1=1, axis2=2).real
    loading = 1e-6 * trace / n
    r[:, np.arange(n), np.arange(n)] += loading[:, None]

    w = np.empty((nf, n), dtype=np.complex128)
    flagged: list[int] = []
    identity = np.zeros(n, dtype=np.complex128)
    identity[l] = 1.0
    solvable = trace > 0.0
    if solvable.any():
        try:
            w[solvable] = np.linalg.solve(r[solvable], rhs[solvable][..., None])[..., 0]
        except np.linalg.LinAlgError:
            for f in np.flatnonzero(solvable):
                try:
                    w[f] = np.linalg.solve(r[f], rhs[f])
                except np.linalg.LinAlgError:
                    w[f] = identity
                    flagged.append(int(f))
    for f in np.flatnonzero(~solvable):
        w[f] = identity
        flagged.append(int(f))
    return DfCoefSet(w.astype(np.complex64), cap=cfg.tap_magnitude_cap, flagged_bins=tuple(sorted(flagged)))


def save_coefs(coefs: DfCoefSet, path: str | Path) -> None:
    """Binary dump: 16-byte header (magic, order, bins, reserved) then
    little-endian float32 re/im pairs, bin-major."""
    header = _COEF_HEADER.pack(COEF_MAGIC, coefs.order_n, coefs.df_bins, 0)
    body = np.ascontiguousarray(coefs.w, dtype="<c8").view("<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_coefs(path: str | Path, cap: float = 10.0) -> DfCoefSet:
    raw = Path(path).read_bytes()
    if len(raw) < _COEF_HEADER.size:
        raise ValueError("coefficient file too short")
    magic, order_n, df_bins, _ = _COEF_HEADER.unpack_from(raw)
    if magic != COEF_MAGIC:
        raise ValueError("bad magic in coefficient file")
    expected = df_bins * order_n * 2
    data = np.frombuffer(raw, dtype="<f4", offset=_COEF_HEADER.size)
    if data.size != expected:
        raise ValueError("coefficient payload size mismatch")
    w = data.view("<c8").reshape(df_bins, order_n)
    return DfCoefSet(w.copy(), cap=cap)
