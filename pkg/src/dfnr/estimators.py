"""Per-frame gain / tap / SNR estimators behind one pluggable interface.

Three backends:

* passthrough - unit gains, identity taps; the unity-processing reference.
* oracle      - needs the aligned clean signal; band gains from the
  clean/noisy power ratio, taps from the least-squares solver, SNR from the
  true per-frame speech and noise energies.
* blind       - self-contained heuristic for live use: a per-band decaying
  minimum tracks the noise floor, gains are Wiener-like from the resulting
  a-posteriori SNR, taps stay identity.

A learned model can be plugged in later by implementing `FrameEstimator`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .deep_filter import DfCoefSet, DfConfig, ls_oracle_coefs
from .erb_bank import ErbGains, ErbLayout, band_power
from .spectral_core import Spectrum

XI_MIN_DB = -15.0
XI_MAX_DB = 35.0


@dataclass(frozen=True)
class SnrEstimate:
    """Frame-level SNR in dB, clamped to [-15, 35] on construction."""

    xi_db: float

    def __post_init__(self) -> None:
        x = float(self.xi_db)
        if np.isnan(x):
            raise ValueError("SNR estimate must not be NaN")
        object.__setattr__(self, "xi_db", float(np.clip(x, XI_MIN_DB, XI_MAX_DB)))


@dataclass
class EstimatorOutput:
    gains: ErbGains
    coefs: DfCoefSet
    snr: SnrEstimate


def local_snr(clean: Spectrum, noise: Spectrum) -> SnrEstimate:
    """True frame SNR from aligned speech and noise spectra:
    ``10*log10(sum|S|^2 / sum|Z|^2)``, clamped."""
    es = float(np.sum(np.abs(clean.bins.astype(np.complex128)) ** 2))
    ez = float(np.sum(np.abs(noise.bins.astype(np.complex128)) ** 2))
    if es <= 0.0:
        return SnrEstimate(XI_MIN_DB)
    if ez <= 0.0:
        return SnrEstimate(XI_MAX_DB)
    return SnrEstimate(10.0 * np.log10(es / ez))


def oracle_estimate(
    noisy_frames: np.ndarray,
    clean_frames: np.ndarray,
    layout: ErbLayout,
    df_cfg: DfConfig,
    center: int | None = None,
) -> EstimatorOutput:
    """Ideal-target estimate from aligned (T, bins) noisy/clean windows.

    Gains and SNR come from the delayed output frame
    (``T - 1 - lookahead`` by default); taps from the least-squares fit over
    the whole window.  Zero-power noisy bands get gain 0.
    """
    noisy = np.asarray(noisy_frames)
    clean = np.asarray(clean_frames)
    if center is None:
        center = noisy.shape[0] - 1 - df_cfg.lookahead_l
    if not 0 <= center < noisy.shape[0]:
        raise ValueError("center frame outside window")
    np_band = band_power(noisy[center], layout)
    cp_band = band_power(clean[center], layout)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np_band > 0.0, cp_band / np.maximum(np_band, 1e-300), 0.0)
    gains = ErbGains(np.sqrt(ratio))
    coefs = ls_oracle_coefs(noisy, clean, df_cfg)
    noise_center = Spectrum(noisy[center] - clean[center], center)
    snr = local_snr(Spectrum(clean[center], center), noise_center)
    return EstimatorOutput(gains=gains, coefs=coefs, snr=snr)


class NoiseFloorState:
    """Per-band noise floor via a decaying minimum of smoothed band power.

    The floor snaps down to the smoothed power immediately and may only
    rise at ``rise_db_per_s``, so a minimum is forgotten after roughly the
    tracking window (~1.5 s for typical dips).  ``floor_scale``
    compensates the low bias of a minimum statistic.
    """

    def __init__(
        self,
        n_bands: int,
        hop_s: float,
        init_frames: int = 10,
        fast_tc_s: float = 0.1,
        slow_tc_s: float = 0.3,
        rise_db_per_s: float = 4.5,
        floor_scale: float = 2.2,
        eps: float = 1e-12,
    ) -> None:
        self.n_bands = n_bands
        self.init_frames = init_frames
        self.eps = eps
        self.floor_scale = floor_scale
        self._alpha_fast = float(np.exp(-hop_s / fast_tc_s))
        self._alpha_slow = float(np.exp(-hop_s / slow_tc_s))
        self._rise = float(10.0 ** (rise_db_per_s * hop_s / 10.0))
        self.p_fast = np.zeros(n_bands, dtype=np.float64)
        self.p_slow = np.zeros(n_bands, dtype=np.float64)
        self.floor = np.full(n_bands, eps, dtype=np.float64)
        self.frames_seen = 0

    def update(self, band_p: np.ndarray) -> np.ndarray:
        """Advance one frame; returns the per-band a-posteriori SNR."""
        if self.frames_seen < self.init_frames:
            # prime all trackers with the running mean of the first frames
            k = self.frames_seen
            self.p_slow = (self.p_slow * k + band_p) / (k + 1)
            self.p_fast = self.p_slow.copy()
            np.maximum(self.p_slow, self.eps, out=self.floor)
        else:
            self.p_fast *= self._alpha_fast
            self.p_fast += (1.0 - self._alpha_fast) * band_p
            self.p_slow *= self._alpha_slow
            self.p_slow += (1.0 - self._alpha_slow) * band_p
            np.minimum(self.p_slow, self.floor * self._rise, out=self.floor)
            np.maximum(self.floor, self.eps, out=self.floor)
        self.frames_seen += 1
        return self.p_fast / (self.floor_scale * self.floor)


def blind_estimate(
    state: NoiseFloorState,
    noisy: Spectrum,
    layout: ErbLayout,
    df_cfg: DfConfig,
    identity_coefs: DfCoefSet | None = None,
) -> EstimatorOutput:
    """Reference-free estimate: Wiener-like band gains from the tracked
    noise floor; identity taps; frame SNR from the mean band SNR excess.

    Causal by construction: only the frame being estimated updates the
    tracker state.
    """
    gamma = state.update(band_power(noisy.bins, layout))
    gains = ErbGains(np.clip(1.0 - 1.0 / np.maximum(gamma, state.eps), 0.0, 1.0))
    excess = float(np.mean(gamma - 1.0))
    xi = 10.0 * np.log10(max(excess, 1e-12))
    coefs = identity_coefs if identity_coefs is not None else DfCoefSet.identity(df_cfg)
    return EstimatorOutput(gains=gains, coefs=coefs, snr=SnrEstimate(xi))


class FrameEstimator:
    """Streaming interface the engine drives once per hop.

    ``push`` sees every analysis frame as it arrives; ``estimate`` is called
    once the delayed output frame ``t`` exists, with the multi-frame window
    ``[X(t+l) ... X(t-N+1+l)]``.
    """

    kind = "abstract"

    def push(self, noisy: Spectrum, clean: Spectrum | None) -> None:  # pragma: no cover
        raise NotImplementedError

    def estimate(self, window: np.ndarray, t: int) -> EstimatorOutput:  # pragma: no cover
        raise NotImplementedError


class PassthroughEstimator(FrameEstimator):
    """Unit gains and identity taps; turns the pipeline into pure delay."""

    kind = "passthrough"

    def __init__(self, layout: ErbLayout, df_cfg: DfConfig) -> None:
        self._out = EstimatorOutput(
            gains=ErbGains.unit(layout.n_bands),
            coefs=DfCoefSet.identity(df_cfg),
            snr=SnrEstimate(XI_MAX_DB),
        )

    def push(self, noisy: Spectrum, clean: Spectrum | None) -> None:
        pass

    def estimate(self, window: np.ndarray, t: int) -> EstimatorOutput:
        return self._out


class BlindEstimator(FrameEstimator):
    """Self-contained noise-floor estimator for live processing."""

    kind = "blind"

    def __init__(self, layout: ErbLayout, df_cfg: DfConfig, **tracker_kwargs) -> None:
        self.layout = layout
        self.df_cfg = df_cfg
        hop_s = tracker_kwargs.pop("hop_s", 0.01)
        self.state = NoiseFloorState(layout.n_bands, hop_s, **tracker_kwargs)
        self._identity = DfCoefSet.identity(df_cfg)

    def push(self, noisy: Spectrum, clean: Spectrum | None) -> None:
        pass

    def estimate(self, window: np.ndarray, t: int) -> EstimatorOutput:
        frame_t = Spectrum(window[self.df_cfg.lookahead_l], t)
        return blind_estimate(
            self.state, frame_t, self.layout, self.df_cfg, identity_coefs=self._identity
        )


class OracleEstimator(FrameEstimator):
    """Clean-reference estimator: keeps a rolling history of aligned
    (noisy, clean) frames and refits the least-squares taps every frame.
    Identity taps are used until the history is long enough to solve."""

    kind = "oracle"

    def __init__(self, layout: ErbLayout, df_cfg: DfConfig, history_frames: int = 24) -> None:
        if history_frames < 4 * df_cfg.order_n:
            raise ValueError("history must hold at least 4 * order_n frames")
        self.layout = layout
        self.df_cfg = df_cfg
        self.history_frames = history_frames
        self._noisy: deque[np.ndarray] = deque(maxlen=history_frames)
        self._clean: deque[np.ndarray] = deque(maxlen=history_frames)
        self._first_index = 0

    def push(self, noisy: Spectrum, clean: Spectrum | None) -> None:
        if clean is None:
            raise ValueError("oracle estimator requires the aligned clean frame")
        if len(self._noisy) == self._noisy.maxlen:
            self._first_index += 1
        elif not self._noisy:
            self._first_index = noisy.frame_index
        self._noisy.append(noisy.bins.copy())
        self._clean.append(clean.bins.copy())

    def estimate(self, window: np.ndarray, t: int) -> EstimatorOutput:
        l = self.df_cfg.lookahead_l
        pos = t - self._first_index
        if not 0 <= pos < len(self._noisy):
            raise ValueError(f"frame {t} not in oracle history")
        noisy = np.stack(self._noisy)
        clean = np.stack(self._clean)
        if noisy.shape[0] >= 4 * self.df_cfg.order_n:
            return oracle_estimate(noisy, clean, self.layout, self.df_cfg, center=pos)
        np_band = band_power(noisy[pos], self.layout)
        cp_band = band_power(clean[pos], self.layout)
        ratio = np.where(np_band > 0.0, cp_band / np.maximum(np_band, 1e-300), 0.0)
        noise = Spectrum(noisy[pos] - clean[pos], t)
        return EstimatorOutput(
            gains=ErbGains(np.sqrt(ratio)),
            coefs=DfCoefSet.identity(self.df_cfg),
            snr=local_snr(Spectrum(clean[pos], t), noise),
        )


ESTIMATOR_KINDS = ("passthrough", "blind", "oracle")


def make_estimator(kind: str, layout: ErbLayout, df_cfg: DfConfig) -> FrameEstimator:
    if kind == "passthrough":
        return PassthroughEstimator(layout, df_cfg)
    if kind == "blind":
        return BlindEstimator(layout, df_cfg)
    if kind == "oracle":
        return OracleEstimator(layout, df_cfg)
    raise ValueError(f"unknown estimator kind {kind!r}")
