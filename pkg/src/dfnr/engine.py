"""The streaming frame loop.

Per input hop: analyze -> multi-frame buffer -> estimate -> band gains ->
low-band multi-frame filter -> stitch -> gate -> attenuation limit ->
synthesize -> output hop.

Emission is aligned to the advertised algorithmic latency: the first
``latency_samples / hop_len`` calls return None (their content is provably
silence), after which exactly one output hop is produced per input hop and
the output stream equals the processed input delayed by ``latency_samples``.
A one-hop output FIFO provides the final alignment hop on top of the
spectral look-ahead.

Configuration updates are applied atomically at hop boundaries: the control
side publishes a whole config snapshot, the audio side picks it up before
the next frame.  Telemetry goes to a bounded deque that drops oldest on
overflow, so a slow consumer can never stall audio.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import erb_bank, stage_control
from .deep_filter import DfConfig, MultiFrameBuffer, apply_df
from .erb_bank import ErbGains, ErbLayout, design_layout
from .estimators import ESTIMATOR_KINDS, FrameEstimator, make_estimator
from .spectral_core import (
    Spectrum,
    StftAnalyzer,
    StftConfig,
    StftSynthesizer,
    latency_samples,
)
from .stage_control import AttenLimit, GateThresholds, StageDecision

log = logging.getLogger(__name__)

RMS_FLOOR_DB = -120.0


@dataclass(frozen=True)
class StageOverrides:
    """Manual stage switches, mirroring the demo panel toggles."""

    erb_enabled: bool = True
    df_enabled: bool = True


@dataclass(frozen=True)
class EngineConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    df: DfConfig = field(default_factory=DfConfig)
    thresholds: GateThresholds = field(default_factory=GateThresholds)
    atten: AttenLimit = field(default_factory=AttenLimit)
    estimator_kind: str = "blind"
    stage_overrides: StageOverrides = field(default_factory=StageOverrides)
    n_erb_bands: int = 32
    erb_min_width: int = 2

    def __post_init__(self) -> None:
        if self.estimator_kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.estimator_kind!r}")
        if self.df.lookahead_l != self.stft.lookahead_frames:
            raise ValueError("filter look-ahead must match the configured frame look-ahead")
        if self.n_erb_bands * self.erb_min_width > self.stft.bin_count:
            raise ValueError("band layout does not fit the spectrum")

    def structural_key(self) -> tuple:
        """Fields that cannot change while a stream is running."""
        return (self.stft, self.df, self.n_erb_bands, self.erb_min_width)


@dataclass
class MeterFrame:
    """One telemetry record per output frame."""

    frame_index: int
    xi_db: float
    decision: StageDecision
    mean_gain: float
    df_delta_db: float
    in_rms_db: float
    out_rms_db: float

    def as_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "xi_db": self.xi_db,
            "decision": self.decision.value,
            "mean_gain": self.mean_gain,
            "df_delta_db": self.df_delta_db,
            "in_rms_db": self.in_rms_db,
            "out_rms_db": self.out_rms_db,
        }


@dataclass
class RtfReport:
    processed_audio_s: float
    wall_time_s: float
    rtf: float
    stage_seconds: dict[str, float]


def _rms_db(x: np.ndarray) -> float:
    p = float(np.mean(np.square(x, dtype=np.float64)))
    if p <= 0.0:
        return RMS_FLOOR_DB
    return max(10.0 * math.log10(p), RMS_FLOOR_DB)


class Engine:
    """One audio stream's processing state.

    Single audio writer; `update_config` / `snapshot_config` may be called
    from another thread.  Telemetry is drained with `take_meters`.
    """

    def __init__(self, cfg: EngineConfig, meter_capacity: int = 1024) -> None:
        self._cfg = cfg
        self._lock = threading.Lock()
        self._pending_cfg: EngineConfig | None = None
        self.layout: ErbLayout = design_layout(cfg.stft, cfg.n_erb_bands, cfg.erb_min_width)
        self._analyzer = StftAnalyzer(cfg.stft)
        self._clean_analyzer = StftAnalyzer(cfg.stft)
        self._synth = StftSynthesizer(cfg.stft)
        self._mf = MultiFrameBuffer(cfg.df, cfg.stft.bin_count)
        self._estimator: FrameEstimator = make_estimator(cfg.estimator_kind, self.layout, cfg.df)
        self._unit_gains = ErbGains.unit(self.layout.n_bands)
        self._zero_hop = np.zeros(cfg.stft.hop_len, dtype=np.float32)
        self._pending_hop: np.ndarray | None = None
        self._hops_in = 0
        self._warmup_hops = latency_samples(cfg.stft) // cfg.stft.hop_len
        self.meters: deque[MeterFrame] = deque(maxlen=meter_capacity)
        self.numeric_error_count = 0
        self._stage_ns: dict[str, int] = {
            "analyze": 0,
            "estimate": 0,
            "stages": 0,
            "synthesize": 0,
        }

    # -- control plane -------------------------------------------------

    def update_config(self, cfg: EngineConfig) -> None:
        """Stage a validated config; it takes effect at the next hop,
        as a whole.  Structural changes require a new engine."""
        if not isinstance(cfg, EngineConfig):
            raise ValueError("expected an EngineConfig")
        if cfg.structural_key() != self._cfg.structural_key():
            raise ValueError("frame geometry and filter shape cannot change mid-stream")
        if (
            cfg.estimator_kind == "oracle"
            and self._cfg.estimator_kind != "oracle"
            and self._hops_in > 0
        ):
            raise ValueError("cannot switch to the oracle estimator mid-stream")
        with self._lock:
            self._pending_cfg = cfg

    def snapshot_config(self) -> EngineConfig:
        """The config the next frame will run under."""
        with self._lock:
            return self._pending_cfg if self._pending_cfg is not None else self._cfg

    def take_meters(self) -> list[MeterFrame]:
        out = []
        while self.meters:
            out.append(self.meters.popleft())
        return out

    @property
    def config(self) -> EngineConfig:
        return self._cfg

    @property
    def hops_processed(self) -> int:
        return self._hops_in

    @property
    def warmup_hops(self) -> int:
        return self._warmup_hops

    # -- audio plane ----------------------------------------------------

    def process_hop(self, hop: np.ndarray, clean_hop: np.ndarray | None = None):
        """Process one input hop; returns one output hop once the pipeline
        is past warm-up, None before that.

        Non-finite input samples zero the affected hop and increment
        `numeric_error_count`; the stream continues.
        """
        with self._lock:
            if self._pending_cfg is not None:
                self._apply_config(self._pending_cfg)
                self._pending_cfg = None
        cfg = self._cfg

        hop = np.asarray(hop, dtype=np.float32)
        if hop.shape != (cfg.stft.hop_len,):
            raise ValueError(f"expected hop of {cfg.stft.hop_len} samples")
        if not np.isfinite(hop).all():
            self.numeric_error_count += 1
            log.warning("non-finite samples in hop %d; frame zeroed", self._hops_in)
            hop = self._zero_hop

        t0 = time.perf_counter_ns()
        spec = self._analyzer.analyze(hop)
        clean_spec = None
        if self._estimator.kind == "oracle":
            if clean_hop is None:
                raise ValueError("oracle estimator requires an aligned clean hop")
            clean_spec = self._clean_analyzer.analyze(np.asarray(clean_hop, dtype=np.float32))
        self._estimator.push(spec, clean_spec)
        t = self._mf.push(spec)
        t1 = time.perf_counter_ns()
        self._stage_ns["analyze"] += t1 - t0

        out = None
        if t is not None:
            window = self._mf.window(t)
            est = self._estimator.estimate(window, t)
            t2 = time.perf_counter_ns()
            self._stage_ns["estimate"] += t2 - t1

            final, decision, used = self._run_stages(cfg, window, est, t)
            t3 = time.perf_counter_ns()
            self._stage_ns["stages"] += t3 - t2

            out = self._synth.synthesize(final)
            self._stage_ns["synthesize"] += time.perf_counter_ns() - t3
            self._meter(t, est, decision, used, hop, out)

        ret = self._pending_hop
        self._pending_hop = out
        self._hops_in += 1
        if self._hops_in <= self._warmup_hops:
            return None
        return ret

    def flush(self) -> list[np.ndarray]:
        """Feed silence for one full latency and collect the tail hops."""
        need_clean = self._estimator.kind == "oracle"
        tail = []
        for _ in range(self._warmup_hops):
            out = self.process_hop(self._zero_hop, self._zero_hop if need_clean else None)
            if out is not None:
                tail.append(out)
        return tail

    def measure_rtf(self, duration_s: float, seed: int = 0) -> RtfReport:
        """Process seeded noise of the given duration single-threaded and
        report wall time against audio time.  Requires an idle engine."""
        if self._hops_in != 0:
            raise ValueError("measure_rtf requires an idle engine")
        cfg = self._cfg.stft
        n_hops = int(round(duration_s * cfg.sample_rate_hz / cfg.hop_len))
        rng = np.random.default_rng(seed)
        hops = rng.standard_normal((n_hops, cfg.hop_len)).astype(np.float32) * 0.1
        clean = self._zero_hop if self._estimator.kind == "oracle" else None
        start = time.perf_counter()
        for i in range(n_hops):
            self.process_hop(hops[i], clean)
        wall = time.perf_counter() - start
        audio = n_hops * cfg.hop_len / cfg.sample_rate_hz
        return RtfReport(
            processed_audio_s=audio,
            wall_time_s=wall,
            rtf=wall / audio,
            stage_seconds={k: v * 1e-9 for k, v in self._stage_ns.items()},
        )

    # -- internals -------------------------------------------------------

    def _apply_config(self, cfg: EngineConfig) -> None:
        if cfg.estimator_kind != self._cfg.estimator_kind:
            self._estimator = make_estimator(cfg.estimator_kind, self.layout, cfg.df)
        self._cfg = cfg

    def _run_stages(self, cfg: EngineConfig, window: np.ndarray, est, t: int):
        noisy_t = Spectrum(window[cfg.df.lookahead_l], t)

        gains = est.gains if cfg.stage_overrides.erb_enabled else self._unit_gains
        erb_out = erb_bank.apply_gains(noisy_t, gains, self.layout)

        if self._estimator.kind == "passthrough":
            decision = StageDecision.FULL
        else:
            decision = stage_control.decide(est.snr, cfg.thresholds)

        df_active = decision is StageDecision.FULL and cfg.stage_overrides.df_enabled
        df_delta_db = 0.0
        if df_active:
            df_low = apply_df(self._mf, est.coefs, t)
            stitched = Spectrum(erb_out.bins.copy(), t)
            stitched.bins[: df_low.shape[0]] = df_low
            e_df = float(np.sum(np.abs(df_low.astype(np.complex128)) ** 2))
            e_erb = float(np.sum(np.abs(erb_out.bins[: df_low.shape[0]].astype(np.complex128)) ** 2))
            df_delta_db = 10.0 * math.log10((e_df + 1e-12) / (e_erb + 1e-12))
        else:
            stitched = erb_out

        selected = stage_control.apply_decision(decision, noisy_t, erb_out, stitched)
        final = stage_control.limit_attenuation(noisy_t, selected, cfg.atten)
        return final, decision, (gains, df_delta_db)

    def _meter(self, t, est, decision, used, in_hop, out_hop) -> None:
        gains, df_delta_db = used
        self.meters.append(
            MeterFrame(
                frame_index=t,
                xi_db=est.snr.xi_db,
                decision=decision,
                mean_gain=float(np.mean(gains.g)),
                df_delta_db=df_delta_db,
                in_rms_db=_rms_db(in_hop),
                out_rms_db=_rms_db(out_hop),
            )
        )


def run_stream(
    engine: Engine, samples: np.ndarray, clean: np.ndarray | None = None
) -> np.ndarray:
    """Push a whole signal through an engine and return the processed
    signal with the latency flushed and the length trimmed to the input.

    Convenience for offline (file) use; hop padding is stripped again.
    """
    hop = engine.config.stft.hop_len
    x = np.asarray(samples, dtype=np.float32)
    n = x.shape[0]
    n_hops = -(-n // hop) if n else 0
    padded = np.zeros(n_hops * hop, dtype=np.float32)
    padded[:n] = x
    if clean is not None:
        c = np.asarray(clean, dtype=np.float32)
        cpad = np.zeros(n_hops * hop, dtype=np.float32)
        cpad[: min(n, c.shape[0])] = c[:n]
    out_hops = []
    for i in range(n_hops):
        chunk = padded[i * hop : (i + 1) * hop]
        cchunk = cpad[i * hop : (i + 1) * hop] if clean is not None else None
        out = engine.process_hop(chunk, cchunk)
        if out is not None:
            out_hops.append(out)
    out_hops.extend(engine.flush())
    if not out_hops:
        return np.zeros(n, dtype=np.float32)
    y = np.concatenate(out_hops)
    return y[:n]
