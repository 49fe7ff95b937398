import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dfnr.deep_filter import DfConfig, MultiFrameBuffer
from dfnr.erb_bank import design_layout
from dfnr.estimators import (
    XI_MAX_DB,
    XI_MIN_DB,
    BlindEstimator,
    NoiseFloorState,
    OracleEstimator,
    PassthroughEstimator,
    SnrEstimate,
    local_snr,
    make_estimator,
    oracle_estimate,
)
from dfnr.spectral_core import Spectrum, StftAnalyzer, StftConfig

CFG = StftConfig()
DF = DfConfig()
LAYOUT = design_layout(CFG)
FS = CFG.sample_rate_hz
HOP = CFG.hop_len


def _spec(bins, index=0):
    return Spectrum(np.asarray(bins, dtype=np.complex64), index)


def _run_blind(x, estimator=None):
    an = StftAnalyzer(CFG)
    mf = MultiFrameBuffer(DF, CFG.bin_count)
    est = estimator or BlindEstimator(LAYOUT, DF)
    gains, xis = [], []
    for i in range(len(x) // HOP):
        s = an.analyze(x[i * HOP : (i + 1) * HOP])
        est.push(s, None)
        t = mf.push(s)
        if t is not None:
            out = est.estimate(mf.window(t), t)
            gains.append(out.gains.g.copy())
            xis.append(out.snr.xi_db)
    return np.array(gains), np.array(xis)


class TestSnrEstimate:
    def test_clamped_on_construction(self):
        assert SnrEstimate(100.0).xi_db == XI_MAX_DB
        assert SnrEstimate(-100.0).xi_db == XI_MIN_DB
        assert SnrEstimate(3.25).xi_db == 3.25

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            SnrEstimate(float("nan"))


class TestLocalSnr:
    def test_equal_energy_is_zero_db(self, rng):
        b = (rng.standard_normal(481) + 1j * rng.standard_normal(481)).astype(np.complex64)
        assert local_snr(_spec(b), _spec(b)).xi_db == pytest.approx(0.0, abs=1e-6)

    def test_zero_noise_hits_upper_clamp(self, rng):
        b = (rng.standard_normal(481)).astype(np.complex64)
        assert local_snr(_spec(b), _spec(np.zeros(481))).xi_db == XI_MAX_DB

    def test_ten_times_power_is_10db(self, rng):
        b = (rng.standard_normal(481) + 1j * rng.standard_normal(481)).astype(np.complex64)
        assert local_snr(_spec(b * np.sqrt(10.0)), _spec(b)).xi_db == pytest.approx(10.0, abs=1e-5)

    def test_both_zero_returns_lower_clamp(self):
        z = _spec(np.zeros(481))
        assert local_snr(z, z).xi_db == XI_MIN_DB


class TestOracle:
    def test_clean_equals_noisy(self, rng):
        frames = (rng.standard_normal((24, 481)) + 1j * rng.standard_normal((24, 481))).astype(
            np.complex64
        )
        out = oracle_estimate(frames, frames, LAYOUT, DF)
        assert np.allclose(out.gains.g, 1.0, atol=1e-5)
        assert out.snr.xi_db == XI_MAX_DB
        ident = np.zeros(5)
        ident[DF.lookahead_l] = 1.0
        assert np.max(np.abs(out.coefs.w - ident)) < 1e-3

    def test_zero_clean(self, rng):
        noisy = (rng.standard_normal((24, 481)) + 1j * rng.standard_normal((24, 481))).astype(
            np.complex64
        )
        out = oracle_estimate(noisy, np.zeros_like(noisy), LAYOUT, DF)
        assert np.all(out.gains.g == 0.0)
        assert out.snr.xi_db == XI_MIN_DB

    def test_minus_6db_band_gain_near_sqrt_point2(self, rng):
        # one band at -6 dB SNR: expected gain sqrt(p_s / (p_s + p_z))
        # with p_s/p_z = 10^-0.6, i.e. sqrt(0.2007) ~ 0.448
        band = 20
        lo, hi = LAYOUT.band_edges[band], LAYOUT.band_edges[band + 1]
        t_frames = 140
        clean = np.zeros((t_frames, 481), dtype=np.complex64)
        noisy = np.zeros((t_frames, 481), dtype=np.complex64)
        width = hi - lo
        s = (rng.standard_normal((t_frames, width)) + 1j * rng.standard_normal((t_frames, width))) / np.sqrt(2)
        z = (rng.standard_normal((t_frames, width)) + 1j * rng.standard_normal((t_frames, width))) / np.sqrt(2)
        z *= np.sqrt(10.0 ** 0.6)  # noise 6 dB above speech
        clean[:, lo:hi] = s
        noisy[:, lo:hi] = s + z
        gains = []
        win = 20
        for start in range(0, t_frames - win):
            out = oracle_estimate(noisy[start : start + win], clean[start : start + win], LAYOUT, DF)
            gains.append(out.gains.g[band])
        mean_gain = float(np.mean(gains))
        expected = np.sqrt(1.0 / (1.0 + 10.0 ** 0.6))
        assert mean_gain == pytest.approx(expected, rel=0.10)

    def test_scale_consistency(self, rng):
        noisy = (rng.standard_normal((24, 481)) + 1j * rng.standard_normal((24, 481))).astype(
            np.complex64
        )
        clean = 0.4 * noisy
        a = oracle_estimate(noisy, clean, LAYOUT, DF)
        b = oracle_estimate(noisy * 8.0, clean * 8.0, LAYOUT, DF)
        assert np.allclose(a.gains.g, b.gains.g, atol=1e-6)
        assert a.snr.xi_db == pytest.approx(b.snr.xi_db, abs=1e-6)


class TestBlind:
    def test_stationary_noise_gains_fall_below_point3_within_3s(self, rng):
        x = (0.1 * rng.standard_normal(5 * FS)).astype(np.float32)
        gains, xis = _run_blind(x)
        after_3s = gains[300:]
        assert after_3s.max() < 0.3
        assert np.mean(xis[300:]) < 0.0

    def test_silence_gives_zero_gains(self):
        gains, xis = _run_blind(np.zeros(2 * FS, dtype=np.float32))
        assert gains.max() == 0.0
        assert np.all(xis == XI_MIN_DB)

    def test_tone_after_noise_keeps_tone_band_open(self, rng):
        t = np.arange(4 * FS) / FS
        tone = 0.3 * np.sin(2 * np.pi * 1000.0 * t)
        tone[:FS] = 0.0  # let the tracker learn the floor first
        x = (0.01 * rng.standard_normal(4 * FS) + tone).astype(np.float32)
        gains, _ = _run_blind(x)
        band = LAYOUT.band_of_bin(20)
        settled = gains[200:350]
        far = [b for b in range(32) if abs(b - band) > 3]
        assert settled[:, band].min() > 0.9
        assert settled[:, far].max() < 0.3

    def test_causal_future_frames_do_not_matter(self, rng):
        base = (0.1 * rng.standard_normal(FS)).astype(np.float32)
        changed = base.copy()
        changed[HOP * 60 :] = 0.5  # alter strictly-future content
        g1, x1 = _run_blind(base)
        g2, x2 = _run_blind(changed)
        # estimate k covers frame t=k; frames < 60 use identical history
        n_safe = 60 - DF.lookahead_l
        assert np.array_equal(g1[:n_safe], g2[:n_safe])
        assert np.array_equal(x1[:n_safe], x2[:n_safe])

    def test_floor_never_exceeds_smoothed_power(self, rng):
        state = NoiseFloorState(32, hop_s=0.01)
        for _ in range(400):
            p = np.abs(rng.standard_normal(32)) + 0.1
            state.update(p)
            assert np.all(state.floor <= state.p_slow + 1e-12)

    @given(st.integers(0, 2**31 - 1))
    def test_outputs_always_in_bounds(self, seed):
        r = np.random.default_rng(seed)
        est = BlindEstimator(LAYOUT, DF)
        window = np.zeros((DF.order_n, 481), dtype=np.complex64)
        for t in range(12):
            scale = r.uniform(0, 10.0)
            window[DF.lookahead_l] = (
                scale * (r.standard_normal(481) + 1j * r.standard_normal(481))
            ).astype(np.complex64)
            out = est.estimate(window, t)
            assert np.all(out.gains.g >= 0.0) and np.all(out.gains.g <= 1.0)
            assert XI_MIN_DB <= out.snr.xi_db <= XI_MAX_DB
            assert np.isfinite(out.coefs.w).all()


class TestStreamingWrappers:
    def test_passthrough_is_unit(self):
        est = PassthroughEstimator(LAYOUT, DF)
        out = est.estimate(np.zeros((5, 481), dtype=np.complex64), 0)
        assert np.all(out.gains.g == 1.0)
        ident = np.zeros(5)
        ident[DF.lookahead_l] = 1.0
        assert np.allclose(out.coefs.w, ident)
        assert out.snr.xi_db == XI_MAX_DB

    def test_oracle_wrapper_needs_clean(self, rng):
        est = OracleEstimator(LAYOUT, DF)
        with pytest.raises(ValueError):
            est.push(_spec(np.zeros(481)), None)

    def test_oracle_wrapper_converges_to_window_solution(self, rng):
        est = OracleEstimator(LAYOUT, DF, history_frames=24)
        an = StftAnalyzer(CFG)
        anc = StftAnalyzer(CFG)
        mf = MultiFrameBuffer(DF, CFG.bin_count)
        x = (0.2 * rng.standard_normal(60 * HOP)).astype(np.float32)
        out = None
        for i in range(60):
            s = an.analyze(x[i * HOP : (i + 1) * HOP])
            c = anc.analyze(x[i * HOP : (i + 1) * HOP])
            est.push(s, c)
            t = mf.push(s)
            if t is not None:
                out = est.estimate(mf.window(t), t)
        assert out is not None
        assert np.allclose(out.gains.g, 1.0, atol=1e-4)
        assert out.snr.xi_db == XI_MAX_DB

    def test_factory(self):
        for kind in ("passthrough", "blind", "oracle"):
            assert make_estimator(kind, LAYOUT, DF).kind == kind
        with pytest.raises(ValueError):
            make_estimator("neural", LAYOUT, DF)
