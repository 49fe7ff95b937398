import numpy as np
import pytest

from dfnr.spectral_core import (
    NumericError,
    Spectrum,
    StftAnalyzer,
    StftConfig,
    StftSynthesizer,
    latency_samples,
    periodic_hann,
)

CFG = StftConfig()
HOP = CFG.hop_len


def _dft_oracle(frame: np.ndarray) -> np.ndarray:
    """Explicit windowed DFT in float64, independent of np.fft."""
    n = frame.shape[0]
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * t / n)
    return basis @ frame.astype(np.float64)


def _inverse_dft_oracle(bins: np.ndarray, n: int) -> np.ndarray:
    """Explicit inverse DFT of a half spectrum, independent of np.fft."""
    full = np.zeros(n, dtype=np.complex128)
    full[: n // 2 + 1] = bins
    full[n // 2 + 1 :] = np.conj(bins[1 : n // 2][::-1])
    t = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    basis = np.exp(2j * np.pi * t * k / n)
    return (basis @ full).real / n


class TestConfig:
    def test_defaults(self):
        assert CFG.bin_count == 481
        assert CFG.window_len == CFG.fft_len == 960
        assert CFG.hop_len == 480

    def test_latency_default_is_40ms(self):
        assert latency_samples(CFG) == 1920
        assert latency_samples(CFG) / CFG.sample_rate_hz == pytest.approx(0.040)

    def test_latency_lookahead_variants(self):
        assert latency_samples(StftConfig(lookahead_frames=0)) == 960
        assert latency_samples(StftConfig(lookahead_frames=1)) == 1440

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(window_len=960, fft_len=1024),
            dict(hop_len=320),
            dict(hop_len=0),
            dict(lookahead_frames=-1),
            dict(sample_rate_hz=0),
        ],
    )
    def test_invalid_configs_raise(self, kwargs):
        with pytest.raises(ValueError):
            StftConfig(**kwargs)

    def test_cola_ripple_below_1e10(self):
        an = StftAnalyzer(CFG)
        sy = StftSynthesizer(CFG)
        product = an.window * sy.window
        ola = product[:HOP] + product[HOP:]
        assert np.max(np.abs(ola - 1.0)) < 1e-10


class TestAnalyze:
    def test_zero_stream_gives_zero_spectra(self):
        an = StftAnalyzer(CFG)
        for _ in range(5):
            spec = an.analyze(np.zeros(HOP, dtype=np.float32))
            assert np.all(spec.bins == 0)

    def test_bin_count_matches_config(self):
        an = StftAnalyzer(CFG)
        spec = an.analyze(np.zeros(HOP, dtype=np.float32))
        assert spec.bins.shape == (481,)

    def test_1khz_sine_peaks_at_bin_20(self):
        # bin spacing 48000/960 = 50 Hz, so 1 kHz sits exactly on bin 20
        t = np.arange(8 * HOP) / CFG.sample_rate_hz
        x = np.sin(2 * np.pi * 1000.0 * t).astype(np.float32)
        an = StftAnalyzer(CFG)
        for k in range(8):
            spec = an.analyze(x[k * HOP : (k + 1) * HOP])
        mags = np.abs(spec.bins)
        assert int(np.argmax(mags)) == 20

        # direct DFT oracle on the same window contents
        window = np.concatenate([x[6 * HOP : 8 * HOP]]) * an.window
        oracle = _dft_oracle(window)
        assert int(np.argmax(np.abs(oracle))) == 20
        assert np.max(np.abs(spec.bins - oracle)) < 1e-3 * np.max(np.abs(oracle))

    def test_frame_indices_count_up(self):
        an = StftAnalyzer(CFG)
        indices = [an.analyze(np.zeros(HOP, np.float32)).frame_index for _ in range(4)]
        assert indices == [0, 1, 2, 3]

    def test_wrong_hop_length_rejected(self):
        an = StftAnalyzer(CFG)
        with pytest.raises(ValueError):
            an.analyze(np.zeros(HOP + 1, dtype=np.float32))

    def test_linearity(self, rng):
        x = rng.standard_normal(4 * HOP).astype(np.float32)
        y = rng.standard_normal(4 * HOP).astype(np.float32)
        a, b = 0.7, -1.3
        an_x, an_y, an_mix = StftAnalyzer(CFG), StftAnalyzer(CFG), StftAnalyzer(CFG)
        for k in range(4):
            sx = an_x.analyze(x[k * HOP : (k + 1) * HOP])
            sy_ = an_y.analyze(y[k * HOP : (k + 1) * HOP])
            sm = an_mix.analyze((a * x + b * y)[k * HOP : (k + 1) * HOP])
        combined = a * sx.bins + b * sy_.bins
        scale = np.max(np.abs(combined)) + 1e-12
        assert np.max(np.abs(sm.bins - combined)) < 2e-6 * scale

    def test_real_input_has_real_endpoints(self, rng):
        an = StftAnalyzer(CFG)
        spec = an.analyze(rng.standard_normal(HOP).astype(np.float32))
        assert spec.bins[0].imag == 0.0
        assert spec.bins[-1].imag == 0.0

    def test_parseval_consistency(self, rng):
        an = StftAnalyzer(CFG)
        an.analyze(rng.standard_normal(HOP).astype(np.float32))
        spec = an.analyze(rng.standard_normal(HOP).astype(np.float32))
        windowed = an._ring.astype(np.float64) * an.window
        e_time = float(np.sum(windowed**2))
        b = spec.bins.astype(np.complex128)
        e_freq = (np.abs(b[0]) ** 2 + 2.0 * np.sum(np.abs(b[1:-1]) ** 2) + np.abs(b[-1]) ** 2) / CFG.fft_len
        assert abs(e_time - e_freq) < 1e-6 * e_time


class TestSynthesize:
    def test_zero_spectrum_stream_gives_silence(self):
        sy = StftSynthesizer(CFG)
        for _ in range(5):
            out = sy.synthesize(Spectrum(np.zeros(481, dtype=np.complex64)))
            assert np.all(out == 0)

    def test_round_trip_white_noise_below_minus_80db(self, rng):
        x = (0.5 * rng.standard_normal(100 * HOP)).astype(np.float32)
        an, sy = StftAnalyzer(CFG), StftSynthesizer(CFG)
        hops = [sy.synthesize(an.analyze(x[k * HOP : (k + 1) * HOP])) for k in range(100)]
        # the first window_len/hop - 1 = 1 output hop is warm-up
        out = np.concatenate(hops[1:])
        ref = x[: out.shape[0]]
        err = np.sqrt(np.mean((out - ref) ** 2)) / np.sqrt(np.mean(ref**2))
        assert 20 * np.log10(err) <= -80.0

    def test_single_frame_matches_inverse_dft_oracle(self, rng):
        # all-ones spectrum (an impulse at sample zero) plus a random
        # Hermitian-consistent spectrum, both checked against an explicit
        # inverse-DFT oracle
        for bins in (
            np.ones(481, dtype=np.complex64),
            (rng.standard_normal(481) + 1j * rng.standard_normal(481)).astype(np.complex64),
        ):
            bins[0] = bins[0].real
            bins[-1] = bins[-1].real
            sy = StftSynthesizer(CFG)
            expected = _inverse_dft_oracle(bins, CFG.fft_len) * sy.window
            first = sy.synthesize(Spectrum(bins))
            second = sy.synthesize(Spectrum(np.zeros(481, dtype=np.complex64)))
            got = np.concatenate([first, second])
            assert np.max(np.abs(got - expected)) < 1e-5 * (np.max(np.abs(expected)) + 1.0)

    def test_nonfinite_bins_raise_numeric_error(self):
        sy = StftSynthesizer(CFG)
        bins = np.zeros(481, dtype=np.complex64)
        bins[3] = np.nan
        with pytest.raises(NumericError):
            sy.synthesize(Spectrum(bins))

    def test_wrong_bin_count_rejected(self):
        sy = StftSynthesizer(CFG)
        with pytest.raises(ValueError):
            sy.synthesize(Spectrum(np.zeros(480, dtype=np.complex64)))


def test_periodic_hann_overlap_adds_to_one():
    w = periodic_hann(960)
    assert np.allclose(w[:480] + w[480:], 1.0, atol=1e-12)
