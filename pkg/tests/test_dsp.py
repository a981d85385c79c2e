import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmsonic import dsp


def naive_dft(x, n_fft):
    """O(N^2) reference DFT, one-sided."""
    x = np.concatenate([x, np.zeros(n_fft - len(x))])
    out = []
    for b in range(n_fft // 2 + 1):
        acc = 0.0 + 0.0j
        for n in range(n_fft):
            acc += x[n] * np.exp(-2j * np.pi * b * n / n_fft)
        out.append(acc)
    return np.array(out)


def naive_dct_ii(v):
    """Direct summation of the orthonormal DCT-II kernel."""
    big_l = len(v)
    out = np.zeros(big_l)
    for p in range(big_l):
        s = np.sqrt(1.0 / big_l) if p == 0 else np.sqrt(2.0 / big_l)
        acc = 0.0
        for l in range(1, big_l + 1):
            acc += v[l - 1] * np.cos(p * (l - 0.5) * np.pi / big_l)
        out[p] = s * acc
    return out


class TestFftReal:
    def test_impulse_is_flat(self):
        spec = dsp.fft_real(np.array([1.0, 0, 0, 0]), 4)
        np.testing.assert_allclose(spec.bins, [1, 1, 1], atol=1e-12)

    def test_constant_is_dc_only(self):
        spec = dsp.fft_real(np.ones(4), 4)
        np.testing.assert_allclose(spec.bins, [4, 0, 0], atol=1e-12)

    def test_cosine_lands_in_bin_one(self):
        x = np.cos(2 * np.pi * np.arange(8) / 8)
        spec = dsp.fft_real(x, 8)
        np.testing.assert_allclose(spec.bins, naive_dft(x, 8), atol=1e-9)
        power = np.abs(spec.bins) ** 2
        assert np.argmax(power) == 1
        assert power[[0, 2, 3, 4]] == pytest.approx(0.0, abs=1e-18)

    def test_matches_naive_dft_on_random_input(self, rng):
        for n_fft in (8, 32, 128):
            x = rng.normal(0, 1, n_fft - 3)
            np.testing.assert_allclose(
                dsp.fft_real(x, n_fft).bins, naive_dft(x, n_fft), atol=1e-9
            )

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            dsp.fft_real(np.zeros(5), 6)

    def test_oversized_frame_rejected(self):
        with pytest.raises(ValueError):
            dsp.fft_real(np.zeros(9), 8)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10**9))
    def test_parseval(self, log_n, seed):
        n_fft = 2**log_n
        x = np.random.default_rng(seed).normal(0, 1, n_fft)
        bins = dsp.fft_real(x, n_fft).bins
        # rebuild the two-sided power from the one-sided bins
        power = np.abs(bins) ** 2
        total = power[0] + power[-1] + 2 * power[1:-1].sum()
        assert total == pytest.approx(n_fft * np.sum(x**2), rel=1e-9)


class TestDct:
    def test_constant_input_dc_only(self):
        np.testing.assert_allclose(dsp.dct_ii(np.ones(4)), [2, 0, 0, 0], atol=1e-12)

    def test_impulse_matches_naive_kernel(self):
        v = np.array([1.0, 0, 0, 0])
        np.testing.assert_allclose(dsp.dct_ii(v), naive_dct_ii(v), atol=1e-12)

    def test_random_matches_naive_kernel(self, rng):
        for n in (1, 2, 7, 40):
            v = rng.normal(0, 1, n)
            np.testing.assert_allclose(dsp.dct_ii(v), naive_dct_ii(v), atol=1e-9)

    def test_dct_iii_inverts(self, rng):
        v = rng.normal(0, 1, 33)
        np.testing.assert_allclose(dsp.dct_iii(dsp.dct_ii(v)), v, atol=1e-9)

    def test_energy_preserved(self, rng):
        v = rng.normal(0, 1, 64)
        assert np.sum(dsp.dct_ii(v) ** 2) == pytest.approx(np.sum(v**2), rel=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dsp.dct_ii(np.array([]))


class TestPowerSpectrum:
    def test_squared_magnitude(self):
        spec = dsp.ComplexSpectrum(np.array([3 + 4j]), n_fft=2, sample_rate_hz=1)
        np.testing.assert_allclose(dsp.power_spectrum(spec), [25.0])

    def test_bin_frequencies(self):
        spec = dsp.fft_real(np.ones(8), 8, sample_rate_hz=16000)
        np.testing.assert_allclose(spec.bin_freqs_hz(), [0, 2000, 4000, 6000, 8000])

    def test_zero_bins(self):
        spec = dsp.ComplexSpectrum(np.zeros(5, dtype=complex), 8, 1)
        np.testing.assert_array_equal(dsp.power_spectrum(spec), np.zeros(5))


class TestScales:
    def test_mel_at_zero(self):
        assert dsp.hz_to_mel(0.0) == 0.0

    def test_mel_at_700(self):
        assert dsp.hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2), abs=1e-9)
        assert dsp.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)

    def test_mel_at_8000(self):
        assert dsp.hz_to_mel(8000.0) == pytest.approx(2840.0, abs=0.05)

    def test_mel_negative_rejected(self):
        with pytest.raises(ValueError):
            dsp.hz_to_mel(-1.0)

    def test_bark_paper_zero(self):
        assert dsp.hz_to_bark(0.0, "paper") == 0.0

    def test_bark_paper_1000(self):
        # 26.81 - 0.53 + 4.5e-6, straight from the cubic
        assert dsp.hz_to_bark(1000.0, "paper") == pytest.approx(26.2800045, abs=1e-9)

    def test_bark_traunmueller_1000(self):
        expected = 26.81 * 1000 / 2960 - 0.53
        assert dsp.hz_to_bark(1000.0, "traunmueller") == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(8.527, abs=5e-4)

    def test_bark_traunmueller_clamped_at_zero(self):
        assert dsp.hz_to_bark(10.0, "traunmueller") == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**9))
    def test_scales_monotone(self, seed):
        grid = np.sort(np.random.default_rng(seed).uniform(0, 8000, 50))
        grid = np.unique(grid)
        assert np.all(np.diff(dsp.hz_to_mel(grid)) > 0)
        assert np.all(np.diff(dsp.hz_to_bark(grid, "paper")) > 0)
        # the traunmueller variant clamps to 0 below ~39.5 Hz, so strict
        # monotonicity only holds above the clamp region
        above = grid[grid > 40.0]
        if above.size > 1:
            assert np.all(np.diff(dsp.hz_to_bark(above, "traunmueller")) > 0)

    def test_bark_inverse_roundtrip(self):
        f = np.array([50.0, 440.0, 1000.0, 7600.0])
        for variant in ("paper", "traunmueller"):
            z = dsp.hz_to_bark(f, variant)
            np.testing.assert_allclose(dsp.bark_to_hz(z, variant), f, rtol=1e-8)

    def test_erb_rate_inverse_roundtrip(self):
        f = np.array([20.0, 1000.0, 7600.0])
        np.testing.assert_allclose(dsp.erb_rate_to_hz(dsp.hz_to_erb_rate(f)), f, rtol=1e-10)


class TestTriangularFilterbank:
    def test_linear_two_filters_break_points(self):
        # break points at 0, 4/3, 8/3, 4 Hz over 9 bins of a 16-point FFT at 8 Hz
        fb = dsp.triangular_filterbank("linear", 2, 16, 8, 0.0, 4.0)
        np.testing.assert_allclose(fb.centers_hz, [4 / 3, 8 / 3])
        bin_width = 8 / 16
        assert np.argmax(fb.weights[0]) == round((4 / 3) / bin_width)
        assert np.argmax(fb.weights[1]) == round((8 / 3) / bin_width)

    def test_peak_weight_is_one(self):
        fb = dsp.triangular_filterbank("mel", 40, 512, 16000, 20.0, 7600.0)
        np.testing.assert_array_equal(fb.weights.max(axis=1), np.ones(40))

    def test_shape(self):
        fb = dsp.triangular_filterbank("mel", 40, 512, 16000, 0.0, 8000.0)
        assert fb.weights.shape == (40, 257)

    def test_rows_unimodal_with_peak_nearest_center(self):
        for scale in ("mel", "bark_paper", "bark_traunmueller", "linear"):
            fb = dsp.triangular_filterbank(scale, 30, 512, 16000, 20.0, 7600.0)
            bin_width = 16000 / 512
            for i in range(fb.n_filters):
                row = fb.weights[i]
                peak = np.argmax(row)
                assert peak == round(fb.centers_hz[i] / bin_width)
                rising, falling = row[: peak + 1], row[peak:]
                nz = rising[rising > 0]
                assert np.all(np.diff(nz) >= 0) if nz.size else True
                nz = falling[falling > 0]
                assert np.all(np.diff(nz) <= 0) if nz.size else True

    def test_centers_strictly_increasing(self):
        fb = dsp.triangular_filterbank("bark_paper", 40, 512, 16000, 20.0, 7600.0)
        assert np.all(np.diff(fb.centers_hz) > 0)

    def test_beyond_nyquist_rejected(self):
        with pytest.raises(ValueError):
            dsp.triangular_filterbank("mel", 10, 512, 16000, 0.0, 9000.0)


class TestGammatoneFilterbank:
    def test_row_peaks_are_one(self):
        fb = dsp.gammatone_filterbank(26, 512, 16000, 20.0, 7600.0)
        np.testing.assert_allclose(fb.weights.max(axis=1), np.ones(26))

    def test_erb_spacing_constant(self):
        fb = dsp.gammatone_filterbank(26, 512, 16000, 20.0, 7600.0)
        rates = dsp.hz_to_erb_rate(fb.centers_hz)
        steps = np.diff(rates)
        assert np.max(np.abs(steps - steps[0])) < 1e-9

    def test_filter_count(self):
        fb = dsp.gammatone_filterbank(26, 512, 16000, 20.0, 7600.0)
        assert fb.weights.shape[0] == 26
