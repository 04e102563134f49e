import numpy as np
import pytest

from imddsim.errors import ParameterError
from imddsim.sigcore import (
    SampledWaveform,
    design_rrc,
    nmse_db,
    occupied_bandwidth,
    tone_amplitude,
)
from imddsim.txdsp import (
    BandPlan,
    VolterraKernel,
    VolterraStructure,
    apply_volterra,
    band_split,
    fit_volterra,
    linear_preemphasis,
    rrc_upsample,
)

C_PLAN = BandPlan(76e9, 76e9, 75e9, 72e9)


def matched_downsample(wave, sps, rolloff, span):
    """Oracle-side RRC matched filter and T-spaced sampler."""
    taps = design_rrc(rolloff, span, sps)
    from imddsim.sigcore import FilterSpec, apply_filter

    mf = apply_filter(wave, FilterSpec("fir_taps", taps=taps / np.sum(taps**2)))
    return mf.real[::sps]


class TestApplyVolterra:
    def test_identity_kernel(self):
        x = np.random.default_rng(0).normal(size=256)
        y = apply_volterra(x, VolterraKernel.identity())
        assert np.array_equal(x, y)

    def test_memoryless_cubic(self):
        x = np.random.default_rng(1).normal(size=256)
        st = VolterraStructure(memory_1=3, memory_2=0, memory_3=3, max_spread_3=0)
        k = VolterraKernel.identity(st)
        h3 = k.h3.copy()
        h3[k.triples.index((0, 0, 0))] = -0.25
        k = VolterraKernel(k.h1, k.pairs, k.h2, k.triples, h3)
        assert np.allclose(apply_volterra(x, k), x - 0.25 * x**3, atol=1e-14)

    def test_first_order_equals_fir(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=512)
        h1 = rng.normal(size=7)
        st = VolterraStructure(memory_1=7, memory_2=0, memory_3=0)
        k = VolterraKernel(h1, (), np.zeros(0), (), np.zeros(0))
        ref = np.convolve(x, h1, mode="full")[3: 3 + x.size]
        assert np.allclose(apply_volterra(x, k), ref, atol=1e-12)

    def test_kernel_longer_than_input_rejected(self):
        with pytest.raises(ParameterError):
            apply_volterra(np.ones(5), VolterraKernel.identity())


class TestFitVolterra:
    def test_identity_channel(self):
        x = np.random.default_rng(3).normal(size=4096)
        st = VolterraStructure(memory_1=7, memory_2=3, memory_3=3,
                               max_spread_2=1, max_spread_3=1)
        fit = fit_volterra(x, x, st)
        ident = VolterraKernel.identity(st)
        assert np.allclose(fit.kernel.h1, ident.h1, atol=1e-6)
        assert np.allclose(fit.kernel.h2, 0, atol=1e-6)
        assert np.allclose(fit.kernel.h3, 0, atol=1e-6)

    def test_linear_channel_learns_fir_inverse(self):
        rng = np.random.default_rng(4)
        g = np.array([1.0, 0.3, -0.1])
        x = rng.normal(size=8192)
        y = np.convolve(x, g, mode="full")[: x.size]
        st = VolterraStructure(memory_1=15, memory_2=0, memory_3=0)
        fit = fit_volterra(x, y, st)

        # oracle: frequency-domain inversion of g, truncated to the window
        n_fft = 4096
        g_inv = np.fft.ifft(1.0 / np.fft.fft(g, n_fft)).real
        expect = np.zeros(15)
        expect[7:] = g_inv[:8]          # causal inverse lands right of center
        expect[:7] = g_inv[-7:]
        err = np.sum((fit.kernel.h1 - expect) ** 2) / np.sum(expect**2)
        assert 10 * np.log10(err) < -40
        assert fit.holdout_nmse_db <= -30

    def test_memoryless_cubic_improvement(self):
        # drive kept inside the invertible range of x - 0.1x^3 (|x| < 1.83);
        # training sweep is amplitude-extended so the post-inverse is fitted
        # over the whole predistorter input span
        rng = np.random.default_rng(5)
        levels = np.arange(-7, 8, 2) / 7.0

        def cubic(v):
            return v - 0.1 * v**3

        x_tr = levels[rng.integers(0, 8, 20000)] * 1.5
        x_ev = levels[rng.integers(0, 8, 20000)]
        st = VolterraStructure(memory_1=3, memory_2=0, memory_3=3, max_spread_3=0)
        fit = fit_volterra(x_tr, cubic(x_tr), st)
        z = apply_volterra(x_ev, fit.kernel)
        no_dpd = nmse_db(x_ev, cubic(x_ev))
        with_dpd = nmse_db(x_ev, cubic(z))
        assert no_dpd > -23.0          # distortion clearly present
        assert with_dpd < -28.0
        assert no_dpd - with_dpd >= 10.0

    def test_holdout_within_3db_of_training(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=8192)
        y = np.convolve(x - 0.05 * x**3, [1.0, 0.2], mode="full")[: x.size]
        st = VolterraStructure(memory_1=9, memory_2=0, memory_3=9, max_spread_3=0)
        fit = fit_volterra(x, y, st)
        assert fit.holdout_nmse_db <= fit.train_nmse_db + 3.0

    def test_too_short_rejected(self):
        with pytest.raises(ParameterError):
            fit_volterra(np.ones(50), np.ones(50), VolterraStructure())


class TestRrcUpsample:
    def test_impulse_gives_pulse(self):
        sym = np.zeros(129)
        sym[64] = 1.0
        wave = rrc_upsample(sym, 2, 0.1, 1e9, span_symbols=32)
        taps = design_rrc(0.1, 32, 2)
        center = 64 * 2
        seg = wave.real[center - 32: center + 33]
        assert np.allclose(seg, taps, atol=1e-9)

    def test_occupied_bandwidth(self):
        rng = np.random.default_rng(7)
        sym = np.where(np.arange(4096) % 2 == 0, 1.0, -1.0)
        rs = 216e9
        wave = rrc_upsample(sym, 2, 0.01, rs)
        assert occupied_bandwidth(wave, 0.999) <= (1 + 0.01) / 2 * rs * 1.02

    def test_round_trip_pam8(self):
        rng = np.random.default_rng(8)
        levels = np.arange(-7, 8, 2) / np.sqrt(21)
        sym = levels[rng.integers(0, 8, 4096)]
        wave = rrc_upsample(sym, 2, 0.01, 216e9)
        back = matched_downsample(wave, 2, 0.01, span=600)
        assert 10 * np.log10(np.sum((back - sym) ** 2) / np.sum(sym**2)) < -50

    def test_linearity(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=512)
        b = rng.normal(size=512)
        lhs = rrc_upsample(1.5 * a - 0.5 * b, 2, 0.1, 1e9).real
        rhs = 1.5 * rrc_upsample(a, 2, 0.1, 1e9).real - 0.5 * rrc_upsample(b, 2, 0.1, 1e9).real
        assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)) < 1e-10


class TestPreemphasis:
    def test_flat_response_identity(self):
        rng = np.random.default_rng(10)
        w = SampledWaveform(256e9, rng.normal(size=2048))
        f = np.linspace(0, 128e9, 65)
        out = linear_preemphasis(w, f, np.ones(65))
        assert nmse_db(w, out) < -150

    def test_first_order_rolloff_flattened(self):
        # -6 dB at the 100-GHz band edge; cascade must be flat within 0.5 dB
        rate = 512e9
        f_table = np.linspace(0, rate / 2, 2049)
        f0 = 100e9 / np.sqrt(10 ** 0.6 - 1)
        response = 1.0 / np.sqrt(1 + (f_table / f0) ** 2)
        n = 8192
        t = np.arange(n) / rate
        for f_test in (20e9, 50e9, 80e9, 100e9):
            w = SampledWaveform(rate, np.cos(2 * np.pi * f_test * t))
            pre = linear_preemphasis(w, f_table, response, max_boost_db=20.0)
            from imddsim.sigcore import apply_filter, programmable

            casc = apply_filter(pre, programmable(f_table, response))
            ratio = tone_amplitude(casc, f_test) / tone_amplitude(w, f_test)
            assert abs(20 * np.log10(ratio)) < 0.5

    def test_zero_boost_is_identity_for_passive_response(self):
        rng = np.random.default_rng(11)
        w = SampledWaveform(256e9, rng.normal(size=2048))
        f = np.linspace(0, 128e9, 129)
        response = 1.0 / (1 + (f / 60e9) ** 2)
        out = linear_preemphasis(w, f, response, max_boost_db=0.0)
        assert nmse_db(w, out) < -150

    def test_zero_response_without_clipping_rejected(self):
        w = SampledWaveform(256e9, np.ones(64))
        f = np.linspace(0, 128e9, 65)
        resp = np.ones(65)
        resp[40:] = 0.0
        with pytest.raises(ParameterError):
            linear_preemphasis(w, f, resp, max_boost_db=None)


class TestBandPlan:
    def test_invalid_plans_rejected(self):
        with pytest.raises(ParameterError):
            BandPlan(76e9, 76e9, 75e9, 80e9)  # LO above digital HPF
        with pytest.raises(ParameterError):
            BandPlan(160e9, 160e9, 150e9, 20e9)  # IF edge beyond AWG bandwidth


class TestBandSplit:
    def make_tone(self, freq, n=65536, rate=512e9):
        from imddsim.sigcore import bin_centered_frequency

        f = bin_centered_frequency(freq, n, rate)
        t = np.arange(n) / rate
        return SampledWaveform(rate, np.cos(2 * np.pi * f * t)), f

    def test_low_tone_goes_to_lower_branch(self):
        w, f = self.make_tone(40e9)
        lower, upper = band_split(w, C_PLAN)
        e_low = np.sum(np.abs(lower.samples) ** 2)
        e_up = np.sum(np.abs(upper.samples) ** 2)
        assert 10 * np.log10(e_up / e_low) < -40

    def test_high_tone_lands_at_if(self):
        w, f = self.make_tone(100e9)
        lower, upper = band_split(w, C_PLAN)
        # 100 GHz - 72 GHz LO = 28 GHz IF, amplitude preserved
        assert abs(tone_amplitude(upper, 28e9) - 1.0) < 0.02
        e_low = np.sum(np.abs(lower.samples) ** 2)
        e_up = np.sum(np.abs(upper.samples) ** 2)
        assert 10 * np.log10(e_low / e_up) < -40

    def test_full_band_signal_fits_awg(self):
        rng = np.random.default_rng(12)
        n, rate = 65536, 512e9
        spec = np.zeros(n, dtype=np.complex128)
        freqs = np.fft.fftfreq(n, 1 / rate)
        sel = (np.abs(freqs) > 0.5e9) & (np.abs(freqs) < 140e9)
        spec[sel] = rng.normal(size=sel.sum()) + 1j * rng.normal(size=sel.sum())
        w = SampledWaveform(rate, np.fft.ifft(spec).real)
        lower, upper = band_split(w, C_PLAN)
        assert occupied_bandwidth(lower, 0.999) <= 80e9
        assert occupied_bandwidth(upper, 0.999) <= 80e9
        assert lower.sample_rate_hz == upper.sample_rate_hz == 256e9

    def test_complex_input_rejected(self):
        w = SampledWaveform(512e9, np.exp(2j * np.pi * np.arange(1024) / 8),
                            "optical_field")
        with pytest.raises(ParameterError):
            band_split(w, C_PLAN)
