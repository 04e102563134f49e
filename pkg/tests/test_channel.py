import numpy as np
import pytest
from scipy.constants import c as C_M_S

from imddsim.channel import (
    FiberSpec,
    OpticalAmpSpec,
    dispersion_coefficient,
    multicore_batch,
    obpf,
    optical_amplify,
    propagate,
)
from imddsim.errors import ParameterError
from imddsim.sigcore import SampledWaveform, nmse_db

RATE = 2048e9  # fine time resolution for pulse-width measurements

O_FIBER = FiberSpec(2.0, zero_dispersion_wavelength_nm=1280.0,
                    dispersion_slope_ps_nm2_km=0.092, attenuation_db_km=0.4)


def gaussian_pulse(t0_s, n=16384, rate=RATE):
    t = (np.arange(n) - n / 2) / rate
    return SampledWaveform(rate, np.exp(-(t**2) / (2 * t0_s**2)).astype(complex),
                           "optical_field")


def intensity_width(wave):
    """1/e half-width of a Gaussian intensity profile via second moments."""
    inten = np.abs(wave.samples) ** 2
    t = np.arange(wave.n) / wave.sample_rate_hz
    t0 = np.sum(t * inten) / np.sum(inten)
    var = np.sum((t - t0) ** 2 * inten) / np.sum(inten)
    return np.sqrt(2 * var)


class TestDispersionCoefficient:
    def test_zero_at_lambda0(self):
        assert dispersion_coefficient(1280.0, O_FIBER) == 0.0

    def test_closed_form_at_1310(self):
        d = dispersion_coefficient(1310.0, O_FIBER)
        expect = (0.092 / 4.0) * (1310.0 - 1280.0**4 / 1310.0**3)
        assert d == pytest.approx(expect, abs=1e-12)
        assert 2.6 < d < 2.7

    def test_monotone_above_lambda0(self):
        ds = [dispersion_coefficient(lam, O_FIBER)
              for lam in (1290, 1310, 1330, 1350, 1370)]
        assert all(b > a for a, b in zip(ds, ds[1:]))


class TestPropagate:
    def test_zero_length_identity(self):
        w = gaussian_pulse(5e-12)
        out = propagate(w, FiberSpec(0.0), 1310.0)
        assert np.array_equal(out.samples, w.samples)

    def test_energy_conserved_up_to_loss(self):
        w = gaussian_pulse(5e-12)
        spec = FiberSpec(7.0, attenuation_db_km=0.3)
        out = propagate(w, spec, 1330.0)
        e_in = np.sum(np.abs(w.samples) ** 2)
        e_out = np.sum(np.abs(out.samples) ** 2)
        loss = 10 ** (-0.3 * 7.0 / 10.0)
        assert abs(e_out - loss * e_in) / e_in < 1e-10

    def test_gaussian_broadening_closed_form(self):
        t0 = 5e-12
        lam_nm = 1310.0
        d = dispersion_coefficient(lam_nm, O_FIBER) * 1e-6  # s/m^2
        beta2 = (lam_nm * 1e-9) ** 2 * d / (2 * np.pi * C_M_S)
        length_km = t0**2 / beta2 / 1e3  # beta2 * L = T0^2
        spec = FiberSpec(length_km, zero_dispersion_wavelength_nm=1280.0,
                         dispersion_slope_ps_nm2_km=0.092, attenuation_db_km=0.0)
        w = gaussian_pulse(t0)
        out = propagate(w, spec, lam_nm)
        assert intensity_width(w) == pytest.approx(t0, rel=1e-3)
        assert intensity_width(out) == pytest.approx(np.sqrt(2) * t0, rel=0.01)

    def test_semigroup(self):
        w = gaussian_pulse(3e-12)
        one = propagate(propagate(w, FiberSpec(4.0), 1330.0), FiberSpec(6.0), 1330.0)
        two = propagate(w, FiberSpec(10.0), 1330.0)
        assert nmse_db(two, one) < -90

    def test_requires_optical_field(self):
        w = SampledWaveform(RATE, np.ones(64))
        with pytest.raises(ParameterError):
            propagate(w, O_FIBER, 1310.0)


class TestOpticalAmplify:
    def test_pure_scaling_without_noise(self):
        w = gaussian_pulse(5e-12)
        out = optical_amplify(w, OpticalAmpSpec(gain_db=6.0), seed=0)
        assert np.allclose(out.samples, 10 ** (6.0 / 20.0) * w.samples)

    def test_noise_variance_matches_density(self):
        n = 1 << 20
        w = SampledWaveform(RATE, np.zeros(n, dtype=complex), "optical_field")
        density = 1e-25
        out = optical_amplify(w, OpticalAmpSpec(0.0, density), seed=1)
        var = np.mean(np.abs(out.samples) ** 2)
        assert var == pytest.approx(density * RATE, rel=0.05)

    def test_seed_determinism(self):
        w = gaussian_pulse(5e-12)
        spec = OpticalAmpSpec(3.0, 1e-26)
        a = optical_amplify(w, spec, seed=42)
        b = optical_amplify(w, spec, seed=42)
        assert np.array_equal(a.samples, b.samples)


class TestObpf:
    def test_unit_response_identity(self):
        w = gaussian_pulse(5e-12)
        out = obpf(w, np.array([0.0, RATE / 2]), np.array([1.0, 1.0]))
        assert nmse_db(w, out) < -150

    def test_cd_trim_inverts_propagation(self):
        w = gaussian_pulse(4e-12)
        lam = 1330.0
        spec = FiberSpec(8.0, attenuation_db_km=0.0)
        dispersed = propagate(w, spec, lam)
        d_si = dispersion_coefficient(lam, spec) * 1e-6
        f = np.linspace(0, RATE / 2, 4097)
        phase = np.pi * (lam * 1e-9) ** 2 * d_si * spec.length_km * 1e3 * f**2 / C_M_S
        out = obpf(dispersed, f, np.exp(-1j * phase))
        assert nmse_db(w, out) < -60

    def test_brickwall_bandpass_on_noise(self):
        rng = np.random.default_rng(2)
        n = 1 << 16
        w = SampledWaveform(RATE, rng.normal(size=n) + 1j * rng.normal(size=n),
                            "optical_field")
        bw = 100e9
        f = np.array([0.0, bw / 2, bw / 2 + RATE / n, RATE / 2])
        h = np.array([1.0, 1.0, 0.0, 0.0])
        out = obpf(w, f, h)
        spec = np.abs(np.fft.fft(out.samples)) ** 2
        freqs = np.abs(np.fft.fftfreq(n, 1 / RATE))
        inside = spec[freqs <= bw / 2].mean()
        outside = spec[freqs > bw / 2 + 2 * RATE / n].mean()
        assert 10 * np.log10(outside / inside) < -60


class TestMulticoreBatch:
    class StubConfig:
        def __init__(self, seed):
            self.seed = seed

    def test_runs_per_core_in_order(self):
        configs = [self.StubConfig(s) for s in (1, 2, 3, 4)]
        out = multicore_batch(configs, run_fn=lambda c: ("report", c.seed))
        assert out == [("report", 1), ("report", 2), ("report", 3), ("report", 4)]

    def test_duplicate_seeds_warn(self):
        configs = [self.StubConfig(7), self.StubConfig(7)]
        with pytest.warns(UserWarning, match="duplicate seeds"):
            multicore_batch(configs, run_fn=lambda c: c.seed)

    def test_single_core_is_plain_run(self):
        out = multicore_batch([self.StubConfig(5)], run_fn=lambda c: c.seed * 10)
        assert out == [50]
