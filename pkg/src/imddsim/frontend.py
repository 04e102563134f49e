"""Behavioral models of the analog transmitter hardware: DAC, LO/mixer
up-conversion, active combiner, amplifiers, laser, and Mach-Zehnder
modulator.

The optical carrier is a baseband complex envelope; absolute optical
frequency only enters through the fiber dispersion parameters. LO tones are
snapped to the record's frequency grid (the lab locks the LO clocks to the
same AWG), which keeps mixing exactly circular.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ParameterError
from .sigcore import (
    SampledWaveform,
    apply_filter,
    band_energy_fraction,
    bin_centered_frequency,
    highpass,
    lowpass,
    resample,
)
from .txdsp import BandPlan


# ---------------------------------------------------------------------------
# device models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixerModel:
    """Up-conversion mixer with per-sideband (SSB) conversion gain.

    With 0 dB gain, an IF tone of amplitude a yields two images of amplitude
    a each, so an ideal HPF + combiner chain reconstructs at unit gain. The
    gain characteristic is flat with a second-order magnitude roll-off at
    ``bandwidth_hz`` (the RF-side 3-dB point), or an explicit
    ``gain_table_hz/gain_table_db`` pair digitized from measurements.
    """

    lo_frequency_hz: float
    bandwidth_hz: float = 150e9
    conversion_gain_db: float = 0.0
    rolloff_order: int = 2
    gain_table_hz: np.ndarray | None = None
    gain_table_db: np.ndarray | None = None
    lo_leakage_db: float | None = None
    if_leakage_db: float | None = None
    lo_phase_rad: float = 0.0

    def __post_init__(self):
        if self.lo_frequency_hz <= 0 or self.bandwidth_hz <= 0:
            raise ParameterError("mixer frequencies must be positive")
        if (self.gain_table_hz is None) != (self.gain_table_db is None):
            raise ParameterError("gain table needs both frequency and dB columns")
        if self.gain_table_hz is not None:
            f = np.asarray(self.gain_table_hz, dtype=float)
            g = np.asarray(self.gain_table_db, dtype=float)
            if f.size != g.size or f.size < 2 or np.any(np.diff(f) <= 0):
                raise ParameterError("gain table must be ascending in frequency")
            knee = g.max() - 3.0
            past_knee = np.where(g <= knee)[0]
            if past_knee.size and np.any(np.diff(g[past_knee[0]:]) > 1e-9):
                raise ParameterError(
                    "gain table must be non-increasing beyond its 3-dB point"
                )
            object.__setattr__(self, "gain_table_hz", f)
            object.__setattr__(self, "gain_table_db", g)

    def gain_linear(self, freq_hz: np.ndarray) -> np.ndarray:
        f = np.abs(np.asarray(freq_hz, dtype=float))
        if self.gain_table_hz is not None:
            return 10 ** (np.interp(f, self.gain_table_hz, self.gain_table_db) / 20.0)
        flat = 10 ** (self.conversion_gain_db / 20.0)
        return flat / np.sqrt(1.0 + (f / self.bandwidth_hz) ** (2 * self.rolloff_order))


@dataclass(frozen=True)
class AmplifierModel:
    gain_db: float
    bandwidth_hz: float
    compression_in_1db: float | None = None
    bandwidth_order: int = 4

    def __post_init__(self):
        if not np.isfinite(self.gain_db) or self.bandwidth_hz <= 0:
            raise ParameterError("amplifier gain must be finite, bandwidth positive")


@dataclass(frozen=True)
class MzmModel:
    """Mach-Zehnder: E = sqrt(P) cos(pi (v - v_bias) / (2 Vpi)).

    Default bias is quadrature (-Vpi/2): zero drive sits at half intensity
    and +Vpi/2 reaches the null. The electro-optic bandwidth is a
    second-order Bessel whose magnitude hits ``bandwidth_atten_db`` at
    ``bandwidth_hz``.
    """

    v_pi_volts: float
    bandwidth_hz: float = 110e9
    bandwidth_atten_db: float = 4.5
    bias_voltage: float | None = None
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.v_pi_volts <= 0:
            raise ParameterError("V_pi must be positive")

    @property
    def bias(self) -> float:
        return -self.v_pi_volts / 2 if self.bias_voltage is None else self.bias_voltage


@dataclass(frozen=True)
class LaserModel:
    wavelength_nm: float
    power_dbm: float = 20.0

    def __post_init__(self):
        if not np.isfinite(self.power_dbm) or self.wavelength_nm <= 0:
            raise ParameterError("laser power must be finite, wavelength positive")

    @property
    def power_w(self) -> float:
        return 10 ** ((self.power_dbm - 30.0) / 10.0)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def quantize_uniform(x: np.ndarray, bits: int, full_scale: float | None = None) -> np.ndarray:
    """Mid-rise uniform quantizer over [-FS, FS] (FS defaults to the peak)."""
    if bits < 1:
        raise ParameterError("resolution must be >= 1 bit")
    fs = float(np.max(np.abs(x))) if full_scale is None else float(full_scale)
    if fs == 0:
        return x.copy()
    step = 2.0 * fs / (2**bits)
    q = step * (np.floor(x / step) + 0.5)
    return np.clip(q, -fs + step / 2, fs - step / 2)


def dac(wave: SampledWaveform, analog_rate_hz: float, bandwidth_hz: float = 80e9,
        resolution_bits: int | None = None, bandwidth_order: int = 4) -> SampledWaveform:
    """Zero-order-hold reconstruction to the analog rate, then the converter's
    analog bandwidth filter.

    The hold is modeled by the continuous ZOH sinc droop applied after exact
    rate conversion; the hold's half-sample delay is referenced out (absolute
    converter timing is owned by the band-alignment step), and hold images
    above the converter Nyquist are not modeled, matching a converter whose
    output network removes them.
    """
    if analog_rate_hz < wave.sample_rate_hz:
        raise ParameterError("analog rate must be at least the DAC rate")
    x = wave.real
    if resolution_bits is not None:
        x = quantize_uniform(x, resolution_bits)
    up = resample(SampledWaveform(wave.sample_rate_hz, x, wave.domain_tag),
                  analog_rate_hz)
    freqs = np.fft.fftfreq(up.n, d=1.0 / analog_rate_hz)
    droop = np.sinc(freqs / wave.sample_rate_hz)
    out = SampledWaveform(analog_rate_hz,
                          np.fft.ifft(np.fft.fft(up.samples) * droop).real,
                          wave.domain_tag)
    return apply_filter(out, lowpass(bandwidth_hz, analog=True, order=bandwidth_order))


def mixer_upconvert(if_wave: SampledWaveform, model: MixerModel) -> SampledWaveform:
    """Multiply by the LO cosine; images at f_LO +- f_IF carry the
    per-sideband gain evaluated at the RF output frequency. Optional LO and
    IF leakage terms are added ahead of the output roll-off."""
    if np.max(np.abs(if_wave.samples.imag)) > 0:
        raise ParameterError("mixer IF input must be real")
    n, rate = if_wave.n, if_wave.sample_rate_hz
    above_lo = band_energy_fraction(if_wave, model.lo_frequency_hz, rate / 2)
    if above_lo > 1e-6:
        warnings.warn(
            f"{above_lo:.1%} of IF energy lies above the LO; the folded image "
            "may land in band",
            stacklevel=2,
        )

    f_lo = bin_centered_frequency(model.lo_frequency_hz, n, rate)
    t = np.arange(n) / rate
    lo_tone = np.cos(2 * np.pi * f_lo * t + model.lo_phase_rad)
    product = 2.0 * if_wave.real * lo_tone

    if model.lo_leakage_db is not None:
        product = product + 10 ** (model.lo_leakage_db / 20.0) * lo_tone
    if model.if_leakage_db is not None:
        product = product + 10 ** (model.if_leakage_db / 20.0) * if_wave.real

    freqs = np.fft.fftfreq(n, d=1.0 / rate)
    out = np.fft.ifft(np.fft.fft(product) * model.gain_linear(freqs)).real
    return SampledWaveform(rate, out)


def combine(lower: SampledWaveform, upper_rf: SampledWaveform,
            gain_imbalance_db: float = 0.0, skew_s: float = 0.0) -> SampledWaveform:
    """Active combiner: lower + imbalance * delay(upper, skew)."""
    if lower.sample_rate_hz != upper_rf.sample_rate_hz or lower.n != upper_rf.n:
        raise ParameterError("combiner inputs must share rate and length")
    upper = upper_rf.samples
    if skew_s != 0.0:
        freqs = np.fft.fftfreq(upper_rf.n, d=1.0 / upper_rf.sample_rate_hz)
        upper = np.fft.ifft(np.fft.fft(upper) * np.exp(-2j * np.pi * freqs * skew_s))
    scale = 10 ** (gain_imbalance_db / 20.0)
    out = lower.samples + scale * upper
    return SampledWaveform(lower.sample_rate_hz, out.real)


_TANH_1DB = None


def _tanh_compression_point() -> float:
    """u solving tanh(u)/u = -1 dB; input scale of the saturation map."""
    global _TANH_1DB
    if _TANH_1DB is None:
        target = 10 ** (-1.0 / 20.0)
        _TANH_1DB = brentq(lambda u: np.tanh(u) / u - target, 1e-3, 3.0)
    return _TANH_1DB


def amplify(wave: SampledWaveform, model: AmplifierModel) -> SampledWaveform:
    """Bandwidth filter, then linear gain, then optional tanh saturation
    referenced to the input 1-dB compression level."""
    out = apply_filter(
        wave, lowpass(model.bandwidth_hz, analog=True, order=model.bandwidth_order)
    )
    g = 10 ** (model.gain_db / 20.0)
    y = g * out.real
    if model.compression_in_1db is not None:
        sat = g * model.compression_in_1db / _tanh_compression_point()
        y = sat * np.tanh(y / sat)
    return SampledWaveform(wave.sample_rate_hz, y, wave.domain_tag)


def bessel_group_delay_dc(cutoff_hz: float, order: int = 4) -> float:
    """Low-frequency group delay of the analog Bessel response (seconds).

    Bessel delay is maximally flat, so the DC value is representative across
    the passband; the band-stitching alignment uses it to set the LO phase
    the way a lab path-matches the two arms.
    """
    from scipy import signal as _sig

    b, a = _sig.bessel(order, 2 * np.pi * cutoff_hz, btype="low", analog=True,
                       norm="mag")
    dw = 2 * np.pi * cutoff_hz * 1e-4
    _, h = _sig.freqs(b, a, worN=[dw, 2 * dw])
    return float((np.angle(h[0]) - np.angle(h[1])) / dw)


def _mzm_bandwidth_cutoff(model: MzmModel) -> float:
    """Bessel-2 cutoff placing ``bandwidth_atten_db`` at ``bandwidth_hz``."""
    target = 10 ** (-model.bandwidth_atten_db / 20.0)
    from scipy import signal as _sig

    b, a = _sig.bessel(2, 1.0, btype="low", analog=True, norm="mag")

    def mag_at(x):
        _, h = _sig.freqs(b, a, worN=[x])
        return abs(h[0]) - target

    x = brentq(mag_at, 0.1, 50.0)
    return model.bandwidth_hz / x


def mzm_modulate(drive: SampledWaveform, laser: LaserModel,
                 model: MzmModel) -> SampledWaveform:
    """Field transfer E = sqrt(P_in) cos(pi (v - bias) / (2 Vpi)) after the
    modulator bandwidth filter on the drive."""
    if np.max(np.abs(drive.samples.imag)) > 0:
        raise ParameterError("MZM drive must be real")
    v = apply_filter(
        drive, lowpass(_mzm_bandwidth_cutoff(model), analog=True, order=2)
    ).real
    amp = np.sqrt(laser.power_w) * 10 ** (-model.insertion_loss_db / 20.0)
    field = amp * np.cos(np.pi * (v - model.bias) / (2.0 * model.v_pi_volts))
    return SampledWaveform(drive.sample_rate_hz, field.astype(np.complex128),
                           "optical_field")


# ---------------------------------------------------------------------------
# band stitching (the bandwidth-extension front end)
# ---------------------------------------------------------------------------

def stitch_bands(lower_awg: SampledWaveform, upper_awg: SampledWaveform,
                 plan: BandPlan, analog_rate_hz: float,
                 mixer: MixerModel | None = None,
                 analog_hpf=None,
                 dac_bandwidth_hz: float | None = None,
                 dac_resolution_bits: int | None = None,
                 gain_imbalance_db: float = 0.0,
                 skew_s: float = 0.0) -> SampledWaveform:
    """Reconstruct the wideband signal from the two AWG records.

    With the defaults every element is ideal: exact resampling instead of a
    ZOH DAC, a unity-SSB-gain leak-free mixer, a sharp linear-phase HPF at
    the plan's analog cutoff, and a perfectly balanced combiner. Real device
    models slot into the same path.
    """
    if dac_bandwidth_hz is None:
        lower = resample(lower_awg, analog_rate_hz)
        upper_if = resample(upper_awg, analog_rate_hz)
    else:
        lower = dac(lower_awg, analog_rate_hz, dac_bandwidth_hz, dac_resolution_bits)
        upper_if = dac(upper_awg, analog_rate_hz, dac_bandwidth_hz, dac_resolution_bits)

    mixer = mixer or MixerModel(plan.lo_frequency_hz, bandwidth_hz=1e15)
    if mixer.lo_frequency_hz != plan.lo_frequency_hz:
        raise ParameterError("mixer LO must match the band plan")
    upper_rf = mixer_upconvert(upper_if, mixer)

    hpf = analog_hpf if analog_hpf is not None else highpass(plan.analog_hpf_cutoff_hz)
    upper_rf = apply_filter(upper_rf, hpf)
    return combine(lower, upper_rf, gain_imbalance_db, skew_s)
