"""Waveform container, filter design/application, resampling, and signal metrics.

Conventions used throughout the simulator:

- Records are treated as circular: filtering is frequency-domain
  multiplication over the full record, so linear-phase designs are applied
  with exactly zero net delay and length is always preserved.
- "Digital" filter kinds (lowpass/highpass/bandpass/fir_taps) are
  linear-phase FIR prototypes (Kaiser windowed sinc) evaluated as zero-phase
  real responses. Highpass is built complementary to the lowpass at the same
  cutoff, so LPF + HPF sums to unity across the crossover.
- "Analog" filters (``analog=True``) are Bessel responses of configurable
  order evaluated with their phase, approximating lab hardware roll-offs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as _sig

from .errors import ParameterError

#: dB floor used wherever a log of a vanishing error is reported.
NMSE_FLOOR_DB = -200.0

_DOMAIN_TAGS = ("electrical", "optical_field", "photocurrent")
_REAL_TAGS = ("electrical", "photocurrent")


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled signal; the carrier between all pipeline stages.

    Parameters
    ----------
    sample_rate_hz : float
        Sampling rate, > 0.
    samples : array-like
        Sample values; stored as complex128. Electrical and photocurrent
        waveforms must be real (imaginary RMS below 1e-12 of total RMS).
    domain_tag : str
        One of ``electrical``, ``optical_field``, ``photocurrent``.
    """

    sample_rate_hz: float
    samples: np.ndarray
    domain_tag: str = "electrical"

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample_rate_hz must be positive")
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("samples must be finite")
        if self.domain_tag not in _DOMAIN_TAGS:
            raise ParameterError(f"unknown domain_tag {self.domain_tag!r}")
        if self.domain_tag in _REAL_TAGS:
            total = np.sqrt(np.mean(np.abs(arr) ** 2))
            imag = np.sqrt(np.mean(arr.imag**2))
            if total > 0 and imag > 1e-12 * total:
                raise ParameterError(
                    f"{self.domain_tag} waveform has non-negligible imaginary part"
                )
            arr = arr.real.astype(np.complex128)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.n / self.sample_rate_hz

    @property
    def real(self) -> np.ndarray:
        return self.samples.real

    def times(self) -> np.ndarray:
        return np.arange(self.n) / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray, domain_tag: str | None = None) -> "SampledWaveform":
        return SampledWaveform(
            self.sample_rate_hz, samples, domain_tag or self.domain_tag
        )


@dataclass(frozen=True)
class FilterSpec:
    """Declarative filter description consumed by :func:`apply_filter`.

    ``kind`` selects the response family:

    - ``lowpass`` / ``highpass`` / ``bandpass``: sharp linear-phase FIR with
      ``transition_width_hz`` transition (zero-phase application), or a
      Bessel response of ``order`` poles when ``analog=True``.
    - ``gaussian_like``: zero-phase Gaussian magnitude, -3 dB at ``cutoff_hz``.
    - ``fir_taps``: explicit taps, applied with the center-tap group delay
      removed.
    - ``programmable_response``: complex response table (``freq_hz``,
      ``response``) interpolated onto the record grid; conjugate symmetry is
      enforced so real inputs stay real.
    """

    kind: str
    cutoff_hz: float | None = None
    band_hz: tuple[float, float] | None = None
    transition_width_hz: float = 2e9
    taps: np.ndarray | None = None
    freq_hz: np.ndarray | None = None
    response: np.ndarray | None = None
    analog: bool = False
    order: int = 4

    def __post_init__(self):
        kinds = (
            "fir_taps",
            "lowpass",
            "highpass",
            "bandpass",
            "gaussian_like",
            "programmable_response",
        )
        if self.kind not in kinds:
            raise ParameterError(f"unknown filter kind {self.kind!r}")
        if self.kind in ("lowpass", "highpass", "gaussian_like"):
            if self.cutoff_hz is None or self.cutoff_hz <= 0:
                raise ParameterError(f"{self.kind} requires a positive cutoff_hz")
        if self.kind == "bandpass":
            if self.band_hz is None or not 0 < self.band_hz[0] < self.band_hz[1]:
                raise ParameterError("bandpass requires 0 < f_lo < f_hi")
        if self.kind == "fir_taps" and (self.taps is None or len(self.taps) == 0):
            raise ParameterError("fir_taps requires a non-empty tap vector")
        if self.kind == "programmable_response":
            if self.freq_hz is None or self.response is None:
                raise ParameterError(
                    "programmable_response requires freq_hz and response tables"
                )
            if len(self.freq_hz) != len(self.response) or len(self.freq_hz) < 2:
                raise ParameterError("response table must pair >= 2 frequencies")


def lowpass(cutoff_hz: float, transition_width_hz: float = 2e9, analog: bool = False,
            order: int = 4) -> FilterSpec:
    return FilterSpec("lowpass", cutoff_hz=cutoff_hz,
                      transition_width_hz=transition_width_hz, analog=analog, order=order)


def highpass(cutoff_hz: float, transition_width_hz: float = 2e9, analog: bool = False,
             order: int = 4) -> FilterSpec:
    return FilterSpec("highpass", cutoff_hz=cutoff_hz,
                      transition_width_hz=transition_width_hz, analog=analog, order=order)


def bandpass(f_lo_hz: float, f_hi_hz: float, transition_width_hz: float = 2e9,
             analog: bool = False, order: int = 4) -> FilterSpec:
    return FilterSpec("bandpass", band_hz=(f_lo_hz, f_hi_hz),
                      transition_width_hz=transition_width_hz, analog=analog, order=order)


def programmable(freq_hz: Sequence[float], response: Sequence[complex]) -> FilterSpec:
    return FilterSpec(
        "programmable_response",
        freq_hz=np.asarray(freq_hz, dtype=float),
        response=np.asarray(response, dtype=np.complex128),
    )


# ---------------------------------------------------------------------------
# filter response construction
# ---------------------------------------------------------------------------

def _windowed_sinc_taps(cutoff_hz: float, transition_width_hz: float,
                        sample_rate_hz: float, n_record: int) -> np.ndarray:
    """Kaiser windowed-sinc lowpass prototype (odd length, 80 dB design)."""
    nyq = sample_rate_hz / 2.0
    width = min(transition_width_hz, 2 * cutoff_hz, 2 * (nyq - cutoff_hz)) / nyq
    numtaps, beta = _sig.kaiserord(80.0, width)
    numtaps |= 1
    # keep the prototype shorter than the record so it can be zero-padded
    if numtaps > n_record:
        numtaps = n_record if n_record % 2 else n_record - 1
    return _sig.firwin(numtaps, cutoff_hz, window=("kaiser", beta), fs=sample_rate_hz)


def _zero_phase_fir_response(taps: np.ndarray, n: int) -> np.ndarray:
    """Response of a linear-phase FIR on an n-point grid, center delay removed."""
    taps = np.asarray(taps, dtype=np.complex128)
    if len(taps) > n:
        raise ParameterError(
            f"filter prototype ({len(taps)} taps) exceeds record length {n}"
        )
    padded = np.zeros(n, dtype=np.complex128)
    padded[: len(taps)] = taps
    center = (len(taps) - 1) / 2.0
    resp = np.fft.fft(padded) * np.exp(2j * np.pi * np.fft.fftfreq(n) * center)
    if len(taps) % 2:
        # symmetric odd-length prototypes have an exactly real response
        resp = resp.real.astype(np.complex128)
    return resp


def _bessel_response(freqs_hz: np.ndarray, cutoff_hz: float, btype: str,
                     order: int) -> np.ndarray:
    b, a = _sig.bessel(order, 2 * np.pi * cutoff_hz, btype=btype, analog=True,
                       norm="mag")
    _, h = _sig.freqs(b, a, worN=2 * np.pi * np.abs(freqs_hz))
    h = np.asarray(h, dtype=np.complex128)
    # real filter: enforce conjugate symmetry for the negative-frequency bins
    h[freqs_hz < 0] = np.conj(h[freqs_hz < 0])
    return h


def filter_response(spec: FilterSpec, n: int, sample_rate_hz: float) -> np.ndarray:
    """Complex response of ``spec`` on the n-point FFT grid at the given rate."""
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate_hz)
    nyq = sample_rate_hz / 2.0

    # FIR designs need cutoffs inside the Nyquist band; analog (Bessel) and
    # gaussian responses are closed-form and may roll off beyond it.
    fir_design = not spec.analog and spec.kind in ("lowpass", "highpass", "bandpass")
    if fir_design and spec.kind != "bandpass" and spec.cutoff_hz >= nyq:
        raise ParameterError(
            f"cutoff {spec.cutoff_hz:.3g} Hz >= Nyquist {nyq:.3g} Hz"
        )
    if fir_design and spec.kind == "bandpass" and spec.band_hz[1] >= nyq:
        raise ParameterError("bandpass upper edge >= Nyquist")

    if spec.kind == "fir_taps":
        return _zero_phase_fir_response(np.asarray(spec.taps), n)

    if spec.kind == "gaussian_like":
        return np.exp(-np.log(2.0) / 2.0 * (freqs / spec.cutoff_hz) ** 2).astype(
            np.complex128
        )

    if spec.kind == "programmable_response":
        table_f = np.asarray(spec.freq_hz, dtype=float)
        table_h = np.asarray(spec.response, dtype=np.complex128)
        mag = np.abs(freqs)
        h = np.interp(mag, table_f, table_h.real) + 1j * np.interp(
            mag, table_f, table_h.imag
        )
        h[freqs < 0] = np.conj(h[freqs < 0])
        return h

    if spec.analog:
        if spec.kind == "bandpass":
            lo = _bessel_response(freqs, spec.band_hz[0], "highpass", spec.order)
            hi = _bessel_response(freqs, spec.band_hz[1], "lowpass", spec.order)
            return lo * hi
        return _bessel_response(
            freqs, spec.cutoff_hz, "lowpass" if spec.kind == "lowpass" else "highpass",
            spec.order
        )

    if spec.kind == "lowpass":
        taps = _windowed_sinc_taps(spec.cutoff_hz, spec.transition_width_hz,
                                   sample_rate_hz, n)
        return _zero_phase_fir_response(taps, n)
    if spec.kind == "highpass":
        taps = _windowed_sinc_taps(spec.cutoff_hz, spec.transition_width_hz,
                                   sample_rate_hz, n)
        return 1.0 - _zero_phase_fir_response(taps, n)
    # bandpass = LP(f_hi) - LP(f_lo)
    lo_taps = _windowed_sinc_taps(spec.band_hz[0], spec.transition_width_hz,
                                  sample_rate_hz, n)
    hi_taps = _windowed_sinc_taps(spec.band_hz[1], spec.transition_width_hz,
                                  sample_rate_hz, n)
    return _zero_phase_fir_response(hi_taps, n) - _zero_phase_fir_response(lo_taps, n)


def apply_filter(wave: SampledWaveform, spec: FilterSpec) -> SampledWaveform:
    """Filter a waveform by frequency-domain multiplication (length preserved)."""
    h = filter_response(spec, wave.n, wave.sample_rate_hz)
    out = np.fft.ifft(np.fft.fft(wave.samples) * h)
    if wave.domain_tag in _REAL_TAGS:
        out = out.real
    return wave.with_samples(out)


# ---------------------------------------------------------------------------
# RRC design
# ---------------------------------------------------------------------------

def design_rrc(rolloff: float, span_symbols: int, samples_per_symbol: int) -> np.ndarray:
    """Root-raised-cosine taps, odd length ``span*sps + 1``, sum equal to sps.

    Normalized so the DC gain referred to the symbol stream is one: an
    interpolator built from these taps preserves symbol amplitude.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ParameterError("rolloff must lie in [0, 1]")
    if span_symbols <= 0 or samples_per_symbol <= 0:
        raise ParameterError("span and oversampling must be positive")

    n = span_symbols * samples_per_symbol + 1
    t = (np.arange(n) - (n - 1) / 2) / samples_per_symbol
    beta = float(rolloff)
    taps = np.zeros(n)

    if beta == 0.0:
        taps = np.sinc(t)
    else:
        singular = np.isclose(np.abs(t), 1.0 / (4 * beta))
        center = np.isclose(t, 0.0)
        safe = ~(singular | center)
        ts = t[safe]
        num = np.sin(np.pi * ts * (1 - beta)) + 4 * beta * ts * np.cos(
            np.pi * ts * (1 + beta)
        )
        den = np.pi * ts * (1 - (4 * beta * ts) ** 2)
        taps[safe] = num / den
        taps[center] = 1 - beta + 4 * beta / np.pi
        taps[singular] = (beta / np.sqrt(2)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
            + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
        )

    return taps * (samples_per_symbol / np.sum(taps))


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def resample(wave: SampledWaveform, target_rate_hz: float) -> SampledWaveform:
    """FFT-method rate conversion; exact for band-limited circular records.

    The record duration must map to an integer number of output samples
    (rational ratio precondition).
    """
    if target_rate_hz <= 0:
        raise ParameterError("target rate must be positive")
    if target_rate_hz == wave.sample_rate_hz:
        return wave
    n_out_f = wave.n * target_rate_hz / wave.sample_rate_hz
    n_out = int(round(n_out_f))
    if abs(n_out_f - n_out) > 1e-6 or n_out < 1:
        raise ParameterError(
            f"rate ratio {target_rate_hz}/{wave.sample_rate_hz} does not yield an "
            f"integer record length from {wave.n} samples"
        )
    out = _sig.resample(wave.samples, n_out)
    if wave.domain_tag in _REAL_TAGS:
        out = out.real
    return SampledWaveform(target_rate_hz, out, wave.domain_tag)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def nmse_db(reference: SampledWaveform | np.ndarray,
            test: SampledWaveform | np.ndarray) -> float:
    """10*log10(sum|ref-test|^2 / sum|ref|^2), floored at -200 dB."""
    ref = reference.samples if isinstance(reference, SampledWaveform) else np.asarray(reference)
    tst = test.samples if isinstance(test, SampledWaveform) else np.asarray(test)
    if isinstance(reference, SampledWaveform) and isinstance(test, SampledWaveform):
        if reference.sample_rate_hz != test.sample_rate_hz:
            raise ParameterError("sample rates differ")
    if ref.shape != tst.shape:
        raise ParameterError("length mismatch")
    denom = np.sum(np.abs(ref) ** 2)
    if denom == 0:
        raise ParameterError("zero-energy reference")
    err = np.sum(np.abs(ref - tst) ** 2)
    if err == 0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(err / denom), NMSE_FLOOR_DB)


def spectral_nmse_db(reference: SampledWaveform, test: SampledWaveform,
                     exclude_bands: Iterable[tuple[float, float]] = ()) -> float:
    """NMSE evaluated on the FFT grid with |f| inside exclude_bands masked out."""
    if reference.sample_rate_hz != test.sample_rate_hz or reference.n != test.n:
        raise ParameterError("waveforms must share grid")
    freqs = np.abs(np.fft.fftfreq(reference.n, d=1.0 / reference.sample_rate_hz))
    r = np.fft.fft(reference.samples)
    t = np.fft.fft(test.samples)
    keep = np.ones(reference.n, dtype=bool)
    for f_lo, f_hi in exclude_bands:
        keep &= ~((freqs >= f_lo) & (freqs <= f_hi))
    denom = np.sum(np.abs(r[keep]) ** 2)
    if denom == 0:
        raise ParameterError("zero reference energy outside excluded bands")
    err = np.sum(np.abs((r - t)[keep]) ** 2)
    if err == 0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(err / denom), NMSE_FLOOR_DB)


def tone_amplitude(wave: SampledWaveform, freq_hz: float) -> float:
    """Amplitude of the tone nearest freq_hz via single-bin DFT (real signals)."""
    n = wave.n
    k = int(round(freq_hz * n / wave.sample_rate_hz))
    bin_val = np.sum(wave.samples * np.exp(-2j * np.pi * k * np.arange(n) / n)) / n
    scale = 1.0 if k in (0, n // 2) else 2.0
    return scale * np.abs(bin_val)


def tone_phase(wave: SampledWaveform, freq_hz: float) -> float:
    """Phase (radians) of the bin nearest freq_hz."""
    n = wave.n
    k = int(round(freq_hz * n / wave.sample_rate_hz))
    return float(np.angle(np.sum(wave.samples * np.exp(-2j * np.pi * k * np.arange(n) / n))))


def band_energy_fraction(wave: SampledWaveform, f_lo_hz: float, f_hi_hz: float) -> float:
    """Fraction of total energy with |f| in [f_lo, f_hi]."""
    spec = np.abs(np.fft.fft(wave.samples)) ** 2
    freqs = np.abs(np.fft.fftfreq(wave.n, d=1.0 / wave.sample_rate_hz))
    total = np.sum(spec)
    if total == 0:
        return 0.0
    sel = (freqs >= f_lo_hz) & (freqs <= f_hi_hz)
    return float(np.sum(spec[sel]) / total)


def occupied_bandwidth(wave: SampledWaveform, fraction: float = 0.999) -> float:
    """Smallest f such that |f'| <= f holds `fraction` of the energy."""
    spec = np.abs(np.fft.fft(wave.samples)) ** 2
    freqs = np.abs(np.fft.fftfreq(wave.n, d=1.0 / wave.sample_rate_hz))
    order = np.argsort(freqs)
    cum = np.cumsum(spec[order])
    total = cum[-1]
    if total == 0:
        return 0.0
    idx = int(np.searchsorted(cum, fraction * total))
    return float(freqs[order][min(idx, wave.n - 1)])


def bin_centered_frequency(freq_hz: float, n: int, sample_rate_hz: float) -> float:
    """Snap a frequency to the nearest n-point FFT bin at the given rate."""
    return round(freq_hz * n / sample_rate_hz) * sample_rate_hz / n


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(np.asarray(x)) ** 2)))
