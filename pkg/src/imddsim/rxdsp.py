"""Direct-detection receiver and metrology: photodiode, digitizer, frame
synchronization, T/2-spaced LMS equalizer, MAP decisions, bit LLRs,
GMI/NGMI estimation, code-rate lookup, and the net-bitrate formulas.

Bitrate conventions (symbol rate B in GBd, result in Gb/s):

- shaped PAM:   C = (H - (1 - R) * m) * B   with m label bits (4 for PAM12)
- uniform PAM8: C = 3 * R * B

R is the NGMI for the achievable bitrate and the required code rate for the
net bitrate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    EqualizerDivergenceError,
    NoRateError,
    ParameterError,
    SyncError,
)
from .shaping import SymbolFrame
from .sigcore import SampledWaveform, apply_filter, lowpass, resample, rms

LLR_CAP = 50.0


# ---------------------------------------------------------------------------
# opto-electronic front end
# ---------------------------------------------------------------------------

def photodetect(fld: SampledWaveform, bandwidth_hz: float = 100e9,
                responsivity: float = 1.0, thermal_noise_density: float = 0.0,
                seed: int | None = None) -> SampledWaveform:
    """Square-law detection: i = R |E|^2, seeded thermal noise, PD bandwidth.

    ``thermal_noise_density`` is the input-referred current noise PSD
    (A^2/Hz); per-sample variance is density times the simulation rate.
    """
    if fld.domain_tag != "optical_field":
        raise ParameterError("photodetect expects an optical field envelope")
    current = responsivity * np.abs(fld.samples) ** 2
    if thermal_noise_density > 0:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(thermal_noise_density * fld.sample_rate_hz)
        current = current + rng.normal(0, sigma, fld.n)
    wave = SampledWaveform(fld.sample_rate_hz, current, "photocurrent")
    return apply_filter(wave, lowpass(bandwidth_hz, analog=True, order=4))


def digitize(wave: SampledWaveform, rate_hz: float = 256e9,
             bandwidth_hz: float = 113e9, resolution_bits: int | None = None,
             seed: int | None = None) -> SampledWaveform:
    """Scope front end: bandwidth filter, resample to the ADC rate, optional
    uniform quantization. ``seed`` is accepted for interface parity; the
    quantizer is deterministic."""
    out = apply_filter(wave, lowpass(bandwidth_hz, analog=True, order=4))
    out = resample(out, rate_hz)
    if resolution_bits is not None:
        from .frontend import quantize_uniform

        out = out.with_samples(quantize_uniform(out.real, resolution_bits))
    return out


# ---------------------------------------------------------------------------
# synchronization
# ---------------------------------------------------------------------------

def synchronize(received: SampledWaveform, preamble_symbols: np.ndarray,
                samples_per_symbol: int = 2,
                peak_threshold: float = 8.0) -> tuple[SampledWaveform, float]:
    """Locate the frame by circular cross-correlation against the known
    preamble and re-time the record onto the symbol grid.

    Returns the aligned waveform and the delay estimate in samples (at the
    received rate). Polarity is left to the equalizer; the correlation uses
    magnitudes, so an inverted photocurrent still locks.
    """
    x = received.real - np.mean(received.real)
    template = np.zeros(received.n)
    pre = np.asarray(preamble_symbols, dtype=float)
    if pre.size * samples_per_symbol > received.n:
        raise ParameterError("preamble longer than the record")
    template[: pre.size * samples_per_symbol: samples_per_symbol] = pre

    corr = np.fft.ifft(np.fft.fft(x) * np.conj(np.fft.fft(template))).real
    mag = np.abs(corr)
    peak = int(np.argmax(mag))
    floor = rms(mag)
    if floor == 0 or mag[peak] / floor < peak_threshold:
        raise SyncError(
            f"correlation peak {mag[peak] / max(floor, 1e-300):.2f}x the floor "
            f"is below the {peak_threshold}x sync threshold"
        )

    # parabolic refinement on the magnitude peak
    a, b, c = mag[peak - 1], mag[peak], mag[(peak + 1) % len(mag)]
    denom = a - 2 * b + c
    frac = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    delay = peak + float(np.clip(frac, -0.5, 0.5))
    if delay > received.n / 2:
        delay -= received.n  # wrapped negative delay

    freqs = np.fft.fftfreq(received.n)
    aligned = np.fft.ifft(np.fft.fft(received.samples) * np.exp(2j * np.pi * freqs * delay))
    out = received.with_samples(
        aligned.real if received.domain_tag != "optical_field" else aligned
    )
    return out, delay


# ---------------------------------------------------------------------------
# adaptive equalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EqualizerState:
    taps: np.ndarray
    step_size: float
    training_symbols: int
    converged: bool
    final_mse: float

    @property
    def tap_count(self) -> int:
        return int(self.taps.size)


def ffe_train_apply(received: np.ndarray, reference_symbols: np.ndarray,
                    tap_count: int = 101, step_size: float = 1e-3,
                    train_fraction: float = 0.2,
                    train_passes: int = 1) -> tuple[np.ndarray, EqualizerState]:
    """Data-aided T/2-spaced LMS feed-forward equalizer.

    Adapts over the leading ``train_fraction`` of the reference (repeating
    the span ``train_passes`` times, as offline receivers do for channels
    with large eigenvalue spread), freezes the taps, and returns the
    equalized T-spaced symbols for the remainder of the record (normalized
    to the reference scale by construction).
    """
    if tap_count % 2 == 0:
        raise ParameterError("tap count must be odd (centered equalizer)")
    if train_passes < 1:
        raise ParameterError("train_passes must be >= 1")
    x = np.asarray(received, dtype=float)
    ref = np.asarray(reference_symbols, dtype=float)
    n_sym = min(x.size // 2, ref.size)
    if n_sym < 4 * tap_count:
        raise ParameterError("record too short for the requested equalizer")

    # scale the input to the reference power so the center-spike start is sane
    x = x * (rms(ref) / max(rms(x), 1e-300))
    half = (tap_count - 1) // 2
    # records are circular end to end; pad by wrapping
    xp = np.concatenate([x[-half:], x, x[: tap_count]])
    windows = np.lib.stride_tricks.sliding_window_view(xp, tap_count)

    w = np.zeros(tap_count)
    w[half] = 1.0
    n_train = int(n_sym * train_fraction)
    errs = np.empty(n_train)
    for _ in range(train_passes):
        for k in range(n_train):
            v = windows[2 * k]
            e = ref[k] - float(v @ w)
            errs[k] = e * e
            if step_size != 0.0:
                w = w + 2.0 * step_size * e * v

    converged = True
    window = max(1, n_train // 10)
    final_mse = float(np.mean(errs[-window:])) if n_train else 0.0
    if n_train >= 20:
        head = float(np.mean(errs[:window]))
        if final_mse > 10.0 * head:
            raise EqualizerDivergenceError(
                f"training MSE grew from {head:.3g} to {final_mse:.3g}; "
                "reduce the step size"
            )

    idx = 2 * np.arange(n_train, n_sym)
    out = np.empty(idx.size)
    chunk = 1 << 16
    for a in range(0, idx.size, chunk):
        out[a: a + chunk] = windows[idx[a: a + chunk]] @ w

    state = EqualizerState(w, step_size, n_train, converged, final_mse)
    return out, state


# ---------------------------------------------------------------------------
# decisions, LLRs, and mutual information
# ---------------------------------------------------------------------------

def decision_directed_variance(soft_symbols: np.ndarray,
                               levels: np.ndarray) -> float:
    """Noise-variance estimate from min-distance decision residuals."""
    y = np.asarray(soft_symbols, dtype=float)
    nearest = levels[np.argmin(np.abs(y[:, None] - levels[None, :]), axis=1)]
    return max(float(np.mean((y - nearest) ** 2)), 1e-30)


def decide_and_ber(soft_symbols: np.ndarray, frame: SymbolFrame,
                   noise_variance: float | None = None) -> tuple[float, np.ndarray]:
    """Prior-weighted (MAP) symbol decisions and the resulting bit error
    ratio over the label bits.

    With uniform priors the decision thresholds reduce to the midpoints. If
    the noise variance is not given it is estimated from decision-directed
    residuals of a uniform-prior pass.
    """
    y = np.asarray(soft_symbols, dtype=float)
    if y.size != frame.n:
        raise ParameterError("soft symbols and frame must have equal length")
    levels = frame.alphabet.levels
    priors = frame.distribution.probabilities

    if noise_variance is None:
        noise_variance = decision_directed_variance(y, levels)

    with np.errstate(divide="ignore"):
        log_priors = np.log(priors)
    score = log_priors[None, :] - (y[:, None] - levels[None, :]) ** 2 / (
        2.0 * noise_variance
    )
    hard = np.argmax(score, axis=1)
    tx_bits = frame.bits()
    rx_bits = frame.alphabet.labels[hard]
    ber = float(np.mean(tx_bits != rx_bits))
    return ber, hard


def llr_compute(soft_symbols: np.ndarray, frame: SymbolFrame,
                noise_variance: float | None = None) -> np.ndarray:
    """Per-bit LLR log[P(b=0|y)/P(b=1|y)] with shaping priors, stabilized
    through log-sum-exp. Returns an (n, label_bits) array.

    The noise variance is estimated from decision-directed residuals when
    not supplied."""
    y = np.asarray(soft_symbols, dtype=float)
    levels = frame.alphabet.levels
    if noise_variance is None:
        noise_variance = decision_directed_variance(y, levels)
    if noise_variance <= 0:
        raise ParameterError("noise variance must be positive")
    labels = frame.alphabet.labels
    priors = frame.distribution.probabilities
    with np.errstate(divide="ignore"):
        log_priors = np.log(priors)

    m = frame.alphabet.label_bits
    out = np.empty((y.size, m))
    chunk = 1 << 17
    for a in range(0, y.size, chunk):
        seg = y[a: a + chunk]
        metric = log_priors[None, :] - (seg[:, None] - levels[None, :]) ** 2 / (
            2.0 * noise_variance
        )
        for i in range(m):
            zero_set = labels[:, i] == 0
            num = logsumexp(metric[:, zero_set], axis=1)
            den = logsumexp(metric[:, ~zero_set], axis=1)
            out[a: a + chunk, i] = num - den
    return out


def gmi_ngmi(llrs: np.ndarray, transmitted_bits: np.ndarray,
             entropy_bits: float, label_bits: int) -> tuple[float, float]:
    """Mismatched-decoding GMI and its normalization.

    GMI = H - mean_n sum_i log2(1 + exp(+/- LLR)), the sign chosen so a
    confident correct LLR contributes ~0; NGMI = 1 - (H - GMI) / m. LLR
    magnitudes are capped at +-50 first.
    """
    llr = np.clip(np.asarray(llrs, dtype=float), -LLR_CAP, LLR_CAP)
    bits = np.asarray(transmitted_bits)
    if llr.shape != bits.shape:
        raise ParameterError("LLR and bit arrays must share shape")
    sign = np.where(bits == 1, 1.0, -1.0)
    deficit_bits = np.logaddexp(0.0, sign * llr) / np.log(2.0)
    gmi = entropy_bits - float(np.mean(np.sum(deficit_bits, axis=1)))
    ngmi = 1.0 - (entropy_bits - gmi) / label_bits
    return gmi, ngmi


# ---------------------------------------------------------------------------
# rate adaptation and bitrates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateTable:
    """(code rate, NGMI threshold) rows, both strictly increasing.

    Thresholds must not sit below their rates; that ordering is what makes
    net <= achievable hold for every measured NGMI. The default table is a
    declared placeholder (rates 0.60..0.95, threshold = rate + 0.02), not a
    calibrated FEC characterization.
    """

    rates: np.ndarray
    ngmi_thresholds: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        t = np.asarray(self.ngmi_thresholds, dtype=float)
        if r.size != t.size or r.size < 1:
            raise ParameterError("rate table needs matching non-empty columns")
        if np.any(np.diff(r) <= 0) or np.any(np.diff(t) <= 0):
            raise ParameterError("rates and thresholds must be strictly increasing")
        if np.any(r <= 0) or np.any(r > 1) or np.any(t <= 0) or np.any(t > 1):
            raise ParameterError("rates and thresholds must lie in (0, 1]")
        if np.any(t < r):
            raise ParameterError("each threshold must be >= its rate")
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "ngmi_thresholds", t)

    @classmethod
    def default(cls) -> "RateTable":
        rates = np.arange(0.60, 0.951, 0.05)
        return cls(rates, rates + 0.02)


def required_code_rate(ngmi: float, table: RateTable,
                       interpolate: bool = True) -> float:
    """Code rate predicted to decode error-free at the measured NGMI.

    Interpolation between rows is on by default (puncturing gives fine rate
    granularity); without it the lookup returns the largest tabulated rate
    whose threshold is met.
    """
    t = table.ngmi_thresholds
    r = table.rates
    if ngmi < t[0]:
        raise NoRateError(
            f"NGMI {ngmi:.4f} is below the lowest threshold {t[0]:.4f}"
        )
    if ngmi >= t[-1]:
        return float(r[-1])
    if not interpolate:
        return float(r[np.searchsorted(t, ngmi, side="right") - 1])
    return float(np.interp(ngmi, t, r))


def net_bitrate_ps(h_bits: float, code_rate: float, symbol_rate_gbd: float,
                   label_bits: int = 4) -> float:
    """Shaped-PAM bitrate (H - (1 - R) * m) * B in Gb/s.

    R = NGMI gives the achievable bitrate, R = required code rate the net
    bitrate. Negative results clamp to zero with a warning (over-parity).
    """
    if not 0 < code_rate <= 1:
        raise ParameterError("code rate must lie in (0, 1]")
    value = (h_bits - (1.0 - code_rate) * label_bits) * symbol_rate_gbd
    if value < 0:
        warnings.warn("parity overhead exceeds the shaped entropy; clamping to 0",
                      stacklevel=2)
        return 0.0
    return value


def net_bitrate_uniform(code_rate: float, symbol_rate_gbd: float,
                        bits_per_symbol: int = 3) -> float:
    """Uniform-PAM bitrate m * R * B in Gb/s (3RB for PAM8)."""
    if not 0 < code_rate <= 1:
        raise ParameterError("code rate must lie in (0, 1]")
    return bits_per_symbol * code_rate * symbol_rate_gbd


# ---------------------------------------------------------------------------
# run report
# ---------------------------------------------------------------------------

CSV_HEADER = (
    "symbol_rate_gbd,entropy_bits,label_bits,ber,gmi_bits,ngmi,"
    "required_code_rate,achievable_bitrate_gbps,net_bitrate_gbps,seed"
)


@dataclass(frozen=True)
class MetricsReport:
    """Per-run metrology outcome; the row format of every sweep table."""

    ber: float
    gmi_bits: float
    ngmi: float
    required_code_rate: float
    achievable_bitrate_gbps: float
    net_bitrate_gbps: float
    symbol_rate_gbd: float
    entropy_bits: float
    label_bits: int
    seed: int
    manifest_ref: str = ""

    def __post_init__(self):
        if not -1e-9 <= self.ngmi <= 1.0 + 1e-9:
            raise ParameterError(f"NGMI {self.ngmi} outside [0, 1]")
        if self.net_bitrate_gbps > self.achievable_bitrate_gbps + 1e-9:
            raise ParameterError("net bitrate exceeds achievable bitrate")
        if min(self.net_bitrate_gbps, self.achievable_bitrate_gbps) < 0:
            raise ParameterError("bitrates must be non-negative")

    def to_csv_row(self) -> str:
        return (
            f"{self.symbol_rate_gbd:.6g},{self.entropy_bits:.9g},{self.label_bits},"
            f"{self.ber:.6e},{self.gmi_bits:.9g},{self.ngmi:.9g},"
            f"{self.required_code_rate:.9g},{self.achievable_bitrate_gbps:.9g},"
            f"{self.net_bitrate_gbps:.9g},{self.seed}"
        )

    def to_dict(self) -> dict:
        return {
            "ber": self.ber,
            "gmi_bits": self.gmi_bits,
            "ngmi": self.ngmi,
            "required_code_rate": self.required_code_rate,
            "achievable_bitrate_gbps": self.achievable_bitrate_gbps,
            "net_bitrate_gbps": self.net_bitrate_gbps,
            "symbol_rate_gbd": self.symbol_rate_gbd,
            "entropy_bits": self.entropy_bits,
            "label_bits": self.label_bits,
            "seed": self.seed,
            "manifest_ref": self.manifest_ref,
        }
