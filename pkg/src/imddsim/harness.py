"""End-to-end run orchestration: seeded deterministic link simulation,
parameter sweeps, and result persistence (CSV, SVG, run manifest).

A run walks shaping -> Tx DSP -> analog front end -> fiber -> receiver ->
metrology. Record lengths are snapped so every rate conversion in the chain
(AWG, analog, scope, 2-samples/symbol) lands on an integer sample count,
keeping the whole pipeline exact-rational and circular.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import signal as _sig

from . import __version__
from .config import LinkConfig, config_to_dict
from .channel import obpf, optical_amplify, propagate
from .errors import ParameterError, StageError
from .frontend import (
    amplify,
    combine,
    dac,
    mixer_upconvert,
    mzm_modulate,
)
from .rxdsp import (
    CSV_HEADER,
    MetricsReport,
    decide_and_ber,
    digitize,
    ffe_train_apply,
    gmi_ngmi,
    llr_compute,
    net_bitrate_ps,
    net_bitrate_uniform,
    photodetect,
    required_code_rate,
    synchronize,
)
from .shaping import (
    PamAlphabet,
    SymbolFrame,
    ccdm_encode,
    ccdm_input_bits,
    composition_from_distribution,
    entropy_bits,
    magnitude_distribution,
    maxwell_boltzmann,
    nu_for_entropy,
    pas_assemble,
    uniform_frame,
)
from .sigcore import SampledWaveform, apply_filter, highpass, resample
from .txdsp import (
    VolterraStructure,
    apply_volterra,
    band_split,
    fit_volterra,
    linear_preemphasis,
    rrc_upsample,
)


# ---------------------------------------------------------------------------
# deterministic randomness
# ---------------------------------------------------------------------------

_RNG_ROLES = ("data_bits", "sign_bits", "ase", "thermal", "dpd")


def _spawn_rngs(config: LinkConfig) -> dict:
    children = np.random.SeedSequence(config.seed).spawn(len(_RNG_ROLES))
    bitgen = np.random.PCG64 if config.rng_algorithm == "pcg64" else np.random.MT19937
    return {role: np.random.Generator(bitgen(child))
            for role, child in zip(_RNG_ROLES, children)}


def rng_description(config: LinkConfig) -> str:
    name = "PCG64" if config.rng_algorithm == "pcg64" else "MT19937"
    return f"numpy.{name} (numpy {np.__version__})"


def feasible_sequence_length(requested: int, symbol_rate_hz: float,
                             rates_hz: tuple[float, ...]) -> int:
    """Nearest symbol count for which every stage rate yields an integer
    record length."""
    b = int(round(symbol_rate_hz))
    den = 1
    for r in rates_hz:
        ri = int(round(r))
        den = den * (b // math.gcd(b, ri)) // math.gcd(den, b // math.gcd(b, ri))
    return max(den, round(requested / den) * den)


# ---------------------------------------------------------------------------
# stage helpers
# ---------------------------------------------------------------------------

def _build_frame(config: LinkConfig, rng_data, rng_signs) -> SymbolFrame:
    n = config.sequence_length_symbols
    if config.modulation == "ps_pam12":
        alphabet = PamAlphabet.pam12()
        nu = nu_for_entropy(config.target_entropy_bits, alphabet)
        dist = maxwell_boltzmann(nu, alphabet)
        p_mag = magnitude_distribution(dist, alphabet)
        classes = []
        remaining = n
        block = max(1, min(config.dsp.ccdm_block_symbols, n))
        while remaining > 0:
            size = min(block, remaining)
            comp = composition_from_distribution(p_mag, size)
            bits = rng_data.integers(0, 2, size=ccdm_input_bits(comp))
            classes.append(ccdm_encode(bits, comp))
            remaining -= size
        signs = rng_signs.integers(0, 2, size=n)
        return pas_assemble(np.concatenate(classes), signs, alphabet, dist)
    order = 8 if config.modulation == "uniform_pam8" else config.pam_order
    return uniform_frame(PamAlphabet.uniform(order), n, rng_data)


def _bessel_magnitude(freq_hz: np.ndarray, cutoff_hz: float, order: int) -> np.ndarray:
    b, a = _sig.bessel(order, 2 * np.pi * cutoff_hz, btype="low", analog=True,
                       norm="mag")
    _, h = _sig.freqs(b, a, worN=2 * np.pi * np.abs(freq_hz))
    return np.abs(h)


def _tx_chain_magnitude(config: LinkConfig, rf_freq_hz: np.ndarray,
                        upper_path: bool) -> np.ndarray:
    """Magnitude of the device chain from one AWG port to the MZM, used by
    the pre-emphasis stage. Upper-path frequencies are RF (post-mixer)."""
    from .frontend import _mzm_bandwidth_cutoff

    tx = config.tx
    mag = np.ones_like(rf_freq_hz, dtype=float)
    if upper_path:
        mag *= tx.mixer.gain_linear(rf_freq_hz)
        mag /= max(tx.mixer.gain_linear(np.array([0.0]))[0], 1e-12)
        if tx.upper_path_amplifier is not None:
            amp = tx.upper_path_amplifier
            mag *= _bessel_magnitude(rf_freq_hz, amp.bandwidth_hz, amp.bandwidth_order)
    for amp in tx.amplifier_chain:
        mag *= _bessel_magnitude(rf_freq_hz, amp.bandwidth_hz, amp.bandwidth_order)
    mag *= _bessel_magnitude(rf_freq_hz, _mzm_bandwidth_cutoff(tx.mzm), 2)
    return mag


def _preemphasize(config: LinkConfig, lower: SampledWaveform,
                  upper: SampledWaveform) -> tuple[SampledWaveform, SampledWaveform]:
    plan = config.plan
    nyq = plan.awg_rate_hz / 2
    f = np.linspace(0.0, nyq, 2049)
    zoh_awg = np.abs(np.sinc(f / plan.awg_rate_hz)) * _bessel_magnitude(
        f, plan.awg_bandwidth_hz, 4
    )
    resp_lower = zoh_awg * _tx_chain_magnitude(config, f, upper_path=False)
    resp_upper = zoh_awg * _tx_chain_magnitude(
        config, f + plan.lo_frequency_hz, upper_path=True
    )
    boost = config.dsp.preemphasis_max_boost_db
    lower = linear_preemphasis(lower, f, resp_lower / resp_lower.max(), boost)
    upper = linear_preemphasis(upper, f, resp_upper / resp_upper.max(), boost)
    return lower, upper


def _transmit(config: LinkConfig, tx_symbols: np.ndarray) -> SampledWaveform:
    """Symbols to modulated optical field."""
    dsp, tx, plan = config.dsp, config.tx, config.plan
    wide = rrc_upsample(tx_symbols, dsp.samples_per_symbol, dsp.rrc_rolloff,
                        config.symbol_rate_hz, dsp.rrc_span_symbols)
    lower, upper = band_split(wide, plan)
    if dsp.preemphasis_enabled:
        lower, upper = _preemphasize(config, lower, upper)

    analog = tx.analog_rate_hz
    lower_a = dac(lower, analog, plan.awg_bandwidth_hz, tx.awg_resolution_bits)
    upper_a = dac(upper, analog, plan.awg_bandwidth_hz, tx.awg_resolution_bits)
    # path alignment: the AWG response delays the IF arm, which up-converts
    # into a constant phase offset between the bands; the LO phase absorbs it
    # (the lab equivalent is tuning the LO path length)
    from .frontend import bessel_group_delay_dc

    tau_if = bessel_group_delay_dc(plan.awg_bandwidth_hz, 4)
    mixer = replace(tx.mixer,
                    lo_phase_rad=tx.mixer.lo_phase_rad
                    - 2 * np.pi * plan.lo_frequency_hz * tau_if)
    upper_rf = mixer_upconvert(upper_a, mixer)
    upper_rf = apply_filter(
        upper_rf,
        highpass(plan.analog_hpf_cutoff_hz, tx.analog_hpf_transition_hz),
    )
    if tx.upper_path_amplifier is not None:
        upper_rf = amplify(upper_rf, tx.upper_path_amplifier)
    wideband = combine(lower_a, upper_rf, tx.combiner_imbalance_db, tx.combiner_skew_s)
    for amp in tx.amplifier_chain:
        wideband = amplify(wideband, amp)

    peak = np.max(np.abs(wideband.real))
    drive = wideband.with_samples(
        wideband.real * (tx.drive_peak_fraction_vpi * tx.mzm.v_pi_volts / peak)
    )
    return mzm_modulate(drive, tx.laser, tx.mzm)


def _through_channel(config: LinkConfig, field: SampledWaveform,
                     seed_ase) -> SampledWaveform:
    chan = config.channel
    field = propagate(field, chan.fiber, chan.wavelength_nm)
    field = optical_amplify(field, chan.amplifier, seed_ase)
    if chan.obpf_bandwidth_hz is not None or chan.obpf_cd_trim_km > 0:
        nyq = field.sample_rate_hz / 2
        f = np.linspace(0.0, nyq, 8193)
        resp = np.ones_like(f, dtype=complex)
        if chan.obpf_bandwidth_hz is not None:
            resp[f > chan.obpf_bandwidth_hz / 2] = 0.0
        if chan.obpf_cd_trim_km > 0:
            from scipy.constants import c as c_m_s

            from .channel import dispersion_coefficient

            d_si = dispersion_coefficient(chan.wavelength_nm, chan.fiber) * 1e-6
            lam = chan.wavelength_nm * 1e-9
            phase = (np.pi * lam**2 * d_si * chan.obpf_cd_trim_km * 1e3
                     * f**2 / c_m_s)
            resp = resp * np.exp(-1j * phase)
        field = obpf(field, f, resp)
    return field


def _receive(config: LinkConfig, field: SampledWaveform, reference: np.ndarray,
             seed_thermal) -> tuple[np.ndarray, int]:
    """Field to equalized T-spaced symbols; returns (symbols, train_count)."""
    rx, dsp = config.rx, config.dsp
    current = photodetect(field, rx.pd_bandwidth_hz, rx.pd_responsivity,
                          rx.pd_thermal_noise_density, seed_thermal)
    digital = digitize(current, rx.dso_rate_hz, rx.dso_bandwidth_hz,
                       rx.dso_resolution_bits)
    centered = digital.with_samples(digital.real - np.mean(digital.real))
    two_sps = resample(centered, dsp.samples_per_symbol * config.symbol_rate_hz)
    aligned, _ = synchronize(two_sps, reference[: dsp.preamble_symbols],
                             dsp.samples_per_symbol)
    eq, state = ffe_train_apply(aligned.real, reference, dsp.ffe_taps,
                                dsp.ffe_step_size, dsp.ffe_train_fraction,
                                dsp.ffe_train_passes)
    return eq, state.training_symbols


def _volterra_structure(dsp) -> VolterraStructure:
    return VolterraStructure(dsp.volterra_memory_1, dsp.volterra_memory_2,
                             dsp.volterra_memory_3, dsp.volterra_spread_2,
                             dsp.volterra_spread_3)


def _train_dpd(config: LinkConfig, rngs: dict):
    """Indirect-learning pre-distorter fitted on an independent seed."""
    train_seed = int(rngs["dpd"].integers(0, 2**31 - 1))
    train_cfg = replace(config, seed=train_seed,
                        dsp=replace(config.dsp, volterra_enabled=False))
    sub = _spawn_rngs(train_cfg)
    frame = _build_frame(train_cfg, sub["data_bits"], sub["sign_bits"])
    symbols = frame.levels()
    field = _transmit(train_cfg, symbols)
    field = _through_channel(train_cfg, field, sub["ase"])
    eq, n_train = _receive(train_cfg, field, symbols, sub["thermal"])
    fit = fit_volterra(symbols[n_train:], eq, _volterra_structure(config.dsp))
    return fit.kernel


# ---------------------------------------------------------------------------
# run_link
# ---------------------------------------------------------------------------

def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def resolve_sequence_length(config: LinkConfig) -> int:
    return feasible_sequence_length(
        config.sequence_length_symbols, config.symbol_rate_hz,
        (config.plan.awg_rate_hz, config.tx.analog_rate_hz, config.rx.dso_rate_hz),
    )


def run_link(config: LinkConfig) -> MetricsReport:
    """Execute one deterministic end-to-end run and report its metrology."""
    top = (1 + config.dsp.rrc_rolloff) * config.symbol_rate_hz / 2
    if top > config.plan.lo_frequency_hz + config.plan.awg_bandwidth_hz:
        raise StageError(
            "txdsp",
            ParameterError(
                f"signal edge {top / 1e9:.1f} GHz exceeds the reconstructible band"
            ),
        )

    config = replace(config, sequence_length_symbols=resolve_sequence_length(config))
    rngs = _spawn_rngs(config)

    frame = _stage("shaping", _build_frame, config, rngs["data_bits"], rngs["sign_bits"])
    symbols = frame.levels()

    tx_symbols = symbols
    if config.dsp.volterra_enabled:
        kernel = _stage("dpd_training", _train_dpd, config, rngs)
        tx_symbols = _stage("txdsp", apply_volterra, symbols, kernel)

    field = _stage("frontend", _transmit, config, tx_symbols)
    field = _stage("channel", _through_channel, config, field, rngs["ase"])
    eq, n_train = _stage("rxdsp", _receive, config, field, symbols, rngs["thermal"])

    eval_frame = SymbolFrame(frame.indices[n_train:], frame.alphabet,
                             frame.distribution)
    ber, hard = _stage("metrology", decide_and_ber, eq, eval_frame)
    residual = eq - eval_frame.alphabet.levels[hard]
    sigma2 = max(float(np.mean(residual**2)), 1e-30)
    llr = _stage("metrology", llr_compute, eq, eval_frame, sigma2)

    h_bits = entropy_bits(frame.distribution)
    m = frame.alphabet.label_bits
    gmi, ngmi = gmi_ngmi(llr, eval_frame.bits(), h_bits, m)
    ngmi = min(ngmi, 1.0)
    rate = _stage("metrology", required_code_rate, ngmi, config.rate_table(),
                  config.rate_interpolation)

    b_gbd = config.symbol_rate_gbd
    if config.modulation == "ps_pam12":
        achievable = net_bitrate_ps(h_bits, ngmi, b_gbd, m)
        net = net_bitrate_ps(h_bits, rate, b_gbd, m)
    else:
        achievable = net_bitrate_uniform(ngmi, b_gbd, m)
        net = net_bitrate_uniform(rate, b_gbd, m)
    if config.hd_fec_overhead_deduction:
        net /= 1.0079

    return MetricsReport(
        ber=ber, gmi_bits=gmi, ngmi=ngmi, required_code_rate=rate,
        achievable_bitrate_gbps=achievable, net_bitrate_gbps=net,
        symbol_rate_gbd=b_gbd, entropy_bits=h_bits, label_bits=m,
        seed=config.seed,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    parameter: float
    report: MetricsReport | None
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    parameter_name: str
    rows: tuple[SweepRow, ...]

    def reports(self) -> list[MetricsReport]:
        return [r.report for r in self.rows if r.report is not None]


def _run_rows(base: LinkConfig, name: str, values, make_config) -> SweepResult:
    rows = []
    for i, value in enumerate(values):
        cfg = make_config(value).with_seed(base.seed + i)
        try:
            rows.append(SweepRow(float(value), run_link(cfg)))
        except Exception as exc:  # per-row failures recorded, sweep continues
            rows.append(SweepRow(float(value), None, error=str(exc)))
    rows.sort(key=lambda r: r.parameter)
    return SweepResult(name, tuple(rows))


def sweep_entropy(base: LinkConfig, entropies) -> SweepResult:
    """One run per target entropy; per-point seeds are base.seed + index,
    so duplicate entropies yield distinct-seed rows."""
    if base.modulation != "ps_pam12":
        raise ParameterError("entropy sweeps require ps_pam12 modulation")
    result = _run_rows(base, "entropy_bits", entropies,
                       lambda h: replace(base, target_entropy_bits=float(h)))
    good = [(r.parameter, r.report.achievable_bitrate_gbps)
            for r in result.rows if r.report]
    if len(good) >= 3:
        vals = [v for _, v in good]
        peak = int(np.argmax(vals))
        tol = 3.0  # Gb/s, desk-scale run-to-run spread
        rising = all(vals[i + 1] >= vals[i] - tol for i in range(peak))
        falling = all(vals[i + 1] <= vals[i] + tol for i in range(peak, len(vals) - 1))
        if not (rising and falling):
            warnings.warn(
                "achievable-bitrate curve is not unimodal/saturating across the "
                "entropy sweep", stacklevel=2,
            )
    return result


def sweep_symbol_rate(base: LinkConfig, rates_gbd) -> SweepResult:
    """One run per symbol rate; record lengths and filters re-derive per rate."""
    return _run_rows(base, "symbol_rate_gbd", rates_gbd,
                     lambda r: replace(base, symbol_rate_gbd=float(r)))


def sweep_cores(base: LinkConfig, n_cores: int) -> SweepResult:
    """Per-core batch over the uncoupled multicore fibre (distinct seeds)."""
    from .channel import multicore_batch

    configs = []
    for k in range(n_cores):
        fiber = replace(base.channel.fiber, label=f"4CF-core-{k + 1}")
        configs.append(replace(base, seed=base.seed + k,
                               channel=replace(base.channel, fiber=fiber)))
    reports = multicore_batch(configs)
    rows = tuple(SweepRow(float(k + 1), rep) for k, rep in enumerate(reports))
    return SweepResult("core", rows)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def sweep_to_csv(result: SweepResult) -> str:
    lines = [f"{result.parameter_name},{CSV_HEADER},error"]
    for row in result.rows:
        if row.report is not None:
            lines.append(f"{row.parameter:.9g},{row.report.to_csv_row()},")
        else:
            blanks = "," * len(CSV_HEADER.split(","))
            message = row.error.replace(",", ";").replace("\n", " ")
            lines.append(f"{row.parameter:.9g}{blanks},{message}")
    return "\n".join(lines) + "\n"


def _svg_plot(result: SweepResult) -> str:
    """Small deterministic SVG line/scatter plot of the sweep bitrates."""
    rows = [r for r in result.rows if r.report is not None]
    xs = [r.parameter for r in rows]
    series = {
        "achievable": [r.report.achievable_bitrate_gbps for r in rows],
        "net": [r.report.net_bitrate_gbps for r in rows],
    }
    width, height, margin = 640, 420, 60
    x0, x1 = min(xs), max(xs)
    ys_all = series["achievable"] + series["net"]
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" '
        f'font-size="14">{result.parameter_name}</text>',
        f'<text x="18" y="{height / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {height / 2:.1f})">bitrate (Gb/s)</text>',
        f'<text x="{margin}" y="{height - margin + 18}" font-size="11" '
        f'text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 18}" font-size="11" '
        f'text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{margin - 6}" y="{height - margin}" font-size="11" '
        f'text-anchor="end">{y0:.4g}</text>',
        f'<text x="{margin - 6}" y="{margin + 4}" font-size="11" '
        f'text-anchor="end">{y1:.4g}</text>',
    ]
    colors = {"achievable": "#1f77b4", "net": "#d62728"}
    for label, ys in series.items():
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{colors[label]}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                         f'fill="{colors[label]}"/>')
    parts.append(f'<text x="{width - margin}" y="{margin - 10}" font-size="12" '
                 f'text-anchor="end" fill="#1f77b4">achievable</text>')
    parts.append(f'<text x="{width - margin}" y="{margin + 6}" font-size="12" '
                 f'text-anchor="end" fill="#d62728">net</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class RunManifest:
    config: dict
    seed: int
    artifact_version: str
    rng: str
    created_utc: str
    input_digest: str
    outputs: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=list)


def build_manifest(config: LinkConfig, outputs: tuple[str, ...]) -> RunManifest:
    cfg_dict = config_to_dict(config)
    canonical = json.dumps(cfg_dict, sort_keys=True) + f"|seed={config.seed}|v={__version__}"
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    return RunManifest(
        config=cfg_dict,
        seed=config.seed,
        artifact_version=__version__,
        rng=rng_description(config),
        created_utc=datetime.now(timezone.utc).isoformat(),
        input_digest=digest,
        outputs=outputs,
    )


def emit_outputs(result: SweepResult, out_dir: str | Path,
                 config: LinkConfig | None = None) -> list[Path]:
    """Write sweep.csv (stable formatting), plot.svg (when there is data),
    and manifest.json; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "sweep.csv"
    csv_path.write_text(sweep_to_csv(result))
    written.append(csv_path)

    if result.reports():
        svg_path = out / "plot.svg"
        svg_path.write_text(_svg_plot(result))
        written.append(svg_path)

    if config is not None:
        manifest = build_manifest(config, tuple(str(p) for p in written))
        man_path = out / "manifest.json"
        man_path.write_text(manifest.to_json())
        written.append(man_path)
    return written


def dump_waveform(wave: SampledWaveform, path: str | Path) -> None:
    """CSV waveform dump: one header line, then re,im rows at the stated rate."""
    lines = [f"# sample_rate_hz={wave.sample_rate_hz:.17g} domain={wave.domain_tag}"]
    lines.extend(f"{s.real:.17g},{s.imag:.17g}" for s in wave.samples)
    Path(path).write_text("\n".join(lines) + "\n")


def load_waveform(path: str | Path) -> SampledWaveform:
    text = Path(path).read_text().strip().splitlines()
    header = text[0].lstrip("# ").split()
    rate = float(header[0].split("=")[1])
    domain = header[1].split("=")[1]
    vals = np.array([[float(a), float(b)] for a, b in
                     (line.split(",") for line in text[1:])])
    return SampledWaveform(rate, vals[:, 0] + 1j * vals[:, 1], domain)
