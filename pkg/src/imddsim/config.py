"""Experiment configuration: the full link description, JSON persistence,
and the two built-in presets.

Presets encode the two experiment frequency plans: C-band runs digital cutoffs at
76 GHz, analog HPF at 75 GHz, LO at 72 GHz; O-band runs 82/82/76 GHz with an
extra 130-GHz amplifier in the upper path. Symbol rate defaults to 216 GBd
with RRC roll-off 0.01 on both.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import FiberSpec, OpticalAmpSpec
from .errors import ParameterError
from .frontend import AmplifierModel, LaserModel, MixerModel, MzmModel
from .rxdsp import RateTable
from .txdsp import BandPlan


@dataclass(frozen=True)
class DspConfig:
    rrc_rolloff: float = 0.01
    samples_per_symbol: int = 2
    rrc_span_symbols: int | None = None
    ffe_taps: int = 101
    ffe_step_size: float = 1e-3
    ffe_train_fraction: float = 0.2
    ffe_train_passes: int = 4
    preamble_symbols: int = 512
    volterra_enabled: bool = False
    volterra_memory_1: int = 31
    volterra_memory_2: int = 7
    volterra_memory_3: int = 7
    volterra_spread_2: int | None = 1
    volterra_spread_3: int | None = 1
    preemphasis_enabled: bool = True
    preemphasis_max_boost_db: float = 12.0
    ccdm_block_symbols: int = 65536


@dataclass(frozen=True)
class TxConfig:
    mixer: MixerModel
    mzm: MzmModel
    laser: LaserModel
    analog_rate_hz: float = 512e9
    awg_resolution_bits: int | None = None
    analog_hpf_transition_hz: float = 2e9
    upper_path_amplifier: AmplifierModel | None = None
    amplifier_chain: tuple[AmplifierModel, ...] = ()
    combiner_imbalance_db: float = 0.0
    combiner_skew_s: float = 0.0
    drive_peak_fraction_vpi: float = 0.25


@dataclass(frozen=True)
class RxConfig:
    pd_bandwidth_hz: float = 100e9
    pd_responsivity: float = 1.0
    pd_thermal_noise_density: float = 0.0
    dso_rate_hz: float = 256e9
    dso_bandwidth_hz: float = 113e9
    dso_resolution_bits: int | None = None


@dataclass(frozen=True)
class ChannelConfig:
    fiber: FiberSpec
    wavelength_nm: float
    amplifier: OpticalAmpSpec = OpticalAmpSpec()
    obpf_bandwidth_hz: float | None = None
    obpf_cd_trim_km: float = 0.0


@dataclass(frozen=True)
class LinkConfig:
    """Complete description of one end-to-end run."""

    plan: BandPlan
    tx: TxConfig
    rx: RxConfig
    channel: ChannelConfig
    band: str = "C"
    symbol_rate_gbd: float = 216.0
    modulation: str = "ps_pam12"  # ps_pam12 | uniform_pam8 | uniform_pamN
    pam_order: int = 12
    target_entropy_bits: float = 3.2
    sequence_length_symbols: int = 65536
    seed: int = 1
    rng_algorithm: str = "pcg64"  # pcg64 | mt19937
    dsp: DspConfig = DspConfig()
    rate_table_rates: tuple[float, ...] | None = None
    rate_table_thresholds: tuple[float, ...] | None = None
    rate_interpolation: bool = True
    hd_fec_overhead_deduction: bool = False

    def __post_init__(self):
        if self.band not in ("C", "O"):
            raise ParameterError("band must be 'C' or 'O'")
        if self.modulation not in ("ps_pam12", "uniform_pam8", "uniform_pamN"):
            raise ParameterError(f"unknown modulation {self.modulation!r}")
        if self.symbol_rate_gbd <= 0 or self.sequence_length_symbols < 1:
            raise ParameterError("symbol rate and sequence length must be positive")
        if self.rng_algorithm not in ("pcg64", "mt19937"):
            raise ParameterError("rng_algorithm must be pcg64 or mt19937")
        if (self.rate_table_rates is None) != (self.rate_table_thresholds is None):
            raise ParameterError("rate table needs both rates and thresholds")

    @property
    def symbol_rate_hz(self) -> float:
        return self.symbol_rate_gbd * 1e9

    def rate_table(self) -> RateTable:
        if self.rate_table_rates is None:
            return RateTable.default()
        return RateTable(np.asarray(self.rate_table_rates),
                         np.asarray(self.rate_table_thresholds))

    def with_seed(self, seed: int) -> "LinkConfig":
        return replace(self, seed=seed)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def c_band_216g(seed: int = 1) -> LinkConfig:
    """C-band PS-PAM12 over 11-km DSF: cutoffs 76/75 GHz, LO 72 GHz."""
    plan = BandPlan(76e9, 76e9, 75e9, 72e9)
    tx = TxConfig(
        mixer=MixerModel(72e9, bandwidth_hz=150e9),
        mzm=MzmModel(2.8, bandwidth_hz=110e9, bandwidth_atten_db=4.5),
        laser=LaserModel(1550.0, 20.0),
        amplifier_chain=(AmplifierModel(7.0, 130e9), AmplifierModel(16.0, 100e9)),
    )
    # DSF: zero dispersion near the carrier, ~+0.5 ps/nm/km residual at 1550
    chan = ChannelConfig(
        fiber=FiberSpec(11.0, zero_dispersion_wavelength_nm=1541.7,
                        dispersion_slope_ps_nm2_km=0.06,
                        attenuation_db_km=0.25, label="DSF-11km"),
        wavelength_nm=1550.0,
        amplifier=OpticalAmpSpec(gain_db=3.0, noise_spectral_density=3e-17,
                                 label="EDFA"),
        obpf_bandwidth_hz=300e9,
        obpf_cd_trim_km=11.0,
    )
    return LinkConfig(plan=plan, tx=tx, rx=RxConfig(), channel=chan, band="C",
                      modulation="ps_pam12", target_entropy_bits=3.2, seed=seed)


def o_band_216g(seed: int = 1) -> LinkConfig:
    """O-band uniform PAM8 over 2-km four-core fibre: 82/82 GHz, LO 76 GHz."""
    plan = BandPlan(82e9, 82e9, 82e9, 76e9)
    tx = TxConfig(
        mixer=MixerModel(76e9, bandwidth_hz=150e9),
        mzm=MzmModel(2.5, bandwidth_hz=110e9, bandwidth_atten_db=4.5),
        laser=LaserModel(1310.0, 20.0),
        upper_path_amplifier=AmplifierModel(7.0, 130e9),
        amplifier_chain=(AmplifierModel(7.0, 130e9), AmplifierModel(16.0, 100e9)),
    )
    chan = ChannelConfig(
        fiber=FiberSpec(2.0, zero_dispersion_wavelength_nm=1280.0,
                        dispersion_slope_ps_nm2_km=0.092,
                        attenuation_db_km=0.4, label="4CF-core-1"),
        wavelength_nm=1310.0,
        amplifier=OpticalAmpSpec(gain_db=3.0, noise_spectral_density=2e-17,
                                 label="PDFA"),
        obpf_bandwidth_hz=300e9,
    )
    return LinkConfig(plan=plan, tx=tx, rx=RxConfig(), channel=chan, band="O",
                      modulation="uniform_pam8", pam_order=8, seed=seed)


PRESETS = {
    "C-band-216G": c_band_216g,
    "O-band-216G": o_band_216g,
}


# ---------------------------------------------------------------------------
# JSON persistence
# ---------------------------------------------------------------------------

_MODEL_TYPES = {
    "plan": BandPlan,
    "mixer": MixerModel,
    "mzm": MzmModel,
    "laser": LaserModel,
    "upper_path_amplifier": AmplifierModel,
    "fiber": FiberSpec,
    "amplifier": OpticalAmpSpec,
    "tx": TxConfig,
    "rx": RxConfig,
    "channel": ChannelConfig,
    "dsp": DspConfig,
}


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if dataclasses.is_dataclass(value):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    return value


def config_to_dict(config: LinkConfig) -> dict:
    out = {}
    for f in dataclasses.fields(config):
        out[f.name] = _jsonable(getattr(config, f.name))
    out["schema_version"] = 1
    return out


def _build(cls, data: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data or data[f.name] is None:
            if f.name in data:
                kwargs[f.name] = None
            continue
        value = data[f.name]
        if f.name in _MODEL_TYPES and isinstance(value, dict):
            value = _build(_MODEL_TYPES[f.name], value)
        elif f.name == "amplifier_chain":
            value = tuple(_build(AmplifierModel, v) for v in value)
        elif f.name in ("gain_table_hz", "gain_table_db") and value is not None:
            value = np.asarray(value, dtype=float)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> LinkConfig:
    data = {k: v for k, v in data.items() if k != "schema_version"}
    return _build(LinkConfig, data)


def save_config(config: LinkConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True))


def load_config(path_or_preset: str | Path) -> LinkConfig:
    """Load a JSON config file; bare preset names resolve to built-ins."""
    name = str(path_or_preset)
    if name in PRESETS:
        return PRESETS[name]()
    p = Path(path_or_preset)
    if not p.exists():
        raise ParameterError(
            f"config {name!r} is neither a file nor one of {sorted(PRESETS)}"
        )
    return config_from_dict(json.loads(p.read_text()))
