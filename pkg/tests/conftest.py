import numpy as np
import pytest

from imddsim.channel import FiberSpec, OpticalAmpSpec
from imddsim.config import (
    ChannelConfig,
    DspConfig,
    LinkConfig,
    RxConfig,
    TxConfig,
)
from imddsim.frontend import LaserModel, MixerModel, MzmModel
from imddsim.txdsp import BandPlan

# rate table extended to 1.0 so a transparent link reports net = gross
IDEAL_RATES = tuple(np.round(np.arange(0.60, 0.951, 0.05), 2)) + (1.0,)
IDEAL_THRESHOLDS = tuple(np.round(np.arange(0.62, 0.971, 0.05), 2)) + (1.0,)


def fast_link_config(seed=1, modulation="ps_pam12", noise_density=0.0,
                     n_symbols=4096, **overrides) -> LinkConfig:
    """Small, quick-to-run link: wide-open devices, zero-length fiber."""
    plan = BandPlan(76e9, 76e9, 75e9, 72e9, awg_bandwidth_hz=120e9)
    tx = TxConfig(
        mixer=MixerModel(72e9, bandwidth_hz=1e15),
        mzm=MzmModel(2.8, bandwidth_hz=1e15),
        laser=LaserModel(1550.0, 20.0),
        amplifier_chain=(),
        drive_peak_fraction_vpi=0.12,
    )
    rx = RxConfig(pd_bandwidth_hz=1e15, dso_bandwidth_hz=1e15)
    chan = ChannelConfig(
        fiber=FiberSpec(0.0),
        wavelength_nm=1550.0,
        amplifier=OpticalAmpSpec(0.0, noise_density),
    )
    dsp = DspConfig(ffe_taps=63, ffe_step_size=3e-3, ffe_train_fraction=0.3,
                    ffe_train_passes=4, preemphasis_enabled=False,
                    ccdm_block_symbols=n_symbols)
    kwargs = dict(
        plan=plan, tx=tx, rx=rx, channel=chan, band="C",
        modulation=modulation, pam_order=12 if modulation == "ps_pam12" else 8,
        target_entropy_bits=3.2, sequence_length_symbols=n_symbols, seed=seed,
        dsp=dsp, rate_table_rates=IDEAL_RATES,
        rate_table_thresholds=IDEAL_THRESHOLDS,
    )
    kwargs.update(overrides)
    return LinkConfig(**kwargs)


@pytest.fixture
def fast_config():
    return fast_link_config()
