"""Flexible-duplex OFDM baseband with low-complexity nonlinear SI cancellation.

The package splits into small layers: ofdm (grids, symbols, transforms),
impairments (IQ imbalance and the odd-order amplifier polynomial),
channel (rays, arrays, beamformed effective channel), imd (distortion
bases, tuple-count and power-prediction tables, the impulse pilot),
sic (estimators, basis selection, the running canceller and baselines),
counters (arithmetic accounting), and scenario/cli (end-to-end runs).
"""

from .channel import (
    ArrayGeometry,
    BeamVector,
    ChannelProfile,
    EffectiveChannel,
    MimoTaps,
    Ray,
    apply_beams,
    apply_channel,
    array_response,
    build_mimo_taps,
    conjugate_beam,
    load_taps,
    save_taps,
    synth_channel,
    validate_rays,
)
from .counters import OpCounter
from .imd import (
    IMDTables,
    NonlinearBasis,
    PilotReport,
    basis_chain,
    basis_direct,
    default_pilot_omega,
    dump_imd_tables,
    imd_step,
    impulse_pilot,
    impulse_pilot_basis,
    lambda_dl,
    make_imd_tables,
    mu_tables,
    pilot_peak_sample,
    pilot_suppression,
    predict_si_power,
    q3_closed,
    q_size,
)
from .impairments import (
    IQImbalance,
    PAPolynomial,
    apply_iq_freq,
    apply_iq_time,
    apply_pa,
    default_measured_pa,
    irr_to_b,
)
from .ofdm import (
    DuplexMode,
    FreqSymbol,
    SubcarrierGrid,
    TimeSignal,
    add_cp,
    classify_duplex,
    dft,
    gen_qam_symbols,
    idft,
    mirror_index,
    mirror_values,
    qam_constellation,
    remove_cp,
)
from .scenario import (
    CANCELLERS,
    DUPLEX_PRESETS,
    MetricsReport,
    ScenarioSpec,
    duplex_allocation,
    emit_report,
    load_spec,
    residual_cdf,
    run_scenario,
    scenario_with,
    sicr,
    spec_from_dict,
    spec_to_dict,
)
from .sic import (
    EstimatorConfig,
    SICCoefficients,
    SingularSystemError,
    TrainingBuffer,
    TrainingEntry,
    baseline_full_ls,
    baseline_linear,
    estimate_channel,
    estimate_iq,
    estimate_linear_channel,
    estimate_pa,
    load_coefficients,
    ls_solve,
    perfect_coefficients,
    precombine,
    run_full_ls,
    run_sic,
    save_coefficients,
    select_basis,
)

__version__ = "0.1.0"
