"""End-to-end duplexing scenarios: simulate, cancel, report.

A ScenarioSpec pins down everything about one experiment: the grid and
band allocation, the transmitter impairments, the self-interference
channel, power levels, the estimator knobs, and which cancellers to
compare. run_scenario simulates the training window, fits each
canceller, replays a shared batch of data symbols through all of them,
and returns per-subcarrier residual spectra, residual-power CDF samples,
cancellation ratios, and per-stage arithmetic counters.

Power bookkeeping: the per-subcarrier transmit power after the linear
amplifier gain, |a_1 a_digi|^2 in internal units, is pinned to
tx_power_dbm. Every reported dBm figure uses that anchor, and the noise
floor is placed noise_dbm below it.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import (
    ArrayGeometry,
    ChannelProfile,
    EffectiveChannel,
    apply_beams,
    apply_channel,
    build_mimo_taps,
    conjugate_beam,
    load_taps,
    synth_channel,
)
from .counters import OpCounter
from .imd import default_pilot_omega, impulse_pilot, make_imd_tables
from .impairments import (
    IQImbalance,
    PAPolynomial,
    apply_iq_time,
    apply_pa,
    default_measured_pa,
    irr_to_b,
)
from .ofdm import (
    FreqSymbol,
    SubcarrierGrid,
    TimeSignal,
    add_cp,
    gen_qam_symbols,
    idft,
    remove_cp,
)
from .sic import (
    EstimatorConfig,
    SICCoefficients,
    TrainingBuffer,
    TrainingEntry,
    baseline_full_ls,
    baseline_linear,
    estimate_channel,
    estimate_iq,
    estimate_linear_channel,
    estimate_pa,
    precombine,
    run_full_ls,
    run_sic,
    select_basis,
)

CANCELLERS = ("none", "linear", "proposed", "full_ls", "iq_only", "pa_only")
DUPLEX_PRESETS = ("ibfd", "sbfd", "overlap")

_FLOOR = 1e-300


def duplex_allocation(preset: str, num_subcarriers: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Band spans (dl, ul) for a named preset, scaled to the grid size.

    ibfd shares one mirror-symmetric band between both directions; sbfd
    splits them with a guard wide enough that the uplink clears both the
    downlink band and its mirror image; overlap slides the uplink onto
    the upper half of the downlink band.
    """
    p = num_subcarriers
    if preset == "ibfd":
        start = round(0.109 * p)
        span = (start, p - start)
        return span, span
    if preset == "sbfd":
        return (round(0.109 * p), round(0.758 * p)), (round(0.898 * p), round(0.988 * p))
    if preset == "overlap":
        return (round(0.109 * p), round(0.758 * p)), (round(0.586 * p), round(0.883 * p))
    raise ValueError(f"unknown duplex preset {preset!r}; expected one of {DUPLEX_PRESETS}")


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete description of one experiment.

    duplex is a preset name or "custom", in which case dl_span/ul_span
    (inclusive subcarrier ranges) must be given. pa_coeffs of None
    selects the measured amplifier polynomial. gamma_dbm of None puts
    the basis-selection threshold at the noise floor.
    """

    num_subcarriers: int = 256
    subcarrier_spacing: float = 60e3
    cp_length: int = 32
    duplex: str = "ibfd"
    dl_span: tuple[int, int] | None = None
    ul_span: tuple[int, int] | None = None
    pa_coeffs: dict[int, complex] | None = None
    irr_db: float = 25.0
    iq_phase: float = 0.3
    tap_file: str | None = None
    channel: ChannelProfile = field(default_factory=ChannelProfile)
    tx_array: tuple[int, int, float] = (4, 4, 0.5)
    rx_array: tuple[int, int, float] = (4, 4, 0.5)
    dl_beam_angle: float = 0.4
    ul_beam_angle: float = -0.4
    noise_dbm: float = -90.0
    tx_power_dbm: float = 23.0
    pa_drive_rms: float = 0.5
    qam_order: int = 16
    gamma_dbm: float | None = None
    k_max: int = 2
    n_impulse_symbols: int = 4
    n_train_symbols: int = 14
    regularization: float = 0.0
    impulse_amp_range: tuple[float, float] = (0.6, 2.0)
    seed: int = 1
    n_run_symbols: int = 20
    cancellers: tuple[str, ...] = ("none", "linear", "proposed")

    def __post_init__(self):
        if self.duplex not in DUPLEX_PRESETS + ("custom",):
            raise ValueError(
                f"duplex={self.duplex!r} is not a preset ({', '.join(DUPLEX_PRESETS)}) or 'custom'"
            )
        if self.duplex == "custom" and (self.dl_span is None or self.ul_span is None):
            raise ValueError("duplex='custom' requires dl_span and ul_span")
        if not self.noise_dbm < self.tx_power_dbm:
            raise ValueError(
                f"noise_dbm={self.noise_dbm} must lie below tx_power_dbm={self.tx_power_dbm}"
            )
        bad = [c for c in self.cancellers if c not in CANCELLERS]
        if bad:
            raise ValueError(f"unknown cancellers {bad}; valid names are {CANCELLERS}")
        if len(set(self.cancellers)) != len(self.cancellers):
            raise ValueError("cancellers must not repeat")
        if self.tap_file is not None and not os.path.exists(self.tap_file):
            raise ValueError(f"tap_file does not exist: {self.tap_file}")
        if self.pa_drive_rms <= 0:
            raise ValueError("pa_drive_rms must be positive")
        if self.n_run_symbols < 1:
            raise ValueError("n_run_symbols must be at least 1")

    def build_grid(self) -> SubcarrierGrid:
        if self.duplex == "custom":
            dl_span, ul_span = self.dl_span, self.ul_span
        else:
            dl_span, ul_span = duplex_allocation(self.duplex, self.num_subcarriers)
        return SubcarrierGrid(
            num_subcarriers=self.num_subcarriers,
            subcarrier_spacing=self.subcarrier_spacing,
            cp_length=self.cp_length,
            dl_set=tuple(dl_span),
            ul_set=tuple(ul_span),
        )

    def build_pa(self) -> PAPolynomial:
        if self.pa_coeffs is None:
            return default_measured_pa()
        return PAPolynomial({int(k): complex(v) for k, v in self.pa_coeffs.items()})

    def build_imbalance(self) -> IQImbalance:
        return irr_to_b(self.irr_db, self.iq_phase)

    def estimator_config(self, gamma: float) -> EstimatorConfig:
        return EstimatorConfig(
            gamma=gamma,
            k_max=self.k_max,
            n_impulse_symbols=self.n_impulse_symbols,
            n_train_symbols=self.n_train_symbols,
            regularization=self.regularization,
            impulse_amp_range=self.impulse_amp_range,
        )


_SPEC_FIELDS = {f.name for f in fields(ScenarioSpec)}
_PROFILE_FIELDS = {f.name for f in fields(ChannelProfile)}


def spec_from_dict(data: dict) -> ScenarioSpec:
    """Build a ScenarioSpec from parsed config data; unknown keys error out."""
    unknown = sorted(set(data) - _SPEC_FIELDS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = dict(data)
    if "channel" in kwargs and not isinstance(kwargs["channel"], ChannelProfile):
        chan = kwargs["channel"]
        bad = sorted(set(chan) - _PROFILE_FIELDS)
        if bad:
            raise ValueError(f"unknown channel keys: {', '.join(bad)}")
        kwargs["channel"] = ChannelProfile(**chan)
    if kwargs.get("pa_coeffs") is not None:
        pa = {}
        for key, val in kwargs["pa_coeffs"].items():
            if isinstance(val, (list, tuple)):
                val = complex(val[0], val[1])
            pa[int(key)] = complex(val)
        kwargs["pa_coeffs"] = pa
    for name in ("dl_span", "ul_span", "tx_array", "rx_array", "impulse_amp_range", "cancellers"):
        if kwargs.get(name) is not None:
            kwargs[name] = tuple(kwargs[name])
    return ScenarioSpec(**kwargs)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    """JSON-ready dict; inverse of spec_from_dict."""
    out = asdict(spec)
    if out["pa_coeffs"] is not None:
        out["pa_coeffs"] = {
            str(k): [v.real, v.imag] for k, v in sorted(out["pa_coeffs"].items())
        }
    for name in ("dl_span", "ul_span", "tx_array", "rx_array", "impulse_amp_range", "cancellers"):
        if out[name] is not None:
            out[name] = list(out[name])
    return out


def load_spec(path) -> ScenarioSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return spec_from_dict(data)


@dataclass
class MetricsReport:
    """Everything run_scenario measured, ready for emit_report."""

    spec: ScenarioSpec
    seed: int
    ul_indices: tuple[int, ...]
    psd_dbm: dict[str, np.ndarray]
    cdf_dbm: dict[str, np.ndarray]
    sicr_db: dict[str, float]
    counters: dict[str, OpCounter]
    noise_floor_dbm: float


def sicr(raw_si: np.ndarray, residual: np.ndarray) -> float:
    """Cancellation ratio in dB: raw self-interference power over what is left.

    Arrays must cover the same band and symbol count. A residual of
    exactly zero returns the +inf sentinel.
    """
    raw = np.asarray(raw_si)
    res = np.asarray(residual)
    if raw.shape != res.shape:
        raise ValueError("raw and residual arrays must have matching shapes")
    p_raw = float(np.sum(np.abs(raw) ** 2))
    p_res = float(np.sum(np.abs(res) ** 2))
    if p_res == 0.0:
        return float("inf")
    return 10.0 * np.log10(p_raw / p_res)


def residual_cdf(samples) -> np.ndarray:
    """Sorted residual-power samples; the empirical CDF's x-axis."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("residual_cdf needs at least one sample")
    return np.sort(arr)


def _seed_ints(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _rx_body(
    x: FreqSymbol,
    imb: IQImbalance,
    pa: PAPolynomial,
    chan: EffectiveChannel,
    grid: SubcarrierGrid,
    sigma_t: float,
    rng: np.random.Generator | None,
) -> TimeSignal:
    """One symbol through the transmit chain and the SI channel."""
    t = idft(x)
    t = apply_iq_time(t, imb)
    t = apply_pa(t, pa)
    t = add_cp(t, grid)
    t = apply_channel(t, chan)
    body = remove_cp(t, grid)
    samples = body.samples
    if rng is not None and sigma_t > 0:
        p = len(samples)
        noise = rng.standard_normal(p) + 1j * rng.standard_normal(p)
        samples = samples + (sigma_t / np.sqrt(2.0)) * noise
    return TimeSignal(samples)


def _build_effective_channel(spec: ScenarioSpec, grid: SubcarrierGrid, seed: int) -> EffectiveChannel:
    if spec.tap_file is not None:
        rays = load_taps(spec.tap_file)
    else:
        rays = synth_channel(spec.channel, grid, seed)
    geom_tx = ArrayGeometry(*spec.tx_array[:2], spacing=spec.tx_array[2])
    geom_rx = ArrayGeometry(*spec.rx_array[:2], spacing=spec.rx_array[2])
    mimo = build_mimo_taps(rays, geom_tx, geom_rx, grid)
    f_tx = conjugate_beam(geom_tx, spec.dl_beam_angle)
    w_rx = conjugate_beam(geom_rx, spec.ul_beam_angle)
    return apply_beams(mimo, f_tx, w_rx)


def _build_training(
    spec: ScenarioSpec,
    grid: SubcarrierGrid,
    imb: IQImbalance,
    pa: PAPolynomial,
    chan: EffectiveChannel,
    a_digi: float,
    sigma_t: float,
    seed_data: int,
    seed_noise: int,
) -> TrainingBuffer:
    omega = default_pilot_omega(grid)
    noise_rng = np.random.default_rng(seed_noise)
    entries = []
    lo, hi = spec.impulse_amp_range
    peaks = np.linspace(lo, hi, spec.n_impulse_symbols)
    scale = grid.num_subcarriers / grid.dl_size
    for peak in peaks:
        x = impulse_pilot(grid, float(peak) * scale, omega)
        rx = _rx_body(x, imb, pa, chan, grid, sigma_t, noise_rng)
        entries.append(TrainingEntry(tx=x, rx_time=rx, kind="impulse"))
    n_data = spec.n_train_symbols - spec.n_impulse_symbols
    for x in gen_qam_symbols(grid, spec.qam_order, a_digi, n_data, seed_data):
        rx = _rx_body(x, imb, pa, chan, grid, sigma_t, noise_rng)
        entries.append(TrainingEntry(tx=x, rx_time=rx, kind="data"))
    return TrainingBuffer(grid=grid, entries=tuple(entries), omega=omega)


def _fit_canceller(
    name: str,
    buffer: TrainingBuffer,
    grid: SubcarrierGrid,
    chan: EffectiveChannel,
    cfg: EstimatorConfig,
    a_digi: float,
    counter: OpCounter,
):
    """Train one canceller; returns an opaque state consumed by _run_canceller."""
    if name == "none":
        return None
    if name == "linear":
        return estimate_linear_channel(buffer, counter=counter)
    if name == "full_ls":
        b_hat = estimate_iq(buffer, counter=counter)
        coeffs = baseline_full_ls(
            buffer, grid, cfg.k_max, b_hat, cfg.regularization, counter=counter
        )
        return coeffs, b_hat
    if name in ("proposed", "iq_only", "pa_only"):
        b_hat = 0.0 + 0.0j if name == "pa_only" else estimate_iq(buffer, counter=counter)
        a_hat = estimate_pa(
            buffer, chan.los_scalar, b_hat, cfg, chan.los_tap_index, counter=counter
        )
        if name == "iq_only":
            a_hat = {1: a_hat[1]}
        h_hat, unest = estimate_channel(buffer, a_hat, b_hat, cfg, counter=counter)
        tables = make_imd_tables(grid, IQImbalance(b_hat), a_digi, cfg.k_max)
        sets = select_basis(a_hat, tables.mu, h_hat, cfg.gamma, cfg.k_max, grid, counter=counter)
        coeffs = SICCoefficients(
            grid=grid,
            h_hat=h_hat,
            a_hat=a_hat,
            b_hat=b_hat,
            basis_sets=sets,
            unestimated=unest,
        )
        combined = precombine(coeffs, counter=counter)
        return coeffs, combined
    raise ValueError(f"unknown canceller {name!r}")


def _run_canceller(
    name: str,
    state,
    y_rx: FreqSymbol,
    x_dl: FreqSymbol,
    grid: SubcarrierGrid,
    counter: OpCounter | None,
) -> FreqSymbol:
    if name == "none":
        return FreqSymbol(y_rx.values.copy(), y_rx.symbol_index)
    if name == "linear":
        return baseline_linear(y_rx, x_dl, state, grid, counter=counter)
    if name == "full_ls":
        coeffs, b_hat = state
        return run_full_ls(y_rx, x_dl, coeffs, b_hat, grid, counter=counter)
    coeffs, combined = state
    return run_sic(y_rx, x_dl, coeffs, counter=counter, combined=combined)


def run_scenario(spec: ScenarioSpec, seed: int | None = None) -> MetricsReport:
    """Simulate one scenario end to end; deterministic in (spec, seed)."""
    if seed is None:
        seed = spec.seed
    grid = spec.build_grid()
    imb = spec.build_imbalance()
    pa = spec.build_pa()

    a_digi = spec.pa_drive_rms * grid.num_subcarriers / np.sqrt(grid.dl_size)
    a1 = pa.coeff(1)
    unit_power = abs(a1 * a_digi) ** 2
    mw_per_unit = 10.0 ** (spec.tx_power_dbm / 10.0) / unit_power
    noise_f = unit_power * 10.0 ** ((spec.noise_dbm - spec.tx_power_dbm) / 10.0)
    sigma_t = float(np.sqrt(noise_f / grid.num_subcarriers))
    gamma_dbm = spec.noise_dbm if spec.gamma_dbm is None else spec.gamma_dbm
    gamma = unit_power * 10.0 ** ((gamma_dbm - spec.tx_power_dbm) / 10.0)

    seeds = _seed_ints(seed, 5)
    chan = _build_effective_channel(spec, grid, seeds[0])
    buffer = _build_training(
        spec, grid, imb, pa, chan, a_digi, sigma_t, seeds[1], seeds[2]
    )
    cfg = spec.estimator_config(gamma)

    counters = {name: OpCounter() for name in spec.cancellers}
    states = {
        name: _fit_canceller(name, buffer, grid, chan, cfg, a_digi, counters[name])
        for name in spec.cancellers
    }

    run_syms = gen_qam_symbols(grid, spec.qam_order, a_digi, spec.n_run_symbols, seeds[3])
    noise_rng = np.random.default_rng(seeds[4])
    y_noisy = []
    y_clean = []
    for x in run_syms:
        y_noisy.append(np.fft.fft(_rx_body(x, imb, pa, chan, grid, sigma_t, noise_rng).samples))
        y_clean.append(np.fft.fft(_rx_body(x, imb, pa, chan, grid, 0.0, None).samples))

    ul = grid.ul_indices
    psd_dbm: dict[str, np.ndarray] = {}
    cdf_dbm: dict[str, np.ndarray] = {}
    sicr_db: dict[str, float] = {}
    for name in spec.cancellers:
        state = states[name]
        acc = np.zeros(len(ul), dtype=np.float64)
        samples = []
        clean_res = []
        for m, x in enumerate(run_syms):
            res = _run_canceller(
                name, state, FreqSymbol(y_noisy[m], m), x, grid, counters[name]
            )
            power = np.abs(res.values[ul]) ** 2
            acc += power
            samples.append(10.0 * np.log10(max(float(power.mean()) * mw_per_unit, _FLOOR)))
            res_c = _run_canceller(name, state, FreqSymbol(y_clean[m], m), x, grid, None)
            clean_res.append(res_c.values[ul])
        acc /= len(run_syms)
        psd_dbm[name] = 10.0 * np.log10(np.maximum(acc * mw_per_unit, _FLOOR))
        cdf_dbm[name] = residual_cdf(samples)
        raw = np.stack([y[ul] for y in y_clean])
        sicr_db[name] = sicr(raw, np.stack(clean_res))

    return MetricsReport(
        spec=spec,
        seed=seed,
        ul_indices=tuple(int(p) for p in ul),
        psd_dbm=psd_dbm,
        cdf_dbm=cdf_dbm,
        sicr_db=sicr_db,
        counters=counters,
        noise_floor_dbm=spec.noise_dbm,
    )


def _psd_rows(report: MetricsReport) -> list[tuple[str, int, float]]:
    rows = []
    for name in report.spec.cancellers:
        for i, p in enumerate(report.ul_indices):
            rows.append((name, p, float(report.psd_dbm[name][i])))
    return rows


def _cdf_rows(report: MetricsReport) -> list[tuple[str, int, float]]:
    rows = []
    for name in report.spec.cancellers:
        for i, v in enumerate(report.cdf_dbm[name]):
            rows.append((name, i, float(v)))
    return rows


def _complexity_rows(report: MetricsReport) -> list[tuple[str, str, int]]:
    rows = []
    for name in report.spec.cancellers:
        for stage, kind, value in report.counters[name].rows():
            rows.append((f"{name}.{stage}", kind, value))
    return rows


def emit_report(report: MetricsReport, out_dir, fmt: str = "csv") -> list[str]:
    """Write the report under out_dir; returns the paths written.

    csv format produces psd.csv (canceller,p,residual_dbm), cdf.csv
    (canceller,sample,residual_dbm), complexity.csv (stage,counter,value)
    and config.json. json format produces a single report.json holding
    the same content. Output is byte-identical for identical runs.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    config = spec_to_dict(report.spec)
    if fmt == "csv":
        path = os.path.join(out_dir, "psd.csv")
        with open(path, "w") as fh:
            fh.write("canceller,p,residual_dbm\n")
            for name, p, v in _psd_rows(report):
                fh.write(f"{name},{p},{v!r}\n")
        written.append(path)
        path = os.path.join(out_dir, "cdf.csv")
        with open(path, "w") as fh:
            fh.write("canceller,sample,residual_dbm\n")
            for name, i, v in _cdf_rows(report):
                fh.write(f"{name},{i},{v!r}\n")
        written.append(path)
        path = os.path.join(out_dir, "complexity.csv")
        with open(path, "w") as fh:
            fh.write("stage,counter,value\n")
            for stage, kind, value in _complexity_rows(report):
                fh.write(f"{stage},{kind},{value}\n")
        written.append(path)
        path = os.path.join(out_dir, "config.json")
        with open(path, "w") as fh:
            json.dump({"config": config, "seed": report.seed}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    elif fmt == "json":
        payload = {
            "config": config,
            "seed": report.seed,
            "noise_floor_dbm": report.noise_floor_dbm,
            "ul_indices": list(report.ul_indices),
            "psd_dbm": {
                name: [float(v) for v in report.psd_dbm[name]]
                for name in report.spec.cancellers
            },
            "cdf_dbm": {
                name: [float(v) for v in report.cdf_dbm[name]]
                for name in report.spec.cancellers
            },
            "sicr_db": {name: report.sicr_db[name] for name in report.spec.cancellers},
            "complexity": [
                {"stage": stage, "counter": kind, "value": value}
                for stage, kind, value in _complexity_rows(report)
            ],
        }
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    else:
        raise ValueError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")
    return written


def scenario_with(spec: ScenarioSpec, **overrides) -> ScenarioSpec:
    """Convenience wrapper around dataclasses.replace for experiment sweeps."""
    return replace(spec, **overrides)
