import numpy as np
import pytest

from flexsic.counters import OpCounter
from flexsic.imd import default_pilot_omega, impulse_pilot, make_imd_tables, mu_tables
from flexsic.impairments import IQImbalance, PAPolynomial, default_measured_pa, irr_to_b
from flexsic.ofdm import FreqSymbol, SubcarrierGrid, TimeSignal, gen_qam_symbols, mirror_values
from flexsic.sic import (
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


def ibfd_grid():
    # mirror-closed downlink set: dl_start + dl_end == P
    return SubcarrierGrid(64, 120e3, 8, (8, 56), (8, 56))


def sbfd_grid():
    return SubcarrierGrid(64, 120e3, 8, (8, 40), (46, 62))


def flat_channel(grid, gain=0.02 + 0.005j):
    return np.full(grid.num_subcarriers, gain, dtype=np.complex128)


def tapped_channel(grid, seed=0, n_taps=5):
    rng = np.random.default_rng(seed)
    taps = 0.02 * (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps))
    taps[0] += 0.05  # keep a dominant first tap
    return np.fft.fft(taps, grid.num_subcarriers), complex(taps[0])


def forward_body(values, pa, b_iq, chan_freq, rng=None, sigma=0.0):
    """Transmit chain in the circular picture: IQ image, PA, channel."""
    xiq = values + b_iq * np.conj(mirror_values(values))
    t = np.fft.ifft(xiq)
    y = np.fft.fft(pa.evaluate(t)) * chan_freq
    body = np.fft.ifft(y)
    if rng is not None and sigma > 0:
        noise = rng.standard_normal(len(body)) + 1j * rng.standard_normal(len(body))
        body = body + (sigma / np.sqrt(2.0)) * noise
    return TimeSignal(body)


def make_buffer(grid, pa, b_iq, chan_freq, cfg, seed=0, a_digi=1.0, sigma=0.0):
    omega = default_pilot_omega(grid)
    rng = np.random.default_rng(seed + 1000) if sigma > 0 else None
    entries = []
    lo, hi = cfg.impulse_amp_range
    scale = grid.num_subcarriers / grid.dl_size
    for peak in np.linspace(lo, hi, cfg.n_impulse_symbols):
        x = impulse_pilot(grid, float(peak) * scale, omega)
        entries.append(
            TrainingEntry(
                tx=x, rx_time=forward_body(x.values, pa, b_iq, chan_freq, rng, sigma),
                kind="impulse",
            )
        )
    n_data = cfg.n_train_symbols - cfg.n_impulse_symbols
    for x in gen_qam_symbols(grid, 16, a_digi, n_data, seed):
        entries.append(
            TrainingEntry(
                tx=x, rx_time=forward_body(x.values, pa, b_iq, chan_freq, rng, sigma),
                kind="data",
            )
        )
    return TrainingBuffer(grid=grid, entries=tuple(entries), omega=omega)


def default_cfg(**overrides):
    kwargs = dict(gamma=1e-12, k_max=2, n_impulse_symbols=4, n_train_symbols=14)
    kwargs.update(overrides)
    return EstimatorConfig(**kwargs)


# ---------------------------------------------------------------- ls_solve


def test_ls_solve_single_column_ratio():
    phi = np.array([1 + 1j, 2.0, -3j, 0.5])
    c = ls_solve(phi[:, None], 2.0 * phi)
    assert c[0] == pytest.approx(2.0)


def test_ls_solve_orthonormal_projects():
    a = np.eye(4, 2, dtype=complex)
    y = np.array([1.0, 2j, 5.0, -1.0])
    c = ls_solve(a, y)
    assert np.allclose(c, a.conj().T @ y)


def test_ls_solve_recovers_random_system():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((64, 3)) + 1j * rng.standard_normal((64, 3))
    truth = np.array([1.5, -0.2j, 0.03 + 0.4j])
    c = ls_solve(a, a @ truth)
    assert np.allclose(c, truth, rtol=1e-9)


def test_ls_solve_singular_names_column():
    a = np.zeros((4, 2), dtype=complex)
    a[:, 0] = [1, 2, 3, 4]
    with pytest.raises(SingularSystemError, match="column") as err:
        ls_solve(a, np.ones(4, dtype=complex))
    assert err.value.column == 1
    with pytest.raises(SingularSystemError, match="all zero"):
        ls_solve(np.zeros((3, 1), dtype=complex), np.ones(3, dtype=complex))


def test_ls_solve_shape_guards():
    with pytest.raises(ValueError, match="underdetermined"):
        ls_solve(np.ones((2, 3), dtype=complex), np.ones(2, dtype=complex))
    with pytest.raises(ValueError, match="2-D"):
        ls_solve(np.ones(3, dtype=complex), np.ones(3, dtype=complex))
    with pytest.raises(ValueError, match="row count"):
        ls_solve(np.ones((3, 1), dtype=complex), np.ones(4, dtype=complex))


def test_ls_solve_auto_ridge_on_bad_conditioning():
    base = np.array([1.0, 1.0, 1.0, 1.0], dtype=complex)
    a = np.stack([base, base + 1e-9 * np.arange(4)], axis=1)
    c = ls_solve(a, base)  # must not raise, must stay finite
    assert np.all(np.isfinite(c))


def test_ls_solve_explicit_ridge_shrinks():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))
    y = a @ np.array([3.0, -2.0])
    plain = ls_solve(a, y)
    shrunk = ls_solve(a, y, regularization=1e3)
    assert np.linalg.norm(shrunk) < np.linalg.norm(plain)


def test_ls_solve_charges_counter():
    counter = OpCounter()
    a = np.eye(4, 2, dtype=complex)
    ls_solve(a, np.ones(4, dtype=complex), counter=counter, stage="here")
    assert counter.mults("here") == 4 * 4 + 2 * 4 + 8


# ---------------------------------------------------------------- config, buffers


def test_estimator_config_validation():
    with pytest.raises(ValueError, match="gamma"):
        default_cfg(gamma=0.0)
    with pytest.raises(ValueError, match="k_max"):
        default_cfg(k_max=0)
    with pytest.raises(ValueError, match="cannot identify"):
        default_cfg(k_max=2, n_impulse_symbols=2)
    with pytest.raises(ValueError, match="data training symbol"):
        default_cfg(n_impulse_symbols=4, n_train_symbols=4)
    with pytest.raises(ValueError, match="nonnegative"):
        default_cfg(regularization=-1.0)
    with pytest.raises(ValueError, match="increasing"):
        default_cfg(impulse_amp_range=(2.0, 0.6))


def test_training_buffer_ordering_and_shapes():
    g = ibfd_grid()
    x = FreqSymbol(np.zeros(64, dtype=complex))
    body = TimeSignal(np.zeros(64, dtype=complex))
    data = TrainingEntry(tx=x, rx_time=body, kind="data")
    imp = TrainingEntry(tx=x, rx_time=body, kind="impulse")
    buf = TrainingBuffer(grid=g, entries=(imp, data), omega=0.0)
    assert buf.impulse_entries == (imp,)
    assert buf.data_entries == (data,)
    with pytest.raises(ValueError, match="must precede"):
        TrainingBuffer(grid=g, entries=(data, imp), omega=0.0)
    with pytest.raises(ValueError, match="entry 0"):
        TrainingBuffer(
            grid=g,
            entries=(TrainingEntry(tx=FreqSymbol(np.zeros(32, dtype=complex)), rx_time=body, kind="data"),),
            omega=0.0,
        )
    with pytest.raises(ValueError, match="kind"):
        TrainingEntry(tx=x, rx_time=body, kind="pilot")
    with pytest.raises(ValueError, match="CP-stripped"):
        TrainingEntry(tx=x, rx_time=TimeSignal(np.zeros(72, dtype=complex), has_cp=True), kind="data")


def test_sic_coefficients_validation():
    g = ibfd_grid()
    h = np.zeros(64, dtype=complex)
    with pytest.raises(ValueError, match="one entry per subcarrier"):
        SICCoefficients(g, np.zeros(32, dtype=complex), {1: 1.0}, 0.0, {})
    with pytest.raises(ValueError, match="odd"):
        SICCoefficients(g, h, {2: 1.0}, 0.0, {})
    with pytest.raises(ValueError, match="non-uplink"):
        SICCoefficients(g, h, {1: 1.0}, 0.0, {2: frozenset()})
    with pytest.raises(ValueError, match="outside"):
        SICCoefficients(g, h, {1: 1.0, 3: 1.0}, 0.0, {10: frozenset({2})})
    coeffs = SICCoefficients(g, h, {1: 2.0, 5: 0.5}, 0.0, {})
    assert coeffs.k_max == 2
    assert np.array_equal(coeffs.a_vector(), np.array([2.0, 0.0, 0.5]))


# ---------------------------------------------------------------- IQ estimation


def test_estimate_iq_exact_with_linear_pa():
    g = ibfd_grid()
    pa = PAPolynomial({1: 2.0})
    b = 0.05 * np.exp(0.4j)
    buf = make_buffer(g, pa, b, flat_channel(g), default_cfg(), seed=3)
    b_hat = estimate_iq(buf)
    assert abs(b_hat - b) < 1e-12


def test_estimate_iq_zero_imbalance_estimates_zero():
    g = ibfd_grid()
    buf = make_buffer(g, PAPolynomial({1: 2.0}), 0.0, flat_channel(g), default_cfg(), seed=4)
    assert abs(estimate_iq(buf)) < 1e-12


def test_estimate_iq_tolerates_nonlinear_pa():
    g = ibfd_grid()
    b = 0.05 * np.exp(0.4j)
    buf = make_buffer(g, default_measured_pa(), b, flat_channel(g), default_cfg(), seed=5,
                      a_digi=0.5 * 8 / np.sqrt(49))
    b_hat = estimate_iq(buf)
    assert abs(b_hat - b) / abs(b) < 0.05


def test_estimate_iq_needs_data_and_mirror_pairs():
    g = ibfd_grid()
    cfg = default_cfg(n_train_symbols=5)  # one data symbol only
    buf = make_buffer(g, PAPolynomial({1: 1.0}), 0.0, flat_channel(g), cfg)
    with pytest.raises(ValueError, match="at least 2 data"):
        estimate_iq(buf)

    g2 = SubcarrierGrid(16, 120e3, 4, (2, 6), (10, 14))  # mirrors fall outside the band
    buf2 = make_buffer(g2, PAPolynomial({1: 1.0}), 0.0, flat_channel(g2), default_cfg())
    with pytest.raises(ValueError, match="unidentifiable"):
        estimate_iq(buf2)


def test_estimate_iq_reports_zero_mirror_content():
    g = ibfd_grid()
    values = np.zeros(64, dtype=complex)
    values[10] = 1.0  # mirror subcarrier 54 stays empty in every symbol
    x = FreqSymbol(values)
    body = forward_body(values, PAPolynomial({1: 1.0}), 0.0, flat_channel(g))
    entries = tuple(TrainingEntry(tx=x, rx_time=body, kind="data") for _ in range(3))
    buf = TrainingBuffer(grid=g, entries=entries, omega=default_pilot_omega(g))
    with pytest.raises(ValueError, match="mirror content"):
        estimate_iq(buf)


# ---------------------------------------------------------------- PA estimation


def test_estimate_pa_recovers_polynomial_exactly():
    g = ibfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    gain = 0.02 + 0.005j
    buf = make_buffer(g, pa, b, flat_channel(g, gain), default_cfg(), seed=6)
    a_hat = estimate_pa(buf, gain, b, default_cfg())
    for order, truth in pa.coeffs.items():
        assert abs(a_hat[order] - truth) / abs(truth) < 1e-9


def test_estimate_pa_linear_amplifier_yields_no_false_nonlinearity():
    g = ibfd_grid()
    pa = PAPolynomial({1: 10.0})
    gain = 0.02 + 0.005j
    buf = make_buffer(g, pa, 0.0, flat_channel(g, gain), default_cfg(), seed=7)
    a_hat = estimate_pa(buf, gain, 0.0, default_cfg())
    assert abs(a_hat[1] - 10.0) < 1e-9
    assert abs(a_hat[3]) < 1e-8
    assert abs(a_hat[5]) < 1e-8


def test_estimate_pa_validation():
    g = ibfd_grid()
    cfg = default_cfg()
    buf = make_buffer(g, default_measured_pa(), 0.0, flat_channel(g), cfg)
    with pytest.raises(ValueError, match="nonzero"):
        estimate_pa(buf, 0.0, 0.0, cfg)
    short = TrainingBuffer(grid=g, entries=buf.entries[:2] + buf.data_entries, omega=buf.omega)
    with pytest.raises(ValueError, match="cannot identify"):
        estimate_pa(short, 1.0, 0.0, cfg)
    crooked = TrainingBuffer(grid=g, entries=buf.entries, omega=buf.omega + 0.01)
    with pytest.raises(ValueError, match="integer sample"):
        estimate_pa(crooked, 1.0, 0.0, cfg)


def test_estimate_pa_coefficients_transfer_across_channels():
    # pilot training against one channel; the polynomial stays valid on another
    g = ibfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    cfg = default_cfg()
    los = 0.02 + 0.005j
    buf_a = make_buffer(g, pa, b, flat_channel(g, los), cfg, seed=8)
    a_hat = estimate_pa(buf_a, los, b, cfg)

    chan_b, _ = tapped_channel(g, seed=9)
    buf_b = make_buffer(g, pa, b, chan_b, cfg, seed=9)
    h_hat, unest = estimate_channel(buf_b, a_hat, b, cfg)
    assert unest == frozenset()
    ul = np.asarray(g.ul_indices)
    rel = np.abs(h_hat[ul] - chan_b[ul]) / np.abs(chan_b[ul])
    assert rel.max() < 1e-8


# ---------------------------------------------------------------- channel estimation


def test_estimate_channel_noiseless_recovery():
    g = ibfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    chan, _ = tapped_channel(g, seed=10)
    cfg = default_cfg()
    buf = make_buffer(g, pa, b, chan, cfg, seed=10)
    h_hat, unest = estimate_channel(buf, dict(pa.coeffs), b, cfg)
    assert unest == frozenset()
    ul = np.asarray(g.ul_indices)
    rel = np.abs(h_hat[ul] - chan[ul]) / np.abs(chan[ul])
    assert rel.max() < 1e-8
    off_band = np.delete(h_hat, ul)
    assert np.all(off_band == 0)


def test_estimate_channel_marks_unreachable_subcarriers():
    # narrow downlink (4..10): fifth-order products reach at most subcarrier
    # 3*10 - 2*4 = 22, so the upper uplink subcarriers see no regressor at all
    g = SubcarrierGrid(64, 120e3, 8, (4, 10), (12, 30))
    pa = default_measured_pa()
    cfg = default_cfg()
    chan, _ = tapped_channel(g, seed=11)
    buf = make_buffer(g, pa, 0.0, chan, cfg, seed=11)
    h_hat, unest = estimate_channel(buf, dict(pa.coeffs), 0.0, cfg)
    # everything past the support edge must be flagged; the last few inside
    # the support may fall below the relative power cut as well
    assert frozenset(range(23, 31)) <= unest <= frozenset(range(17, 31))
    assert all(h_hat[p] == 0 for p in unest)
    good = sorted(set(int(p) for p in g.ul_indices) - unest)
    rel = np.abs(h_hat[good] - chan[good]) / np.abs(chan[good])
    assert rel.max() < 1e-6


def test_estimate_channel_counter_charge_is_linear_in_band():
    g = ibfd_grid()
    pa = default_measured_pa()
    cfg = default_cfg()
    buf = make_buffer(g, pa, 0.0, flat_channel(g), cfg, seed=12)
    counter = OpCounter()
    estimate_channel(buf, dict(pa.coeffs), 0.0, cfg, counter=counter)
    n_ul = g.ul_size
    m = len(buf.data_entries)
    assert counter.mults("estimate_channel") == m * n_ul * (cfg.k_max + 3) + n_ul


# ---------------------------------------------------------------- basis selection


def test_select_basis_threshold_walk():
    g = ibfd_grid()
    pa = default_measured_pa()
    a_hat = dict(pa.coeffs)
    mu = mu_tables(g, IQImbalance(), 0.6, 2)
    h = flat_channel(g, 0.05)
    full = select_basis(a_hat, mu, h, 1e-30, 2, g)
    assert all(full[int(p)] == frozenset({1, 2}) for p in g.ul_indices)
    empty = select_basis(a_hat, mu, h, 1e30, 2, g)
    assert all(empty[int(p)] == frozenset() for p in g.ul_indices)

    gammas = np.logspace(-30, 10, 9)
    prev = None
    for gamma in gammas:
        sets = select_basis(a_hat, mu, h, float(gamma), 2, g)
        total = sum(len(s) for s in sets.values())
        if prev is not None:
            assert total <= prev
        prev = total


def test_select_basis_validation():
    g = ibfd_grid()
    mu = mu_tables(g, IQImbalance(), 1.0, 2)
    with pytest.raises(ValueError, match="nonnegative"):
        select_basis({1: 1.0}, mu, flat_channel(g), -1.0, 2, g)
    with pytest.raises(ValueError, match="cover"):
        select_basis({1: 1.0}, mu[:1], flat_channel(g), 1.0, 2, g)


# ---------------------------------------------------------------- running canceller


def test_run_sic_with_perfect_coefficients_cancels_everything():
    g = ibfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    chan, _ = tapped_channel(g, seed=13)
    coeffs = perfect_coefficients(g, chan, dict(pa.coeffs), b)

    x = gen_qam_symbols(g, 16, 0.8, 1, seed=13)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, b, chan).samples))
    counter = OpCounter()
    out = run_sic(y, x, coeffs, counter=counter)
    si_scale = np.abs(y.values[g.ul_indices]).max()
    assert np.abs(out.values[g.ul_indices]).max() < 1e-9 * si_scale
    # running cost: one multiply for the linear term plus one per retained order
    assert counter.mults("run") == g.ul_size * 3


def test_run_sic_leaves_unestimated_and_off_band_untouched():
    g = sbfd_grid()
    pa = default_measured_pa()
    chan, _ = tapped_channel(g, seed=14)
    skip = int(g.ul_indices[2])
    base = perfect_coefficients(g, chan, dict(pa.coeffs), 0.0)
    coeffs = SICCoefficients(
        grid=g, h_hat=base.h_hat, a_hat=base.a_hat, b_hat=base.b_hat,
        basis_sets=base.basis_sets, unestimated=frozenset({skip}),
    )
    x = gen_qam_symbols(g, 16, 0.8, 1, seed=14)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, 0.0, chan).samples))
    out = run_sic(y, x, coeffs)
    assert out.values[skip] == y.values[skip]
    outside = [p for p in range(64) if not g.in_ul(p)]
    assert np.array_equal(out.values[outside], y.values[outside])


def test_run_sic_rejects_energy_outside_downlink():
    g = sbfd_grid()
    coeffs = perfect_coefficients(g, flat_channel(g), {1: 1.0}, 0.0)
    bad = np.zeros(64, dtype=complex)
    bad[g.ul_start] = 1.0  # uplink subcarrier carries transmit energy
    with pytest.raises(ValueError, match="allocation mismatch"):
        run_sic(FreqSymbol(np.zeros(64, dtype=complex)), FreqSymbol(bad), coeffs)
    with pytest.raises(ValueError, match="length"):
        run_sic(FreqSymbol(np.zeros(32, dtype=complex)), FreqSymbol(bad), coeffs)


def test_precombine_matches_manual_product():
    g = ibfd_grid()
    chan, _ = tapped_channel(g, seed=15)
    coeffs = perfect_coefficients(g, chan, {1: 2.0, 3: -0.5, 5: 0.01}, 0.0)
    counter = OpCounter()
    combined = precombine(coeffs, counter=counter)
    ul = g.ul_indices
    assert np.allclose(combined[0, ul], 2.0 * chan[ul])
    assert np.allclose(combined[2, ul], 0.01 * chan[ul])
    assert counter.mults("coeff_combine") == 3 * g.ul_size


# ---------------------------------------------------------------- end-to-end estimate


def test_estimated_canceller_reaches_noise_floor():
    g = ibfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    chan, los = tapped_channel(g, seed=16)
    cfg = default_cfg(gamma=1e-14)
    a_digi = 0.5 * 8 / np.sqrt(g.dl_size)
    sigma = 1e-5
    buf = make_buffer(g, pa, b, chan, cfg, seed=16, a_digi=a_digi, sigma=sigma)

    b_hat = estimate_iq(buf)
    a_hat = estimate_pa(buf, los, b_hat, cfg)
    h_hat, unest = estimate_channel(buf, a_hat, b_hat, cfg)
    tables = make_imd_tables(g, IQImbalance(b_hat), a_digi, cfg.k_max)
    sets = select_basis(a_hat, tables.mu, h_hat, cfg.gamma, cfg.k_max, g)
    coeffs = SICCoefficients(
        grid=g, h_hat=h_hat, a_hat=a_hat, b_hat=b_hat, basis_sets=sets, unestimated=unest
    )

    rng = np.random.default_rng(99)
    x = gen_qam_symbols(g, 16, a_digi, 1, seed=17)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, b, chan, rng, sigma).samples))
    out = run_sic(y, x, coeffs)
    noise_power = 64 * sigma**2  # per-subcarrier spectrum power of the time noise
    resid = np.abs(out.values[g.ul_indices]) ** 2
    raw = np.abs(y.values[g.ul_indices]) ** 2
    assert np.mean(resid) < 10 * noise_power
    assert np.mean(resid) < 1e-3 * np.mean(raw)


# ---------------------------------------------------------------- baselines


def test_linear_baseline_cancels_only_the_linear_part():
    g = ibfd_grid()
    pa = default_measured_pa()
    chan, _ = tapped_channel(g, seed=18)
    cfg = default_cfg()
    a_digi = 0.5 * 8 / np.sqrt(g.dl_size)
    buf = make_buffer(g, pa, 0.0, chan, cfg, seed=18, a_digi=a_digi)
    h_lin = estimate_linear_channel(buf)
    x = gen_qam_symbols(g, 16, a_digi, 1, seed=19)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, 0.0, chan).samples))
    out = baseline_linear(y, x, h_lin, g)
    ul = g.ul_indices
    raw = np.mean(np.abs(y.values[ul]) ** 2)
    resid = np.mean(np.abs(out.values[ul]) ** 2)
    assert resid < raw  # removes the dominant linear term
    assert resid > 1e-8 * raw  # but the distortion floor remains


def test_linear_baseline_is_inert_off_the_downlink_band():
    g = sbfd_grid()
    pa = default_measured_pa()
    chan, _ = tapped_channel(g, seed=20)
    buf = make_buffer(g, pa, 0.0, chan, default_cfg(), seed=20)
    h_lin = estimate_linear_channel(buf)
    assert np.all(h_lin[np.asarray(g.ul_indices)] == 0)
    x = gen_qam_symbols(g, 16, 1.0, 1, seed=21)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, 0.0, chan).samples))
    out = baseline_linear(y, x, h_lin, g)
    assert np.array_equal(out.values, y.values)


def test_full_ls_baseline_handles_split_allocation():
    # off the downlink band the linear regressor column is identically zero;
    # the per-subcarrier solve must fall back to a ridge and still cancel
    g = sbfd_grid()
    pa = default_measured_pa()
    b = irr_to_b(25.0, 0.3).b_iq
    chan, _ = tapped_channel(g, seed=22)
    cfg = default_cfg()
    a_digi = 0.5 * 8 / np.sqrt(g.dl_size)
    buf = make_buffer(g, pa, b, chan, cfg, seed=22, a_digi=a_digi)
    coeffs = baseline_full_ls(buf, g, cfg.k_max, b)
    assert coeffs.shape == (3, 64)
    assert np.all(np.isfinite(coeffs))
    x = gen_qam_symbols(g, 16, a_digi, 1, seed=23)[0]
    y = FreqSymbol(np.fft.fft(forward_body(x.values, pa, b, chan).samples))
    out = run_full_ls(y, x, coeffs, b, g)
    ul = g.ul_indices
    raw = np.mean(np.abs(y.values[ul]) ** 2)
    resid = np.mean(np.abs(out.values[ul]) ** 2)
    assert resid < 1e-6 * raw


def test_full_ls_needs_enough_symbols():
    g = ibfd_grid()
    cfg = default_cfg()
    buf = make_buffer(g, default_measured_pa(), 0.0, flat_channel(g), cfg)
    short = TrainingBuffer(grid=g, entries=buf.entries[:2], omega=buf.omega)
    with pytest.raises(ValueError, match="cannot fit"):
        baseline_full_ls(short, g, cfg.k_max)


# ---------------------------------------------------------------- persistence


def test_coefficients_roundtrip(tmp_path):
    g = sbfd_grid()
    chan, _ = tapped_channel(g, seed=24)
    base = perfect_coefficients(g, chan, {1: 35.89, 3: -2.24 + 0.1j, 5: 0.0015}, 0.05j)
    coeffs = SICCoefficients(
        grid=g, h_hat=base.h_hat, a_hat=base.a_hat, b_hat=base.b_hat,
        basis_sets={**base.basis_sets, int(g.ul_indices[0]): frozenset({2})},
        unestimated=frozenset({int(g.ul_indices[1])}),
    )
    path = tmp_path / "coeffs.csv"
    save_coefficients(coeffs, path)
    back = load_coefficients(path, g)
    assert back.a_hat == coeffs.a_hat
    assert back.b_hat == coeffs.b_hat
    assert back.basis_sets == coeffs.basis_sets
    assert back.unestimated == coeffs.unestimated
    assert np.array_equal(back.h_hat, coeffs.h_hat)


def test_load_coefficients_error_lines(tmp_path):
    g = sbfd_grid()
    path = tmp_path / "bad.csv"
    path.write_text("# a_1=1.0,0.0\n# banana=3\np,h_re,h_im\n")
    with pytest.raises(ValueError, match="line 2: unknown header key"):
        load_coefficients(path, g)
    path.write_text("# a_1=1.0,0.0\n0,1.0,0.0\n")
    with pytest.raises(ValueError, match="line 2: data before"):
        load_coefficients(path, g)
    path.write_text("p,h_re,h_im\n0,1.0,0.0\n")
    with pytest.raises(ValueError, match="no polynomial headers"):
        load_coefficients(path, g)
