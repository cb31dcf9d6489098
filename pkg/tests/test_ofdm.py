import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexsic.ofdm import (
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
from oracles import dft_ref, idft_ref


def small_grid(p=16, dl=(2, 6), ul=(10, 14)):
    return SubcarrierGrid(p, 15e3, 4, dl, ul)


# ---------------------------------------------------------------- grid


def test_grid_basic_properties():
    g = small_grid()
    assert g.dl_size == 5
    assert g.ul_size == 5
    assert list(g.dl_indices) == [2, 3, 4, 5, 6]
    assert g.dl_mask.sum() == 5
    assert g.in_dl(2) and g.in_dl(6) and not g.in_dl(7)
    assert g.in_ul(10) and not g.in_ul(9)
    assert g.sampling_interval == pytest.approx(1.0 / (16 * 15e3))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(num_subcarriers=0),
        dict(subcarrier_spacing=0.0),
        dict(cp_length=0),
        dict(cp_length=16),
        dict(dl_set=(6, 2)),
        dict(dl_set=(2, 16)),
        dict(ul_set=(-1, 4)),
    ],
)
def test_grid_rejects_bad_parameters(kwargs):
    base = dict(
        num_subcarriers=16, subcarrier_spacing=15e3, cp_length=4,
        dl_set=(2, 6), ul_set=(10, 14),
    )
    base.update(kwargs)
    with pytest.raises(ValueError):
        SubcarrierGrid(**base)


def test_classify_duplex_modes():
    assert classify_duplex(small_grid(dl=(2, 6), ul=(2, 6)))[0] is DuplexMode.IBFD
    mode, overlap = classify_duplex(small_grid(dl=(2, 6), ul=(10, 14)))
    assert mode is DuplexMode.SBFD and overlap == 0
    mode, overlap = classify_duplex(small_grid(dl=(2, 6), ul=(5, 9)))
    assert mode is DuplexMode.PARTIAL_OVERLAP and overlap == 2


# ---------------------------------------------------------------- mirror


def test_mirror_index_involution_and_fixed_points():
    p = 16
    for q in range(p):
        assert mirror_index(mirror_index(q, p), p) == q
    assert mirror_index(0, p) == 0
    assert mirror_index(8, p) == 8
    assert mirror_index(3, p) == 13
    with pytest.raises(ValueError):
        mirror_index(16, p)


@given(st.integers(min_value=2, max_value=64), st.integers(0, 2**32 - 1))
def test_mirror_values_matches_indexwise_map(p, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(p) + 1j * rng.standard_normal(p)
    mirrored = mirror_values(v)
    for q in range(p):
        assert mirrored[q] == v[(p - q) % p]


# ---------------------------------------------------------------- transforms


def test_dft_single_tone_convention():
    # x[n] = e^{+j 2 pi 3 n / P}  ->  X[3] = P, everything else 0
    p = 16
    n = np.arange(p)
    sig = TimeSignal(np.exp(2j * np.pi * 3 * n / p))
    spec = dft(sig)
    assert spec.values[3] == pytest.approx(p)
    others = np.delete(spec.values, 3)
    assert np.max(np.abs(others)) < 1e-10


@given(st.integers(min_value=2, max_value=128), st.integers(0, 2**32 - 1))
def test_transforms_roundtrip_and_match_reference(p, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(p) + 1j * rng.standard_normal(p)
    spec = FreqSymbol(values)
    time = idft(spec)
    back = dft(time)
    assert np.allclose(back.values, values, atol=1e-9 * max(1.0, np.abs(values).max()))
    assert np.allclose(time.samples, idft_ref(values), atol=1e-9)
    assert np.allclose(dft(time).values, dft_ref(time.samples), atol=1e-9)


@given(st.integers(min_value=2, max_value=128), st.integers(0, 2**32 - 1))
def test_parseval_scaling(p, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(p) + 1j * rng.standard_normal(p)
    time = idft(FreqSymbol(values))
    lhs = np.sum(np.abs(time.samples) ** 2)
    rhs = np.sum(np.abs(values) ** 2) / p
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_dft_rejects_prefixed_signal():
    g = small_grid()
    body = TimeSignal(np.ones(16, dtype=complex))
    with pytest.raises(ValueError, match="CP-free"):
        dft(add_cp(body, g))


# ---------------------------------------------------------------- cyclic prefix


def test_cp_roundtrip_and_shapes():
    g = small_grid()
    rng = np.random.default_rng(0)
    body = TimeSignal(rng.standard_normal(16) + 1j * rng.standard_normal(16))
    fixed = add_cp(body, g)
    assert fixed.has_cp and len(fixed) == 20
    assert np.array_equal(fixed.samples[:4], body.samples[-4:])
    stripped = remove_cp(fixed, g)
    assert not stripped.has_cp
    assert np.array_equal(stripped.samples, body.samples)


def test_cp_errors():
    g = small_grid()
    body = TimeSignal(np.zeros(16, dtype=complex))
    with pytest.raises(ValueError, match="no cyclic prefix"):
        remove_cp(body, g)
    with pytest.raises(ValueError, match="already has"):
        add_cp(add_cp(body, g), g)
    with pytest.raises(ValueError, match="does not match"):
        add_cp(TimeSignal(np.zeros(8, dtype=complex)), g)


# ---------------------------------------------------------------- QAM


@pytest.mark.parametrize("order", [4, 16, 64])
def test_qam_constellation_unit_power(order):
    pts = qam_constellation(order)
    assert len(pts) == order
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    # square grid: as many distinct rails as sqrt(order)
    assert len(np.unique(np.round(pts.real, 12))) == int(np.sqrt(order))


def test_qam_rejects_unknown_order():
    with pytest.raises(ValueError):
        qam_constellation(8)


def test_gen_qam_symbols_support_and_determinism():
    g = small_grid()
    syms = gen_qam_symbols(g, 16, amplitude=2.0, count=5, seed=9)
    assert len(syms) == 5
    for m, s in enumerate(syms):
        assert s.symbol_index == m
        off_band = np.delete(s.values, g.dl_indices)
        assert np.all(off_band == 0)
        assert np.all(np.abs(s.values[g.dl_indices]) > 0)
    again = gen_qam_symbols(g, 16, amplitude=2.0, count=5, seed=9)
    for a, b in zip(syms, again):
        assert np.array_equal(a.values, b.values)
    other = gen_qam_symbols(g, 16, amplitude=2.0, count=5, seed=10)
    assert any(not np.array_equal(a.values, b.values) for a, b in zip(syms, other))


def test_gen_qam_symbols_power_statistics():
    g = SubcarrierGrid(64, 15e3, 8, (8, 55), (8, 55))
    syms = gen_qam_symbols(g, 16, amplitude=3.0, count=400, seed=1)
    powers = np.concatenate([np.abs(s.values[g.dl_indices]) ** 2 for s in syms])
    assert np.mean(powers) == pytest.approx(9.0, rel=0.02)
