"""Frequency-domain intermodulation (IMD) analysis for flexible duplex.

Let X be a downlink OFDM spectrum, b the IQ mirror coefficient, and

    X_iq[q] = X[q] + b * conj(X[(P - q) mod P]).

With x_iq = idft(X_iq) (1/P scaling), the odd-order nonlinear basis is

    phi_{2k+1}[n] = |x_iq[n]|^{2k} * x_iq[n],
    Phi_{2k+1}    = dft(phi_{2k+1}).

Expanding the transforms turns Phi into a sum over index tuples
(q_1, ..., q_{2k+1}) whose signed sum q_1 + ... + q_{k+1} - q_{k+2} - ...
- q_{2k+1} is congruent to p modulo P:

    Phi_{2k+1}[p] = (1/P^{2k}) * sum over tuples of
                    X_iq[q_1] ... X_iq[q_{k+1}] conj(X_iq[q_{k+2}]) ... conj(X_iq[q_{2k+1}]).

The IMD set Q^{2k+1}_p collects the downlink tuples landing on p; its size
obeys an exact integer recursion through the pair-count function Lambda
(the self-convolution of the downlink indicator), and the basis itself obeys
a recursion that needs only one squared spectrum and one FFT per order.
Everything in this module is per-allocation and symbol-independent except
the basis operators themselves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .impairments import IQImbalance, apply_iq_freq
from .ofdm import FreqSymbol, SubcarrierGrid, mirror_index

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class NonlinearBasis:
    """Order-(2k+1) frequency-domain nonlinear basis of one symbol."""

    order: int
    values: np.ndarray

    def __post_init__(self):
        if self.order < 1 or self.order % 2 == 0:
            raise ValueError(f"basis order must be odd and >= 1, got {self.order}")
        v = np.array(self.values, dtype=np.complex128)
        if v.ndim != 1:
            raise ValueError(f"values must be one-dimensional, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return (self.order - 1) // 2


@dataclass(frozen=True)
class IMDTables:
    """Per-allocation IMD combinatorics and basis-power expectations.

    q_size[k, p] is the exact integer |Q^{2k+1}_p|; row 0 is the downlink
    indicator.  mu[k, p] is the predicted E|Phi_{2k+1}[p]|^2 for random
    downlink symbols of per-subcarrier power a_digi^2.  lambda_dl[s] counts
    downlink pairs with q1 + q2 = s (plain integer s, no wrap).
    """

    grid: SubcarrierGrid
    k_max: int
    q_size: np.ndarray
    mu: np.ndarray
    lambda_dl: np.ndarray
    b_iq: complex
    a_digi: float
    moment_mode: str

    def q(self, k: int, p: int) -> int:
        return int(self.q_size[k, p])

    def mu_at(self, k: int, p: int) -> float:
        return float(self.mu[k, p])


def lambda_dl(grid: SubcarrierGrid) -> np.ndarray:
    """Exact pair count Lambda[s] = |{(q1, q2) in DL^2 : q1 + q2 = s}|.

    Returned as an integer array indexed by the plain (unwrapped) sum
    s in [0, 2P-2]; the support is [2 dl_start, 2 dl_end] and the values
    form the triangle min(s - 2 dl_start, 2 dl_end - s) + 1 there.
    """
    ind = np.zeros(grid.num_subcarriers, dtype=np.int64)
    ind[grid.dl_indices] = 1
    return np.convolve(ind, ind)


def _fold_mod_p(arr: np.ndarray, p: int) -> np.ndarray:
    """Fold an extended-index integer array onto [0, P) by alias summation."""
    out = np.zeros(p, dtype=arr.dtype)
    for start in range(0, len(arr), p):
        chunk = arr[start:start + p]
        out[: len(chunk)] += chunk
    return out


def _circ_corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact circular correlation T[p] = sum_rho a[(p + rho) mod P] b[rho].

    Computed through one linear convolution plus alias folding, which keeps
    integer inputs exact (no FFT round-off).
    """
    p = len(a)
    flipped = np.roll(b[::-1], 1)  # flipped[u] = b[(-u) mod P]
    lin = np.convolve(a, flipped)
    return _fold_mod_p(lin, p)


def q_size(grid: SubcarrierGrid, k_max: int) -> np.ndarray:
    """Exact IMD set sizes |Q^{2k+1}_p| for k = 0..k_max, shape (k_max+1, P).

    Row k follows the recursion

        |Q^{2k+1}_p| = sum_rho Lambda_fold[(p + rho) mod P] * |Q^{2k-1}_rho|,

    where Lambda_fold is the pair count folded onto the grid (pair sums
    beyond P alias back, exactly as the signed tuple sums do).  Row 0 is the
    downlink indicator.  Each row sums to |DL|^{2k+1}.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    p = grid.num_subcarriers
    # Switch to Python-int arithmetic when counts could overflow int64.
    dtype: type | np.dtype = np.int64
    if grid.dl_size ** (2 * k_max + 1) >= _INT64_SAFE:
        dtype = object
    lam_fold = _fold_mod_p(lambda_dl(grid).astype(dtype), p)
    rows = np.zeros((k_max + 1, p), dtype=dtype)
    rows[0, grid.dl_indices] = 1
    for k in range(1, k_max + 1):
        rows[k] = _circ_corr(lam_fold, rows[k - 1])
    return rows


def q3_closed(grid: SubcarrierGrid, p: int) -> float:
    """Continuous closed-form approximation of |Q^3_p|.

    Evaluates the piecewise-quadratic Q at p - P, p, and p + P and sums the
    three aliases.  The form treats the pair-count triangle as a continuous
    density, so it differs from the exact integer q_size(grid, 1)[p] by
    small offsets (notably at band edges and for narrow allocations); use
    q_size for exact values and this function to quantify the gap.
    """
    s, e = grid.dl_set
    big_p = grid.num_subcarriers

    def q_piece(t: float) -> float:
        if 2 * s - e < t <= s:
            return 0.5 * (t + e - 2 * s) ** 2
        if s <= t <= e:
            return float((e - s) ** 2) - 0.5 * (t - s) ** 2 - 0.5 * (e - t) ** 2
        if e < t <= 2 * e - s:
            return 0.5 * (2 * e - s - t) ** 2
        return 0.0

    return q_piece(p - big_p) + q_piece(p) + q_piece(p + big_p)


def basis_direct(X: FreqSymbol, imb: IQImbalance, k: int) -> NonlinearBasis:
    """Reference basis computation straight from the definition.

    Applies the IQ image in frequency, transforms to time, raises to the
    odd power per sample, and transforms back.  Every other basis routine
    in the package is validated against this one.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    x_iq = np.fft.ifft(apply_iq_freq(X, imb).values)
    phi = np.abs(x_iq) ** (2 * k) * x_iq
    return NonlinearBasis(order=2 * k + 1, values=np.fft.fft(phi))


def imd_step(X_iq: FreqSymbol, prev: NonlinearBasis) -> NonlinearBasis:
    """One recursion step: order 2k-1 basis to order 2k+1 basis.

    Implements

        Phi_{2k+1}[p] = (1/P^2) * sum_{q1, q2} X_iq[q1] X_iq[q2]
                                  * conj(Phi_{2k-1}[(q1 + q2 - p) mod P])

    through three FFTs of the subcarrier sequences, i.e. O(P log P) per
    order instead of the O(P^2) double sum.  X_iq must be the IQ-applied
    spectrum (the order-1 basis).
    """
    p = len(X_iq.values)
    if len(prev.values) != p:
        raise ValueError("X_iq and prev live on different grids")
    fx = np.fft.fft(X_iq.values)
    fp = np.fft.fft(prev.values)
    vals = np.fft.ifft(fx * fx * np.conj(fp)) / p**2
    return NonlinearBasis(order=prev.order + 2, values=vals)


def basis_chain(X_iq_values: np.ndarray, k_max: int) -> np.ndarray:
    """All bases Phi_1 .. Phi_{2k_max+1} of one symbol, shape (k_max+1, P).

    Same recursion as imd_step, reusing the squared spectrum across orders.
    """
    p = len(X_iq_values)
    out = np.empty((k_max + 1, p), dtype=np.complex128)
    out[0] = X_iq_values
    if k_max == 0:
        return out
    fx = np.fft.fft(X_iq_values)
    fx2 = fx * fx
    for k in range(1, k_max + 1):
        out[k] = np.fft.ifft(fx2 * np.conj(np.fft.fft(out[k - 1]))) / p**2
    return out


def mu_tables(
    grid: SubcarrierGrid,
    imb: IQImbalance,
    a_digi: float,
    k_max: int,
    moment_mode: str = "biq",
) -> np.ndarray:
    """Predicted basis powers mu[k, p] = E|Phi_{2k+1}[p]|^2, shape (k_max+1, P).

    The recursion, with B = (1 + |b|^2) a_digi^2 and the folded pair count
    Lambda_fold:

        mu_1[p]      = B on the downlink set, 0 elsewhere
        mu_{2k+1}[p] = (2k (2k-1) B^2 / P^4) * sum_rho Lambda_fold[(p+rho) mod P] mu_{2k-1}[rho]
                     + ((k+1)^2 * F2 / P^4) * |DL|^2 * mu_{2k-1}[p]

    moment_mode selects the second-term factor F2: "biq" uses B^2 and is
    the variant consistent with Monte Carlo measurements; "a4" uses
    a_digi^4 and is kept for comparison (it understates the term by
    (1 + |b|^2)^2 when b != 0).  The prediction treats the subcarrier
    amplitudes as circular Gaussian, so for QAM inputs it carries an
    O(1/|DL|) relative error from degenerate index tuples, plus an
    O(|b|^2) term from conjugate-pair correlations.
    """
    if moment_mode not in ("biq", "a4"):
        raise ValueError(f"moment_mode must be 'biq' or 'a4', got {moment_mode!r}")
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    p = grid.num_subcarriers
    b_mag2 = abs(imb.b_iq) ** 2
    big_b = (1.0 + b_mag2) * a_digi**2
    f1 = big_b**2
    f2 = big_b**2 if moment_mode == "biq" else a_digi**4
    lam_fold = _fold_mod_p(lambda_dl(grid), p).astype(np.float64)
    mu = np.zeros((k_max + 1, p), dtype=np.float64)
    mu[0, grid.dl_indices] = big_b
    for k in range(1, k_max + 1):
        conv = _circ_corr(lam_fold, mu[k - 1])
        mu[k] = (2 * k * (2 * k - 1) * f1 / p**4) * conv + (
            (k + 1) ** 2 * f2 / p**4
        ) * grid.dl_size**2 * mu[k - 1]
    return mu


def make_imd_tables(
    grid: SubcarrierGrid,
    imb: IQImbalance,
    a_digi: float,
    k_max: int,
    moment_mode: str = "biq",
) -> IMDTables:
    """Build and validate the full table set for one allocation."""
    qs = q_size(grid, k_max)
    for k in range(k_max + 1):
        total = int(sum(int(v) for v in qs[k]))
        expect = grid.dl_size ** (2 * k + 1)
        if total != expect:
            raise AssertionError(
                f"q_size row {k} sums to {total}, expected |DL|^{2 * k + 1} = {expect}"
            )
    mu = mu_tables(grid, imb, a_digi, k_max, moment_mode)
    if np.any(mu < 0):
        raise AssertionError("mu table contains negative entries")
    return IMDTables(
        grid=grid,
        k_max=k_max,
        q_size=qs,
        mu=mu,
        lambda_dl=lambda_dl(grid),
        b_iq=imb.b_iq,
        a_digi=float(a_digi),
        moment_mode=moment_mode,
    )


def dump_imd_tables(tables: IMDTables, path) -> None:
    """Write the tables as CSV rows `k,p,q_size,mu`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,p,q_size,mu\n")
        for k in range(tables.k_max + 1):
            for p in range(tables.grid.num_subcarriers):
                fh.write(f"{k},{p},{int(tables.q_size[k, p])},{float(tables.mu[k, p])!r}\n")


def _dl_mirror_closed(grid: SubcarrierGrid) -> bool:
    """True when the downlink set maps onto itself under p -> (P - p) mod P."""
    dl = set(int(i) for i in grid.dl_indices)
    return dl == {mirror_index(i, grid.num_subcarriers) for i in dl}


def default_pilot_omega(grid: SubcarrierGrid) -> float:
    """Phase slope placing the pilot peak at body sample cp_length."""
    return 2.0 * np.pi * grid.cp_length / grid.num_subcarriers


def pilot_peak_sample(grid: SubcarrierGrid, omega: float) -> float:
    """Body sample index n0 = omega * P / (2 pi) of the pilot peak."""
    return omega * grid.num_subcarriers / (2.0 * np.pi)


def impulse_pilot(
    grid: SubcarrierGrid, a_digi: float, omega: float | None = None
) -> FreqSymbol:
    """Impulse-like pilot: X[p] = a_digi * exp(-j omega p) on the downlink set.

    The linear phase ramp concentrates the time-domain energy at body
    sample n0 = omega P / (2 pi); the default omega puts n0 at cp_length so
    the peak clears the longest channel tap.  A non-integer n0 leaves the
    peak straddling two samples and triggers a warning.
    """
    if a_digi <= 0:
        raise ValueError(f"a_digi must be positive, got {a_digi}")
    if omega is None:
        omega = default_pilot_omega(grid)
    n0 = pilot_peak_sample(grid, omega)
    if abs(n0 - round(n0)) > 1e-9:
        warnings.warn(
            f"pilot peak sample n0 = {n0:.6f} is not an integer; "
            "the time-domain peak straddles two samples",
            stacklevel=2,
        )
    p = grid.num_subcarriers
    values = np.zeros(p, dtype=np.complex128)
    idx = grid.dl_indices
    values[idx] = a_digi * np.exp(-1j * omega * idx)
    return FreqSymbol(values=values)


@dataclass(frozen=True)
class PilotReport:
    """Time-domain shape summary of an impulse pilot."""

    peak_index: int
    peak_mag: float
    pre_peak_max: float
    suppression_db: float


def pilot_suppression(pilot: FreqSymbol, grid: SubcarrierGrid) -> PilotReport:
    """Quantify how well the pilot body is suppressed before its peak.

    suppression_db is the peak magnitude over the largest pre-peak sample
    magnitude, in dB; large values mean delayed copies of the pre-peak
    samples cannot contaminate the peak.
    """
    body = np.fft.ifft(pilot.values)
    mags = np.abs(body)
    peak = int(np.argmax(mags))
    pre = float(mags[:peak].max()) if peak > 0 else 0.0
    supp = float("inf") if pre == 0 else 20.0 * np.log10(mags[peak] / pre)
    return PilotReport(
        peak_index=peak,
        peak_mag=float(mags[peak]),
        pre_peak_max=pre,
        suppression_db=supp,
    )


def impulse_pilot_basis(
    grid: SubcarrierGrid,
    imb: IQImbalance,
    a_digi: float,
    omega: float | None = None,
    k: int = 0,
    q_tables: np.ndarray | None = None,
) -> NonlinearBasis:
    """Closed-form nonlinear basis of the impulse pilot, O(1) per subcarrier.

        Phi_{2k+1}[p] = (|Q^{2k+1}_p| / P^{2k}) * a^{2k+1}
                        * |1 + b|^{2k} * (1 + b) * exp(-j omega p)

    Exact when every tuple term carries the same per-subcarrier factor,
    which requires an integer peak sample and either b = 0 or a
    mirror-closed downlink set; violations raise.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if omega is None:
        omega = default_pilot_omega(grid)
    n0 = pilot_peak_sample(grid, omega)
    if abs(n0 - round(n0)) > 1e-9:
        raise ValueError(
            f"closed-form pilot basis needs an integer peak sample, got n0 = {n0:.6f}"
        )
    if imb.b_iq != 0 and not _dl_mirror_closed(grid):
        raise ValueError(
            "closed-form pilot basis with b != 0 requires a mirror-closed "
            "downlink set (dl_start + dl_end = P)"
        )
    if q_tables is None:
        q_tables = q_size(grid, k)
    p = grid.num_subcarriers
    one_b = 1.0 + imb.b_iq
    scale = (
        a_digi ** (2 * k + 1) * abs(one_b) ** (2 * k) * one_b / p ** (2 * k)
    )
    ramp = np.exp(-1j * omega * np.arange(p))
    values = q_tables[k].astype(np.float64) * scale * ramp
    return NonlinearBasis(order=2 * k + 1, values=values)


def predict_si_power(
    a_hat: np.ndarray, mu: np.ndarray, h_hat: np.ndarray
) -> np.ndarray:
    """Predicted per-order SI power I[k, p] = |a_hat[k]|^2 mu[k, p] |H[p]|^2."""
    a_hat = np.asarray(a_hat)
    mu = np.asarray(mu, dtype=np.float64)
    h_hat = np.asarray(h_hat)
    if mu.shape[0] != len(a_hat):
        raise ValueError(
            f"a_hat has {len(a_hat)} orders but mu has {mu.shape[0]} rows"
        )
    if mu.shape[1] != len(h_hat):
        raise ValueError("mu and h_hat disagree on grid size")
    return (np.abs(a_hat) ** 2)[:, None] * mu * (np.abs(h_hat) ** 2)[None, :]
