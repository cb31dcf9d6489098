"""Two-stage frequency-domain self-interference cancellation.

Stage one estimates the transmitter model from a short training window:
the IQ-imbalance image weight b from mirror-subcarrier regressions, the
odd-order polynomial coefficients a_{2k+1} from an amplitude-swept
impulse pilot, and the effective channel H[p] from a per-subcarrier
scalar regression against the composite nonlinear regressor. Stage two
selects, per uplink subcarrier, which distortion orders are worth
cancelling (predicted distortion power above a threshold gamma) and then
runs a per-symbol canceller whose running cost is one multiply per
retained basis per subcarrier.

All estimator and canceller arithmetic is charged to an OpCounter so
complexity claims can be checked against actual counts. Receiver-side
FFTs of the received waveform are not charged: demodulation happens
regardless of which canceller is in use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counters import OpCounter
from .imd import basis_chain, pilot_peak_sample
from .ofdm import FreqSymbol, SubcarrierGrid, TimeSignal, mirror_values

_RANK_TOL = 1e-12
_AUTO_RIDGE_COND = 1e8
_REGRESSOR_POWER_TOL = 1e-12
# Echo taps resolved jointly by the polynomial estimator's multipath guard.
# Indoor self-interference channels are sparse, so a handful of taps carries
# the leakage that matters; the cap keeps the joint solve at a fixed size.
_PA_MAX_ECHOES = 8


class SingularSystemError(ValueError):
    """Raised when an unregularized LS system is rank deficient."""

    def __init__(self, column: int, message: str | None = None):
        self.column = int(column)
        if message is None:
            message = f"least-squares system is singular (column {column} is dependent or zero)"
        super().__init__(message)


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for the training-based estimators.

    gamma is the per-subcarrier distortion-power threshold used by basis
    selection. n_train_symbols counts the whole training window,
    impulse pilots included, so it must exceed n_impulse_symbols.
    impulse_amp_range gives the endpoints of the pilot peak-amplitude
    sweep at the amplifier input; the sweep is what makes the different
    polynomial orders separable. pa_refine_passes controls the multipath
    guard in the polynomial estimator: each pass estimates the echo tap
    gains from post-peak pilot samples and strips their pre-peak leakage
    out of the peak equations before refitting. Zero disables the guard.
    """

    gamma: float
    k_max: int = 2
    n_impulse_symbols: int = 4
    n_train_symbols: int = 14
    regularization: float = 0.0
    impulse_amp_range: tuple[float, float] = (0.6, 2.0)
    pa_refine_passes: int = 2

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.n_impulse_symbols < self.k_max + 1:
            raise ValueError(
                f"n_impulse_symbols={self.n_impulse_symbols} cannot identify "
                f"{self.k_max + 1} polynomial coefficients"
            )
        if self.n_train_symbols < self.n_impulse_symbols + 1:
            raise ValueError("n_train_symbols must leave at least one data training symbol")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")
        lo, hi = self.impulse_amp_range
        if not (0 < lo < hi):
            raise ValueError("impulse_amp_range must be increasing and positive")
        if self.pa_refine_passes < 0:
            raise ValueError("pa_refine_passes must be nonnegative")


@dataclass(frozen=True)
class TrainingEntry:
    """One training symbol: transmitted spectrum and received body samples."""

    tx: FreqSymbol
    rx_time: TimeSignal
    kind: str

    def __post_init__(self):
        if self.kind not in ("impulse", "data"):
            raise ValueError(f"unknown training entry kind {self.kind!r}")
        if self.rx_time.has_cp:
            raise ValueError("training rx_time must be a CP-stripped symbol body")


@dataclass(frozen=True)
class TrainingBuffer:
    """Training window: impulse pilot symbols first, then data symbols.

    Received symbols are stored as time-domain bodies. Estimators that
    work in the frequency domain demodulate on access; that FFT is
    receiver work and is never charged to a canceller stage.
    """

    grid: SubcarrierGrid
    entries: tuple[TrainingEntry, ...]
    omega: float

    def __post_init__(self):
        p = self.grid.num_subcarriers
        seen_data = False
        for i, entry in enumerate(self.entries):
            if len(entry.tx) != p or len(entry.rx_time) != p:
                raise ValueError(f"training entry {i} does not match the grid size {p}")
            if entry.kind == "data":
                seen_data = True
            elif seen_data:
                raise ValueError("impulse entries must precede all data entries")

    @property
    def impulse_entries(self) -> tuple[TrainingEntry, ...]:
        return tuple(e for e in self.entries if e.kind == "impulse")

    @property
    def data_entries(self) -> tuple[TrainingEntry, ...]:
        return tuple(e for e in self.entries if e.kind == "data")

    def rx_spectrum(self, entry: TrainingEntry) -> np.ndarray:
        """Receiver-side demodulation of one stored body (uncharged)."""
        return np.fft.fft(entry.rx_time.samples)


@dataclass(frozen=True)
class SICCoefficients:
    """Everything the running canceller needs.

    h_hat holds the effective channel estimate over the full grid
    (zeros outside the uplink band and at unestimated subcarriers).
    a_hat maps odd order 2k+1 to its polynomial coefficient. basis_sets
    maps each uplink subcarrier to the set of distortion indices k >= 1
    retained for cancellation; subsets of {1..k_max}, not necessarily
    downward closed. unestimated lists uplink subcarriers where the
    channel could not be identified; the canceller leaves them alone.
    """

    grid: SubcarrierGrid
    h_hat: np.ndarray
    a_hat: dict[int, complex]
    b_hat: complex
    basis_sets: dict[int, frozenset[int]]
    unestimated: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        h = np.asarray(self.h_hat, dtype=np.complex128)
        if h.shape != (self.grid.num_subcarriers,):
            raise ValueError("h_hat must have one entry per subcarrier")
        object.__setattr__(self, "h_hat", h)
        for order in self.a_hat:
            if order % 2 == 0 or order < 1:
                raise ValueError(f"a_hat keys must be odd orders, got {order}")
        k_max = self.k_max
        for p, kset in self.basis_sets.items():
            if not self.grid.in_ul(p):
                raise ValueError(f"basis set given for non-uplink subcarrier {p}")
            if any(k < 1 or k > k_max for k in kset):
                raise ValueError(f"basis set at p={p} is outside 1..{k_max}")

    @property
    def k_max(self) -> int:
        return max((order - 1) // 2 for order in self.a_hat) if self.a_hat else 0

    def a_vector(self) -> np.ndarray:
        """Coefficients as [a_1, a_3, ..., a_{2k_max+1}] with zeros filled in."""
        k_max = self.k_max
        return np.array(
            [self.a_hat.get(2 * k + 1, 0.0) for k in range(k_max + 1)], dtype=np.complex128
        )


def ls_solve(
    regressors: np.ndarray,
    observations: np.ndarray,
    regularization: float = 0.0,
    counter: OpCounter | None = None,
    stage: str = "ls",
) -> np.ndarray:
    """Least squares through the normal equations, with guard rails.

    With regularization == 0 the system is checked for rank deficiency
    first (a SingularSystemError names the offending column) and a small
    ridge is switched on automatically when the condition estimate
    exceeds 1e8. With regularization > 0 the ridge is applied as given.
    The returned coefficients minimize ||y - A c||^2 + reg ||c||^2.
    """
    a = np.asarray(regressors, dtype=np.complex128)
    y = np.asarray(observations, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("regressors must be a 2-D matrix")
    m, k = a.shape
    if y.shape != (m,):
        raise ValueError("observations must match the regressor row count")
    if m < k:
        raise ValueError(f"underdetermined system: {m} rows for {k} unknowns")

    reg = float(regularization)
    if reg == 0.0:
        diag = np.abs(np.diag(np.linalg.qr(a, mode="r")))
        top = diag.max() if diag.size else 0.0
        if top == 0.0:
            raise SingularSystemError(0, "least-squares system is all zero")
        worst = int(np.argmin(diag))
        if diag[worst] <= _RANK_TOL * top:
            raise SingularSystemError(worst)
        if top / diag[worst] > _AUTO_RIDGE_COND:
            reg = (top / _AUTO_RIDGE_COND) ** 2

    gram = a.conj().T @ a
    rhs = a.conj().T @ y
    if reg > 0.0:
        gram = gram + reg * np.eye(k)
    if counter is not None:
        counter.charge_ls(stage, m, k)
    return np.linalg.solve(gram, rhs)


def estimate_iq(
    buffer: TrainingBuffer,
    grid: SubcarrierGrid | None = None,
    counter: OpCounter | None = None,
) -> complex:
    """Estimate the IQ image weight b from mirror-subcarrier regressions.

    For every downlink subcarrier p whose mirror -p is also in the
    downlink band, the received value is regressed on the pair
    (X[p], conj(X[-p])); the ratio of the fitted coefficients is a local
    estimate of b and the estimates are combined with power weights.
    Data training symbols only; impulse pilots are rank one in this
    regression and are skipped.
    """
    if grid is None:
        grid = buffer.grid
    p_total = grid.num_subcarriers
    entries = buffer.data_entries
    if len(entries) < 2:
        raise ValueError("estimate_iq needs at least 2 data training symbols")

    pairs = [
        p
        for p in grid.dl_indices
        if grid.in_dl((p_total - p) % p_total) and (p_total - p) % p_total != p
    ]
    if not pairs:
        raise ValueError(
            "IQ image weight is unidentifiable: no downlink subcarrier has its mirror in the band"
        )

    tx = np.stack([e.tx.values for e in entries])
    rx = np.stack([buffer.rx_spectrum(e) for e in entries])
    m = len(entries)

    num = 0.0 + 0.0j
    den = 0.0
    for p in pairs:
        mp = (p_total - p) % p_total
        a = np.stack([tx[:, p], np.conj(tx[:, mp])], axis=1)
        try:
            c = ls_solve(a, rx[:, p], counter=counter, stage="estimate_iq")
        except SingularSystemError:
            continue
        if abs(c[0]) == 0.0:
            continue
        weight = abs(c[0]) ** 2 * float(np.sum(np.abs(tx[:, mp]) ** 2))
        num += weight * (c[1] / c[0])
        den += weight
        if counter is not None:
            counter.charge("estimate_iq", mults=m + 3, adds=m)
    if den == 0.0:
        raise ValueError("IQ image weight is unidentifiable: mirror content is all zero")
    return complex(num / den)


def _pilot_kernel(grid: SubcarrierGrid, omega: float, samples: np.ndarray) -> np.ndarray:
    """Unit-peak time profile of the flat-ramp pilot at the given body samples.

    The pilot spectrum is a constant with a linear phase ramp over the
    contiguous downlink span, so its time profile is a geometric sum
    evaluated in closed form: a handful of operations per sample, with no
    dependence on the grid or band sizes.
    """
    theta = (
        2.0 * np.pi * np.asarray(samples, dtype=np.float64) / grid.num_subcarriers
        - omega
    )
    n = grid.dl_size
    z = np.exp(1j * theta)
    near_one = np.abs(z - 1.0) < 1e-12
    # placeholder away from 1 but still unit modulus, so z**n stays bounded
    safe = np.where(near_one, np.exp(0.5j), z)
    out = np.exp(1j * theta * grid.dl_start) * (safe**n - 1.0) / (safe - 1.0)
    out[near_one] = n
    return out / n


def estimate_pa(
    buffer: TrainingBuffer,
    los_gain: complex,
    b_hat: complex,
    config: EstimatorConfig,
    los_tap_index: int = 0,
    counter: OpCounter | None = None,
) -> dict[int, complex]:
    """Estimate polynomial coefficients from the impulse pilot peaks.

    Each impulse symbol concentrates the downlink band into one body
    sample of known amplitude. Sampling the received body at the pilot
    peak (shifted by the line-of-sight tap) gives one scalar equation
    y_m ~= h_los * sum_k a_k |alpha_m|^{2k} alpha_m per symbol, where
    alpha_m is the amplifier input peak after IQ imbalance. The sweep of
    pilot amplitudes across symbols makes the orders separable, and the
    solve touches k_max + 1 unknowns regardless of how many subcarriers
    the uplink band has.

    Echo taps behind the line of sight leak the pilot's pre-peak tail
    into the peak sample. That leakage is linear in the pilot amplitude,
    so it aliases straight into the first-order coefficient and skews
    the coefficient ratios, which the downstream channel fit cannot
    absorb. When config.pa_refine_passes > 0 the estimator therefore
    refines: post-peak samples n0 + tau see each echo tap against the
    full pilot peak, a matched filter over the guard window locates the
    strongest echoes, a small joint solve over just those taps removes
    their mutual kernel leakage, their pre-peak contribution is
    subtracted from the peak equations, and the polynomial is refit.
    The extra work is bounded by the cyclic prefix length and the echo
    cap, still independent of both band sizes.
    """
    entries = buffer.impulse_entries
    k_max = config.k_max
    if len(entries) < k_max + 1:
        raise ValueError(
            f"{len(entries)} impulse symbols cannot identify {k_max + 1} coefficients"
        )
    if los_gain == 0:
        raise ValueError("line-of-sight gain must be nonzero")

    grid = buffer.grid
    p_total = grid.num_subcarriers
    n0 = pilot_peak_sample(grid, buffer.omega)
    n0_int = int(round(n0))
    if abs(n0 - n0_int) > 1e-9:
        raise ValueError("pilot peak does not land on an integer sample")

    m = len(entries)
    rows = np.empty((m, k_max + 1), dtype=np.complex128)
    y = np.empty(m, dtype=np.complex128)
    peaks = np.empty(m)
    anchor = grid.dl_start
    for i, entry in enumerate(entries):
        amp = abs(entry.tx.values[anchor])
        if amp == 0.0:
            raise ValueError(f"impulse entry {i} has no pilot energy")
        peaks[i] = amp * grid.dl_size / p_total
        alpha = peaks[i] + b_hat * np.conj(peaks[i])
        mag2 = abs(alpha) ** 2
        term = alpha
        for k in range(k_max + 1):
            rows[i, k] = los_gain * term
            term = term * mag2
        y[i] = entry.rx_time.samples[(n0_int + los_tap_index) % p_total]
    if counter is not None:
        counter.charge("estimate_pa", mults=m * (2 * k_max + 3), adds=m)
    coeffs = ls_solve(
        rows, y, config.regularization, counter=counter, stage="estimate_pa"
    )

    guard = min(grid.cp_length, n0_int)
    if guard > 0 and config.pa_refine_passes > 0:
        offsets = np.arange(-guard, guard + 1)
        kappa = _pilot_kernel(grid, buffer.omega, n0_int + offsets)
        x_all = peaks[:, None] * kappa[None, :]
        a_all = x_all + b_hat * np.conj(x_all)
        mag2_all = np.abs(a_all) ** 2
        post_idx = (n0_int + los_tap_index + np.arange(1, guard + 1)) % p_total
        rx_post = np.array(
            [entry.rx_time.samples[post_idx] for entry in entries]
        )
        n_echo = min(_PA_MAX_ECHOES, guard)
        # column s of the joint design holds the echo at delay taus[s];
        # row (i, tau) needs the amplifier output at offset tau - taus[s]
        tau_rows = np.arange(1, guard + 1)
        if counter is not None:
            counter.charge(
                "estimate_pa",
                mults=8 * (2 * guard + 1)
                + config.pa_refine_passes
                * (
                    m * (2 * guard + 1) * (k_max + 3)
                    + guard * (2 * m + 1)
                    + 2 * m * n_echo
                ),
                adds=config.pa_refine_passes * m * guard * 2,
            )
        for _ in range(config.pa_refine_passes):
            a_vec = np.array([coeffs[k] for k in range(k_max + 1)])
            u = np.zeros_like(a_all)
            for k in range(k_max, -1, -1):
                u = u * mag2_all + a_vec[k]
            u = u * a_all
            u_peak = u[:, guard]
            u_post = u[:, guard + 1 :]
            resid = rx_post - los_gain * u_post
            matched = (np.conj(u_peak) @ resid) / np.sum(np.abs(u_peak) ** 2)
            taus = 1 + np.sort(np.argsort(np.abs(matched))[::-1][:n_echo])
            design = u[:, guard + tau_rows[:, None] - taus[None, :]]
            gains = ls_solve(
                design.reshape(m * guard, len(taus)),
                resid.reshape(m * guard),
                config.regularization,
                counter=counter,
                stage="estimate_pa",
            )
            y_corr = y - u[:, guard - taus] @ gains
            coeffs = ls_solve(
                rows, y_corr, config.regularization, counter=counter, stage="estimate_pa"
            )
    return {2 * k + 1: complex(coeffs[k]) for k in range(k_max + 1)}


def _charge_xiq(counter: OpCounter | None, stage: str, grid: SubcarrierGrid) -> None:
    if counter is not None:
        counter.charge(stage, mults=grid.dl_size, adds=grid.dl_size)


def _charge_chain(counter: OpCounter | None, stage: str, p: int, k_max: int) -> None:
    """Cost of basis_chain: one spectrum FFT plus squaring, then one
    FFT, one IFFT, one elementwise product and one rescale per order."""
    if counter is not None:
        counter.charge_fft(stage, p, count=1 + 2 * k_max)
        counter.charge(stage, mults=p * (1 + 2 * k_max))


def _compose_xiq(values: np.ndarray, b_hat: complex) -> np.ndarray:
    return values + b_hat * np.conj(mirror_values(values))


def estimate_channel(
    buffer: TrainingBuffer,
    a_hat: dict[int, complex],
    b_hat: complex,
    config: EstimatorConfig,
    counter: OpCounter | None = None,
) -> tuple[np.ndarray, frozenset[int]]:
    """Per-subcarrier scalar LS for the effective channel on the uplink band.

    The regressor at subcarrier p is sum_k a_hat_{2k+1} Phi_{2k+1}[p]
    built from the composed transmit spectrum, so the channel stays
    identifiable even where only out-of-band distortion lands. Returns
    (h_hat over the full grid, frozenset of uplink subcarriers whose
    regressor power was too small to trust); those stay zero and the
    canceller leaves them untouched.
    """
    entries = buffer.data_entries
    if not entries:
        raise ValueError("estimate_channel needs at least one data training symbol")
    grid = buffer.grid
    p_total = grid.num_subcarriers
    k_max = config.k_max
    ul = grid.ul_indices
    a_vec = np.array([a_hat.get(2 * k + 1, 0.0) for k in range(k_max + 1)], dtype=np.complex128)

    num = np.zeros(len(ul), dtype=np.complex128)
    den = np.zeros(len(ul), dtype=np.float64)
    m = len(entries)
    for entry in entries:
        xiq = _compose_xiq(entry.tx.values, b_hat)
        _charge_xiq(counter, "train_basis", grid)
        chain = basis_chain(xiq, k_max)
        _charge_chain(counter, "train_basis", p_total, k_max)
        regressor = (a_vec[:, None] * chain[:, ul]).sum(axis=0)
        rx = buffer.rx_spectrum(entry)
        num += np.conj(regressor) * rx[ul]
        den += np.abs(regressor) ** 2
        if counter is not None:
            counter.charge(
                "estimate_channel",
                mults=len(ul) * (k_max + 1) + 2 * len(ul),
                adds=len(ul) * k_max + 2 * len(ul),
            )
    if counter is not None:
        counter.charge("estimate_channel", mults=len(ul), adds=0)

    h_hat = np.zeros(p_total, dtype=np.complex128)
    top = den.max() if den.size else 0.0
    bad = den <= _REGRESSOR_POWER_TOL * top if top > 0 else np.ones_like(den, dtype=bool)
    good = ~bad
    h_hat[np.asarray(ul)[good]] = num[good] / den[good]
    unestimated = frozenset(int(p) for p in np.asarray(ul)[bad])
    return h_hat, unestimated


def select_basis(
    a_hat: dict[int, complex],
    mu: np.ndarray,
    h_hat: np.ndarray,
    gamma: float,
    k_max: int,
    grid: SubcarrierGrid,
    counter: OpCounter | None = None,
) -> dict[int, frozenset[int]]:
    """Pick, per uplink subcarrier, the distortion orders worth cancelling.

    Walks k = 1..k_max and keeps k while the predicted distortion power
    |a_{2k+1}|^2 mu_{2k+1}[p] |h[p]|^2 exceeds gamma, stopping at the
    first order that falls below. The walk stops early because predicted
    power decays with k at sane drive levels; anything below gamma costs
    more to cancel than it removes.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if mu.shape[0] < k_max + 1:
        raise ValueError("mu table does not cover k_max")
    sets: dict[int, frozenset[int]] = {}
    evals = 0
    for p in grid.ul_indices:
        kept = []
        h2 = abs(h_hat[p]) ** 2
        for k in range(1, k_max + 1):
            a = a_hat.get(2 * k + 1, 0.0)
            evals += 1
            if abs(a) ** 2 * mu[k, p] * h2 > gamma:
                kept.append(k)
            else:
                break
        sets[int(p)] = frozenset(kept)
    if counter is not None:
        counter.charge("select_basis", mults=3 * evals, adds=0)
    return sets


def precombine(coeffs: SICCoefficients, counter: OpCounter | None = None) -> np.ndarray:
    """One-off combine c_k[p] = h_hat[p] a_{2k+1} used by the runner."""
    k_max = coeffs.k_max
    grid = coeffs.grid
    combined = np.zeros((k_max + 1, grid.num_subcarriers), dtype=np.complex128)
    a_vec = coeffs.a_vector()
    ul = grid.ul_indices
    combined[:, ul] = a_vec[:, None] * coeffs.h_hat[ul][None, :]
    if counter is not None:
        counter.charge("coeff_combine", mults=(k_max + 1) * len(ul), adds=0)
    return combined


def run_sic(
    y_rx: FreqSymbol,
    x_dl: FreqSymbol,
    coeffs: SICCoefficients,
    counter: OpCounter | None = None,
    combined: np.ndarray | None = None,
) -> FreqSymbol:
    """Cancel self-interference on the uplink band of one symbol.

    Builds the composed transmit spectrum and the distortion bases up to
    the largest retained order, then subtracts
    sum_{k in {0} u K_p} h_hat[p] a_{2k+1} Phi_{2k+1}[p] from the
    received spectrum at each uplink subcarrier. Subcarriers outside the
    uplink band, and unestimated ones, pass through untouched. Running
    stage cost is sum_p (1 + |K_p|) multiplies.
    """
    grid = coeffs.grid
    p_total = grid.num_subcarriers
    if len(y_rx) != p_total or len(x_dl) != p_total:
        raise ValueError("symbol length does not match the coefficient grid")
    outside = np.abs(x_dl.values) > 0
    outside[grid.dl_indices] = False
    if np.any(outside):
        raise ValueError(
            "allocation mismatch: transmit spectrum has energy outside the downlink band"
        )

    k_used = 0
    for kset in coeffs.basis_sets.values():
        if kset:
            k_used = max(k_used, max(kset))

    xiq = _compose_xiq(x_dl.values, coeffs.b_hat)
    _charge_xiq(counter, "run_basis", grid)
    chain = basis_chain(xiq, k_used)
    _charge_chain(counter, "run_basis", p_total, k_used)

    if combined is None:
        combined = precombine(coeffs, counter)

    ul = grid.ul_indices
    est = np.zeros(p_total, dtype=np.complex128)
    mults = 0
    adds = 0
    skip = coeffs.unestimated
    for p in ul:
        if p in skip:
            continue
        acc = combined[0, p] * xiq[p]
        mults += 1
        for k in sorted(coeffs.basis_sets.get(int(p), ())):
            acc += combined[k, p] * chain[k, p]
            mults += 1
            adds += 1
        est[p] = acc
    out = y_rx.values.copy()
    out[ul] = out[ul] - est[ul]
    adds += len(ul)
    if counter is not None:
        counter.charge("run", mults=mults, adds=adds)
    return FreqSymbol(out, y_rx.symbol_index)


def perfect_coefficients(
    grid: SubcarrierGrid,
    freq_response: np.ndarray,
    pa_coeffs: dict[int, complex],
    b_iq: complex,
) -> SICCoefficients:
    """Oracle coefficients with every basis retained; for invariant checks."""
    orders = sorted(pa_coeffs)
    k_max = (orders[-1] - 1) // 2
    full = frozenset(range(1, k_max + 1))
    return SICCoefficients(
        grid=grid,
        h_hat=np.asarray(freq_response, dtype=np.complex128).copy(),
        a_hat={int(o): complex(v) for o, v in pa_coeffs.items()},
        b_hat=complex(b_iq),
        basis_sets={int(p): full for p in grid.ul_indices},
    )


def estimate_linear_channel(
    buffer: TrainingBuffer, counter: OpCounter | None = None
) -> np.ndarray:
    """Scalar LS of the received spectrum on the transmit spectrum alone.

    The linear baseline's estimator. Where the transmit spectrum carries
    no energy (the uplink band in a split allocation) the estimate stays
    zero and the linear canceller does nothing.
    """
    entries = buffer.data_entries
    if not entries:
        raise ValueError("linear channel estimation needs at least one data symbol")
    grid = buffer.grid
    ul = grid.ul_indices
    num = np.zeros(len(ul), dtype=np.complex128)
    den = np.zeros(len(ul), dtype=np.float64)
    for entry in entries:
        tx = entry.tx.values[ul]
        rx = buffer.rx_spectrum(entry)[ul]
        num += np.conj(tx) * rx
        den += np.abs(tx) ** 2
        if counter is not None:
            counter.charge("linear_est", mults=2 * len(ul), adds=2 * len(ul))
    h = np.zeros(grid.num_subcarriers, dtype=np.complex128)
    top = den.max() if den.size else 0.0
    good = den > _REGRESSOR_POWER_TOL * top if top > 0 else np.zeros_like(den, dtype=bool)
    h[np.asarray(ul)[good]] = num[good] / den[good]
    if counter is not None:
        counter.charge("linear_est", mults=int(np.sum(good)), adds=0)
    return h


def baseline_linear(
    y_rx: FreqSymbol,
    x_dl: FreqSymbol,
    h_hat_lin: np.ndarray,
    grid: SubcarrierGrid,
    counter: OpCounter | None = None,
) -> FreqSymbol:
    """Linear-only cancellation: subtract h_lin[p] X[p] on the uplink band."""
    if len(y_rx) != grid.num_subcarriers or len(x_dl) != grid.num_subcarriers:
        raise ValueError("symbol length does not match the grid")
    ul = grid.ul_indices
    out = y_rx.values.copy()
    out[ul] = out[ul] - h_hat_lin[ul] * x_dl.values[ul]
    if counter is not None:
        counter.charge("linear_run", mults=len(ul), adds=len(ul))
    return FreqSymbol(out, y_rx.symbol_index)


def baseline_full_ls(
    buffer: TrainingBuffer,
    grid: SubcarrierGrid,
    k_max: int,
    b_hat: complex = 0.0,
    regularization: float = 0.0,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Conventional joint per-subcarrier LS over all distortion orders.

    Fits, at every uplink subcarrier independently, a coefficient for
    each basis Phi_1..Phi_{2k_max+1} from the whole training window.
    This is the accuracy ceiling the low-complexity estimator is
    compared against; its cost scales with the uplink band width times
    the training length. A subcarrier whose regressors are singular
    (the linear column is identically zero off the downlink band, for
    instance) falls back to a tiny documented ridge.
    """
    entries = buffer.entries
    if len(entries) < k_max + 1:
        raise ValueError(
            f"{len(entries)} training symbols cannot fit {k_max + 1} coefficients per subcarrier"
        )
    p_total = grid.num_subcarriers
    ul = grid.ul_indices
    m = len(entries)

    chains = np.empty((m, k_max + 1, p_total), dtype=np.complex128)
    rx = np.empty((m, p_total), dtype=np.complex128)
    for i, entry in enumerate(entries):
        xiq = _compose_xiq(entry.tx.values, b_hat)
        _charge_xiq(counter, "full_ls_basis", grid)
        chains[i] = basis_chain(xiq, k_max)
        _charge_chain(counter, "full_ls_basis", p_total, k_max)
        rx[i] = buffer.rx_spectrum(entry)

    coeffs = np.zeros((k_max + 1, p_total), dtype=np.complex128)
    for p in ul:
        a = chains[:, :, p]
        y = rx[:, p]
        try:
            c = ls_solve(a, y, regularization, counter=counter, stage="full_ls_est")
        except SingularSystemError:
            scale = float(np.max(np.abs(a) ** 2))
            if scale == 0.0:
                continue
            c = ls_solve(a, y, 1e-8 * scale, counter=counter, stage="full_ls_est")
        coeffs[:, p] = c
    return coeffs


def run_full_ls(
    y_rx: FreqSymbol,
    x_dl: FreqSymbol,
    coeffs: np.ndarray,
    b_hat: complex,
    grid: SubcarrierGrid,
    counter: OpCounter | None = None,
) -> FreqSymbol:
    """Run the conventional canceller: every basis at every uplink subcarrier."""
    p_total = grid.num_subcarriers
    if len(y_rx) != p_total or len(x_dl) != p_total:
        raise ValueError("symbol length does not match the grid")
    k_max = coeffs.shape[0] - 1
    xiq = _compose_xiq(x_dl.values, b_hat)
    _charge_xiq(counter, "full_ls_run_basis", grid)
    chain = basis_chain(xiq, k_max)
    _charge_chain(counter, "full_ls_run_basis", p_total, k_max)
    ul = grid.ul_indices
    est = (coeffs[:, ul] * chain[:, ul]).sum(axis=0)
    out = y_rx.values.copy()
    out[ul] = out[ul] - est
    if counter is not None:
        counter.charge(
            "full_ls_run",
            mults=(k_max + 1) * len(ul),
            adds=k_max * len(ul) + len(ul),
        )
    return FreqSymbol(out, y_rx.symbol_index)


def save_coefficients(coeffs: SICCoefficients, path) -> None:
    """Dump canceller coefficients to CSV with model headers.

    Header comment lines carry the polynomial coefficients, the image
    weight and the retained basis sets; the table body is one
    p,h_re,h_im row per subcarrier.
    """
    lines = []
    for order in sorted(coeffs.a_hat):
        a = complex(coeffs.a_hat[order])
        lines.append(f"# a_{order}={a.real!r},{a.imag!r}")
    b = complex(coeffs.b_hat)
    lines.append(f"# b_iq={b.real!r},{b.imag!r}")
    kp = ";".join(
        f"{p}:" + " ".join(str(k) for k in sorted(coeffs.basis_sets[p]))
        for p in sorted(coeffs.basis_sets)
    )
    lines.append(f"# K_p={kp}")
    if coeffs.unestimated:
        lines.append("# unestimated=" + " ".join(str(p) for p in sorted(coeffs.unestimated)))
    lines.append("p,h_re,h_im")
    for p in range(coeffs.grid.num_subcarriers):
        h = complex(coeffs.h_hat[p])
        lines.append(f"{p},{h.real!r},{h.imag!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_coefficients(path, grid: SubcarrierGrid) -> SICCoefficients:
    """Inverse of save_coefficients; round-trips exactly."""
    a_hat: dict[int, complex] = {}
    b_hat = 0.0 + 0.0j
    basis_sets: dict[int, frozenset[int]] = {}
    unestimated: frozenset[int] = frozenset()
    h_hat = np.zeros(grid.num_subcarriers, dtype=np.complex128)
    saw_header = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                key = key.strip()
                if key.startswith("a_"):
                    re_s, _, im_s = value.partition(",")
                    a_hat[int(key[2:])] = complex(float(re_s), float(im_s))
                elif key == "b_iq":
                    re_s, _, im_s = value.partition(",")
                    b_hat = complex(float(re_s), float(im_s))
                elif key == "K_p":
                    for item in value.split(";"):
                        if not item:
                            continue
                        p_s, _, ks = item.partition(":")
                        basis_sets[int(p_s)] = frozenset(
                            int(k) for k in ks.split() if k
                        )
                elif key == "unestimated":
                    unestimated = frozenset(int(p) for p in value.split() if p)
                else:
                    raise ValueError(f"line {lineno}: unknown header key {key!r}")
                continue
            if line == "p,h_re,h_im":
                saw_header = True
                continue
            if not saw_header:
                raise ValueError(f"line {lineno}: data before the p,h_re,h_im header")
            p_s, re_s, im_s = line.split(",")
            h_hat[int(p_s)] = complex(float(re_s), float(im_s))
    if not a_hat:
        raise ValueError("coefficient file carries no polynomial headers")
    return SICCoefficients(
        grid=grid,
        h_hat=h_hat,
        a_hat=a_hat,
        b_hat=b_hat,
        basis_sets=basis_sets,
        unestimated=unestimated,
    )
