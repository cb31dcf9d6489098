"""OFDM numerology, flexible-duplex allocation, and transform primitives.

Transform convention used throughout the package:

    idft:  x[n] = (1/P) * sum_p X[p] * exp(+j 2 pi p n / P)
    dft:   X[p] =         sum_n x[n] * exp(-j 2 pi p n / P)

The inverse transform carries the 1/P factor (``numpy.fft.ifft`` /
``numpy.fft.fft``).  Under this scaling Parseval reads

    sum_n |x[n]|^2 = (1/P) * sum_p |X[p]|^2.

Subcarrier allocations are contiguous index ranges on a single length-P DFT
grid; negative frequencies live at the top of the grid, so the mirror image
of subcarrier p is (P - p) mod P.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

_QAM_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class SubcarrierGrid:
    """OFDM dimensions plus downlink/uplink allocation ranges.

    Parameters
    ----------
    num_subcarriers : int
        DFT size P.
    subcarrier_spacing : float
        Subcarrier spacing in Hz.
    cp_length : int
        Cyclic-prefix length in samples, 0 < cp_length < P.
    dl_set, ul_set : tuple of int
        Inclusive index ranges (start, end) of the downlink and uplink
        allocations on the grid, 0 <= start <= end < P.
    """

    num_subcarriers: int
    subcarrier_spacing: float
    cp_length: int
    dl_set: tuple[int, int]
    ul_set: tuple[int, int]

    def __post_init__(self):
        p = self.num_subcarriers
        if not (isinstance(p, (int, np.integer)) and p > 0):
            raise ValueError(f"num_subcarriers must be a positive integer, got {p!r}")
        if not self.subcarrier_spacing > 0:
            raise ValueError(
                f"subcarrier_spacing must be positive, got {self.subcarrier_spacing!r}"
            )
        if not (0 < self.cp_length < p):
            raise ValueError(
                f"cp_length must satisfy 0 < cp_length < num_subcarriers, "
                f"got cp_length={self.cp_length} with num_subcarriers={p}"
            )
        for name in ("dl_set", "ul_set"):
            rng = getattr(self, name)
            if len(rng) != 2:
                raise ValueError(f"{name} must be a (start, end) pair, got {rng!r}")
            start, end = rng
            if not (0 <= start <= end < p):
                raise ValueError(
                    f"{name}=({start}, {end}) violates 0 <= start <= end < {p}"
                )
            object.__setattr__(self, name, (int(start), int(end)))

    @property
    def dl_start(self) -> int:
        return self.dl_set[0]

    @property
    def dl_end(self) -> int:
        return self.dl_set[1]

    @property
    def ul_start(self) -> int:
        return self.ul_set[0]

    @property
    def ul_end(self) -> int:
        return self.ul_set[1]

    @property
    def dl_size(self) -> int:
        """Number of downlink subcarriers."""
        return self.dl_set[1] - self.dl_set[0] + 1

    @property
    def ul_size(self) -> int:
        """Number of uplink subcarriers."""
        return self.ul_set[1] - self.ul_set[0] + 1

    @property
    def dl_indices(self) -> np.ndarray:
        return np.arange(self.dl_set[0], self.dl_set[1] + 1)

    @property
    def ul_indices(self) -> np.ndarray:
        return np.arange(self.ul_set[0], self.ul_set[1] + 1)

    @property
    def dl_mask(self) -> np.ndarray:
        """Boolean indicator of the downlink allocation, length P."""
        mask = np.zeros(self.num_subcarriers, dtype=bool)
        mask[self.dl_indices] = True
        return mask

    def in_dl(self, p: int) -> bool:
        return self.dl_set[0] <= p <= self.dl_set[1]

    def in_ul(self, p: int) -> bool:
        return self.ul_set[0] <= p <= self.ul_set[1]

    @property
    def sampling_interval(self) -> float:
        """Baseband sampling interval 1 / (P * subcarrier_spacing), seconds."""
        return 1.0 / (self.num_subcarriers * self.subcarrier_spacing)


@dataclass(frozen=True)
class FreqSymbol:
    """One OFDM symbol in the frequency domain: P complex amplitudes."""

    values: np.ndarray
    symbol_index: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.ndim != 1:
            raise ValueError(f"values must be one-dimensional, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TimeSignal:
    """A block of complex baseband samples, with or without cyclic prefix."""

    samples: np.ndarray
    has_cp: bool = False

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.ndim != 1:
            raise ValueError(f"samples must be one-dimensional, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]


class DuplexMode(enum.Enum):
    IBFD = "ibfd"
    SBFD = "sbfd"
    PARTIAL_OVERLAP = "partial_overlap"


def mirror_index(p: int, num_subcarriers: int) -> int:
    """Map subcarrier p to its negative-frequency image (P - p) mod P.

    The map is an involution; it fixes 0 (and P/2 when P is even).
    """
    if not (0 <= p < num_subcarriers):
        raise ValueError(f"subcarrier index {p} outside [0, {num_subcarriers})")
    return (num_subcarriers - p) % num_subcarriers


def mirror_values(values: np.ndarray) -> np.ndarray:
    """Return the array reindexed by the mirror map: out[p] = values[(P - p) mod P]."""
    return np.roll(values[::-1], 1)


def idft(spectrum: FreqSymbol) -> TimeSignal:
    """Inverse transform with the 1/P factor.

    samples[n] = (1/P) * sum_p values[p] * exp(+j 2 pi p n / P)
    """
    return TimeSignal(samples=np.fft.ifft(spectrum.values), has_cp=False)


def dft(signal: TimeSignal) -> FreqSymbol:
    """Forward transform without a scale factor.

    values[p] = sum_n samples[n] * exp(-j 2 pi p n / P)

    The input must be a CP-free body of P samples; strip the prefix first.
    """
    if signal.has_cp:
        raise ValueError("dft expects a CP-free signal; call remove_cp first")
    return FreqSymbol(values=np.fft.fft(signal.samples))


def add_cp(signal: TimeSignal, grid: SubcarrierGrid) -> TimeSignal:
    """Prepend the last cp_length samples of the body."""
    if signal.has_cp:
        raise ValueError("signal already has a cyclic prefix")
    n = len(signal)
    if n != grid.num_subcarriers:
        raise ValueError(
            f"body length {n} does not match num_subcarriers {grid.num_subcarriers}"
        )
    ncp = grid.cp_length
    return TimeSignal(
        samples=np.concatenate([signal.samples[n - ncp:], signal.samples]),
        has_cp=True,
    )


def remove_cp(signal: TimeSignal, grid: SubcarrierGrid) -> TimeSignal:
    """Drop the first cp_length samples; exact inverse of add_cp."""
    if not signal.has_cp:
        raise ValueError("signal has no cyclic prefix to remove")
    expected = grid.num_subcarriers + grid.cp_length
    if len(signal) != expected:
        raise ValueError(
            f"prefixed length {len(signal)} does not match P + cp_length = {expected}"
        )
    return TimeSignal(samples=signal.samples[grid.cp_length:], has_cp=False)


def qam_constellation(order: int) -> np.ndarray:
    """Unit-average-power square QAM constellation points.

    Points are (i + j*q) * sqrt(3 / (2 (m^2 - 1))) for odd i, q in
    [-(m-1), m-1], m = sqrt(order), which normalizes E|X|^2 to one.
    """
    if order not in _QAM_ORDERS:
        raise ValueError(f"order must be one of {_QAM_ORDERS}, got {order}")
    m = int(round(np.sqrt(order)))
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    scale = np.sqrt(3.0 / (2.0 * (m * m - 1)))
    pts = (levels[:, None] + 1j * levels[None, :]).ravel() * scale
    return pts


def gen_qam_symbols(
    grid: SubcarrierGrid,
    order: int,
    amplitude: float,
    count: int,
    seed: int,
) -> list[FreqSymbol]:
    """Draw independent uniform QAM symbols on the downlink allocation.

    Parameters
    ----------
    grid : SubcarrierGrid
    order : int
        Constellation size, one of 4, 16, 64.
    amplitude : float
        Per-subcarrier RMS amplitude: E|X[p]|^2 = amplitude^2 on dl_set.
    count : int
        Number of symbols to generate.
    seed : int
        PRNG seed; output is deterministic given the seed.

    Returns
    -------
    list of FreqSymbol
        count symbols, zero outside dl_set, symbol_index running 0..count-1.
    """
    if amplitude <= 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    if grid.dl_size == 0:
        raise ValueError("empty dl_set: nothing to modulate")
    pts = qam_constellation(order) * amplitude
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(pts), size=(count, grid.dl_size))
    out = []
    for m in range(count):
        values = np.zeros(grid.num_subcarriers, dtype=np.complex128)
        values[grid.dl_indices] = pts[picks[m]]
        out.append(FreqSymbol(values=values, symbol_index=m))
    return out


def classify_duplex(grid: SubcarrierGrid) -> tuple[DuplexMode, int]:
    """Classify the allocation and report the UL/DL overlap size.

    Returns (mode, overlap) where overlap = |ul_set intersect dl_set|.
    IBFD means ul_set equals dl_set; SBFD means the sets are disjoint;
    anything else is partial overlap.
    """
    lo = max(grid.dl_start, grid.ul_start)
    hi = min(grid.dl_end, grid.ul_end)
    overlap = max(0, hi - lo + 1)
    if grid.dl_set == grid.ul_set:
        return DuplexMode.IBFD, overlap
    if overlap == 0:
        return DuplexMode.SBFD, overlap
    return DuplexMode.PARTIAL_OVERLAP, overlap
