"""
Direct computation on the points sqrt(n) mod 1.

Fractional parts are exact fixed-point integers with FRAC_BITS fractional bits,
obtained from integer square roots. Sorted sequences keep the fixed-point value
split into a 64-bit high word and a 32-bit low word, so gaps are differences of
integers rather than of rounded doubles.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Optional

import gmpy2
import numpy as np

from sqrt_gaps import numerics_logger, parallel
from sqrt_gaps.models import N_MAX, N_MIN, GapSummary
from sqrt_gaps.testfn import BumpFunction, TestFunctionSet

LOGGER = numerics_logger(__name__)

FRAC_BITS = 96
LOW_BITS = 32
N_LIMIT = 2**62
CHUNK = 1 << 15
FLATNESS_WIDTH = 0.1

_LOW_MASK = (1 << LOW_BITS) - 1
_UNIT = float(2**FRAC_BITS)


def fixed_frac_sqrt(n: int) -> int:
    """floor(2^96 * frac(sqrt(n)))"""
    if not 0 <= n <= N_LIMIT:
        raise ValueError(f'n must be in [0, 2^62], got {n}')
    n = gmpy2.mpz(n)
    return int(gmpy2.isqrt(n << (2 * FRAC_BITS)) - (gmpy2.isqrt(n) << FRAC_BITS))


def frac_sqrt(n: int) -> Fraction:
    """
    Fractional part of sqrt(n), truncated to 96 bits.
    The truncation error is below 2^-96; perfect squares give exactly 0.
    """
    return Fraction(fixed_frac_sqrt(n), 2**FRAC_BITS)


def _fixed_chunk(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    start, stop = bounds
    hi = np.empty(stop - start, dtype=np.uint64)
    lo = np.empty(stop - start, dtype=np.uint32)
    for i, n in enumerate(range(start, stop)):
        v = fixed_frac_sqrt(n)
        hi[i] = v >> LOW_BITS
        lo[i] = v & _LOW_MASK
    return hi, lo


def fixed_range(start: int, stop: int, threads: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """High and low words of the fixed-point fractional parts for start <= n < stop."""
    bounds = [(b, min(b + CHUNK, stop)) for b in range(start, stop, CHUNK)]
    parts = parallel.chunked_map(_fixed_chunk, bounds, threads, chunk_size=1, prefer='processes')
    if not parts:
        return np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.uint32)
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))


def _as_float(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    return (hi.astype(np.float64) * 2.0**LOW_BITS + lo.astype(np.float64)) / _UNIT


@lru_cache(maxsize=4)
def frac_values(start: int, stop: int) -> np.ndarray:
    """frac(sqrt(n)) as doubles for start <= n < stop. Read-only, cached."""
    values = _as_float(*fixed_range(start, stop))
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class FracSequence:
    """
    Sorted fractional parts of sqrt(n) for N <= n < 2N.
    Ties are ordered by source n.
    """
    N: int
    hi: np.ndarray
    lo: np.ndarray
    sources: np.ndarray

    @cached_property
    def values(self) -> np.ndarray:
        return _as_float(self.hi, self.lo)

    def fixed(self, idx: int) -> int:
        return (int(self.hi[idx]) << LOW_BITS) | int(self.lo[idx])

    @cached_property
    def gaps(self) -> np.ndarray:
        """Circular gaps: successor minus value, the last one wrapping past 1."""
        hi_diff = np.diff(self.hi).astype(np.float64)
        lo_diff = np.diff(self.lo.astype(np.int64)).astype(np.float64)
        inner = (hi_diff * 2.0**LOW_BITS + lo_diff) / _UNIT
        wrap = ((1 << FRAC_BITS) - self.fixed(-1) + self.fixed(0)) / _UNIT
        return np.append(inner, wrap)

    @cached_property
    def max_gap(self) -> float:
        return float(self.gaps.max())


def build_sequence(N: int, threads: Optional[int] = None) -> FracSequence:
    if not N_MIN <= N <= N_MAX:
        raise ValueError(f'N must be in [{N_MIN}, {N_MAX}], got {N}')
    hi, lo = fixed_range(N, 2 * N, threads)
    sources = np.arange(N, 2 * N, dtype=np.int64)
    order = np.lexsort((sources, lo, hi))
    LOGGER.debug(f'Built sequence N={N}')
    return FracSequence(N=N, hi=hi[order], lo=lo[order], sources=sources[order])


def count_in_window(seq: FracSequence, x: float, s: float) -> int:
    """Number of points in [x, x + s/N), wrapping mod 1."""
    if not 0 <= x < 1:
        raise ValueError(f'x must be in [0, 1), got {x}')
    if s <= 0:
        raise ValueError(f's must be positive, got {s}')
    return int(count_in_windows(seq, np.array([x]), s)[0])


def count_in_windows(seq: FracSequence, xs: np.ndarray, s: float) -> np.ndarray:
    width = s / seq.N
    if width >= 1:
        return np.full(np.shape(xs), seq.N, dtype=np.int64)
    values = seq.values
    xs = np.asarray(xs, dtype=float)
    end = xs + width
    start_idx = np.searchsorted(values, xs, side='left')
    plain = np.searchsorted(values, np.minimum(end, 1.0), side='left') - start_idx
    wrapped = np.searchsorted(values, np.maximum(end - 1, 0.0), side='left')
    return np.where(end > 1, seq.N - start_idx + wrapped, plain)


def void_statistic(seq: FracSequence, s: float) -> float:
    """
    Measure of the x in [0, 1) whose window [x, x + s/N) holds no point.
    Exact: every circular gap g contributes max(g - s/N, 0).
    """
    if s <= 0:
        raise ValueError(f's must be positive, got {s}')
    return math.fsum(np.maximum(seq.gaps - s / seq.N, 0.0))


def void_curve(seq: FracSequence, s_grid) -> np.ndarray:
    return np.array([void_statistic(seq, s) for s in s_grid])


def void_gap_functional(seq: FracSequence, L: float) -> tuple[float, float]:
    """
    The void statistic at L, and the mean overshoot of the normalized gaps past L.
    The two are equal for every finite sequence.
    """
    if L <= 0:
        raise ValueError(f'L must be positive, got {L}')
    N = seq.N
    overshoot = math.fsum(np.maximum(N * seq.gaps - L, 0.0)) / N
    return void_statistic(seq, L), overshoot


@dataclass(frozen=True, eq=False)
class GapReport:
    """
    Histogram of the normalized gaps N*g on [0, bin_max) with left-closed bins,
    plus a final overflow bin [bin_max, largest gap]. The overflow row carries
    mass rather than density in both columns.
    """
    N: int
    gaps: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    exp_density: np.ndarray
    summary: GapSummary

    def rows(self) -> list[dict]:
        return [
            {
                'bin_lo': float(self.edges[i]),
                'bin_hi': float(self.edges[i + 1]),
                'count': int(self.counts[i]),
                'density': float(self.density[i]),
                'exp_density': float(self.exp_density[i]),
            }
            for i in range(len(self.counts))
        ]

    def _window(self, lo: float, hi: float) -> np.ndarray:
        regular = len(self.counts) - 1
        return np.flatnonzero((self.edges[:regular] >= lo) & (self.edges[1:regular + 1] <= hi))

    def deviation(self, lo: float, hi: float) -> float:
        """sup |density - exp(-t)| over the bins inside [lo, hi]."""
        idx = self._window(lo, hi)
        return float(np.max(np.abs(self.density[idx] - self.exp_density[idx])))

    def flatness(self, lo: float, hi: float, width: float = FLATNESS_WIDTH) -> float:
        """
        max/min density over bins of about `width` tiling [lo, hi].

        These bins are laid out afresh and do not follow the histogram's.
        """
        count = max(1, round((hi - lo) / width))
        counts, _ = np.histogram(self.N * self.gaps, np.linspace(lo, hi, count + 1))
        return float(counts.max() / counts.min())


def gap_report(seq: FracSequence, bins: int = 200, bin_max: float = 4.0) -> GapReport:
    if bins < 10:
        raise ValueError(f'bins must be at least 10, got {bins}')
    if bin_max <= 0:
        raise ValueError(f'bin_max must be positive, got {bin_max}')

    N = seq.N
    scaled = N * seq.gaps
    width = bin_max / bins
    idx = np.minimum(np.floor(scaled / width).astype(np.int64), bins)
    counts = np.bincount(idx, minlength=bins + 1)

    top = max(bin_max, float(scaled.max()))
    edges = np.append(np.linspace(0.0, bin_max, bins + 1), top)
    mids = (edges[:bins] + edges[1:bins + 1]) / 2

    density = np.append(counts[:bins] / (N * width), counts[bins] / N)
    exp_density = np.append(np.exp(-mids), math.exp(-bin_max))

    summary = GapSummary(n=N,
                         mean=math.fsum(scaled) / N,
                         min=float(scaled.min()),
                         max=float(scaled.max()),
                         sup_deviation=float(np.max(np.abs(density[:bins] - exp_density[:bins]))))

    return GapReport(N=N,
                     gaps=seq.gaps,
                     edges=edges,
                     counts=counts,
                     density=density,
                     exp_density=exp_density,
                     summary=summary)


@lru_cache(maxsize=8)
def weighted_points(N: int, V: BumpFunction) -> tuple[np.ndarray, np.ndarray]:
    """
    frac(sqrt(n)) sorted ascending, with weights V(n/N), for every n where V(n/N) > 0.
    """
    n_lo = math.floor(V.lo * N) + 1
    n_hi = math.ceil(V.hi * N)
    n = np.arange(n_lo, n_hi, dtype=np.int64)
    weights = V(n / N)
    keep = weights > 0
    fracs = frac_values(n_lo, n_hi)[keep]
    weights = weights[keep]
    order = np.argsort(fracs, kind='stable')
    fracs, weights = fracs[order], weights[order]
    fracs.flags.writeable = False
    weights.flags.writeable = False
    return fracs, weights


def signed_offset(values, x: float) -> np.ndarray:
    """((values - x + 1/2) mod 1) - 1/2: the circular offset of each value from x."""
    return np.mod(np.asarray(values) - x + 0.5, 1.0) - 0.5


def window_indices(fracs: np.ndarray, start: float, width: float) -> np.ndarray:
    """Indices of the sorted `fracs` inside [start, start + width], wrapping mod 1."""
    start = start % 1.0
    stop = start + width
    left = np.searchsorted(fracs, start, side='left')
    if stop <= 1:
        right = np.searchsorted(fracs, stop, side='right')
        return np.arange(left, right)
    right = np.searchsorted(fracs, stop - 1, side='right')
    return np.concatenate([np.arange(left, len(fracs)), np.arange(0, right)])


def r_direct(N: int, tf: TestFunctionSet, x: float) -> float:
    """
    The smoothed count sum_n V(n/N) Phi(N delta_n),
    with delta_n the signed circular offset of sqrt(n) from x.
    Only points with N delta_n inside the support of Phi contribute.
    """
    Phi = tf.Phi
    fracs, weights = weighted_points(N, tf.V)
    idx = window_indices(fracs, x + Phi.lo / N, (Phi.hi - Phi.lo) / N)
    if not len(idx):
        return 0.0
    delta = signed_offset(fracs[idx], x)
    return math.fsum(weights[idx] * Phi(N * delta))
