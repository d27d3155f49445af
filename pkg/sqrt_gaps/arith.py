"""
Exact number-theoretic kernel.

Modular arithmetic runs on Python integers (gmpy2 for inverses and square roots),
rational identities on `fractions.Fraction`. Floating point only appears in the
Gauss sums, which are complex exponential sums by definition.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

import gmpy2
import numpy as np
from sympy import divisors, factorint, mobius, primerange

from sqrt_gaps import NumericsError, numerics_logger, strex
from sqrt_gaps.models import PhiStatsReport, QSetMode, QSetModel

LOGGER = numerics_logger(__name__)

GAUSS_BRUTE_LIMIT = 10**6


class NotInvertible(NumericsError):
    pass


class NotCoprime(NumericsError):
    pass


class BruteForceLimit(NumericsError):
    pass


class EmptyQSet(NumericsError):
    pass


class HypothesisFailed(NumericsError):
    """An input tuple violates the hypotheses of an identity at position `index`."""

    def __init__(self, msg: str, index: int):
        super().__init__(f'{msg} (index {index})')
        self.index = index


class FareyPoint(NamedTuple):
    a: int
    q: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.a, self.q)


class LatticePair(NamedTuple):
    u: int
    v: int


def mod_inverse(x: int, m: int) -> int:
    if m < 2:
        raise ValueError(f'modulus must be at least 2, got {m}')
    try:
        return int(gmpy2.invert(x, m))
    except ZeroDivisionError:
        raise NotInvertible(f'{x} has no inverse modulo {m}')


@lru_cache(maxsize=1 << 16)
def euler_phi(q: int) -> int:
    if q < 1:
        raise ValueError(f'totient of {q} is undefined')
    result = 1
    for p, e in factorint(q).items():
        result *= (p - 1) * p**(e - 1)
    return result


def ramanujan_sum(q: int, l: int) -> int:
    """c_q(l) by the divisor sum over d | q with d | l."""
    if q < 1:
        raise ValueError(f'modulus must be positive, got {q}')
    return sum(int(mobius(q // d)) * d for d in divisors(q) if l % d == 0)


def ramanujan_sums_squarefree(primes: Sequence[int], ells: np.ndarray) -> np.ndarray:
    """
    c_q(l) for squarefree q = prod(primes), vectorized over l.

    For squarefree q the divisor sum factors over the primes:
    c_p(l) is p - 1 when p | l, and -1 otherwise.
    """
    out = np.ones(np.shape(ells), dtype=np.int64)
    for p in primes:
        out *= np.where(ells % p == 0, p - 1, -1)
    return out


def gauss_sum_direct(a: int, b: int, c: int) -> complex:
    """
    G(a, b; c) = sum over x mod c of e((a x^2 + b x) / c).

    Exponents are reduced modulo c in exact integer arithmetic before
    the exponential is taken, and both parts are summed with `math.fsum`.
    """
    if c < 1:
        raise ValueError(f'modulus must be positive, got {c}')
    if c > GAUSS_BRUTE_LIMIT:
        raise BruteForceLimit(f'modulus {c} exceeds the direct summation limit {GAUSS_BRUTE_LIMIT}')
    x = np.arange(c, dtype=np.int64)
    sq = (x * x) % c
    num = ((a % c) * sq + (b % c) * x) % c
    terms = np.exp(2j * np.pi * num / c)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def gauss_sum_row(a: int, c: int) -> np.ndarray:
    """G(a, b; c) for all b mod c at once, as c times an inverse FFT over x."""
    if c > GAUSS_BRUTE_LIMIT:
        raise BruteForceLimit(f'modulus {c} exceeds the direct summation limit {GAUSS_BRUTE_LIMIT}')
    x = np.arange(c, dtype=np.int64)
    return c * np.fft.ifft(np.exp(2j * np.pi * (((a % c) * ((x * x) % c)) % c) / c))


def gauss_sum_closed(u: int, v: int) -> complex:
    """Closed form of G(1, u; 4v)."""
    if v < 1:
        raise ValueError(f'v must be positive, got {v}')
    if u % 2:
        return 0j
    m = 4 * v
    r = (u // 2)**2 % m
    return math.sqrt(2 * m) * complex(np.exp(2j * np.pi * (1 / 8 - r / m)))


def crt_phase_split(i: int, j: int, h: int) -> tuple[Fraction, Fraction, Fraction]:
    """
    Splits 1/(ijh) mod 1 into inv(jh)/i + inv(ih)/j + inv(ij)/h,
    each inverse taken modulo the absolute value of its denominator.
    """
    if 0 in (i, j, h):
        raise ValueError('moduli must be nonzero')
    for x, y in ((i, j), (i, h), (j, h)):
        if math.gcd(x, y) != 1:
            raise NotCoprime(f'{x} and {y} are not coprime')

    def part(mod: int, rest: int) -> Fraction:
        if abs(mod) == 1:
            return Fraction(0)
        return Fraction(mod_inverse(rest, abs(mod)), mod) % 1

    return part(i, j * h), part(j, i * h), part(h, i * j)


@dataclass(frozen=True)
class QSet:
    Delta: float
    N: int
    mode: QSetMode
    prime_floor: int
    a_band: Optional[tuple[int, int]]
    members: tuple[tuple[int, int, int], ...]

    @property
    def Q(self) -> float:
        return self.Delta * math.sqrt(self.N)

    @property
    def moduli(self) -> list[int]:
        return [q for q, _, _ in self.members]

    @property
    def L(self) -> int:
        return sum(euler_phi(q) for q in self.moduli)

    def arcs(self) -> Iterable[FareyPoint]:
        """All reduced fractions a/q, q ascending then a ascending."""
        for q in self.moduli:
            for a in range(1, q + 1):
                if math.gcd(a, q) == 1:
                    yield FareyPoint(a, q)

    def to_model(self) -> QSetModel:
        return QSetModel(delta=self.Delta,
                         n=self.N,
                         mode=self.mode,
                         prime_floor=self.prime_floor,
                         a_band=self.a_band,
                         members=list(self.members))

    @classmethod
    def from_model(cls, model: QSetModel) -> 'QSet':
        return cls(Delta=model.delta,
                   N=model.n,
                   mode=model.mode,
                   prime_floor=model.prime_floor,
                   a_band=model.a_band,
                   members=tuple(tuple(m) for m in model.members))


def default_prime_floor(Delta: float) -> int:
    return max(3, math.floor(Delta**4))


def default_a_band(Delta: float, N: int, prime_floor: int) -> tuple[int, int]:
    A = max(prime_floor + 1, math.ceil((Delta * math.sqrt(N))**0.25))
    return (A, 2 * A)


def _asymptotic_members(Q: float, Delta: float) -> list[tuple[int, int, int]]:
    # Only reachable when Delta^2001 is below 2Q, which forces Delta close to 1.
    floor = Delta**2001
    a_lo, a_hi = Q**(1 / 1000), 2 * Q**(1 / 1000)
    members = []
    for q in range(math.ceil(Q), math.floor(2 * Q) + 1):
        factors = factorint(q)
        if any(e > 1 or p <= floor for p, e in factors.items()):
            continue
        for a in divisors(q):
            if a_lo <= a <= a_hi:
                members.append((q, a, q // a))
                break
    return members


def _desk_members(Q: float, prime_floor: int, a_band: tuple[int, int]) -> list[tuple[int, int, int]]:
    found: dict[int, tuple[int, int, int]] = {}
    for a in primerange(max(a_band[0], prime_floor + 1), a_band[1] + 1):
        b_lo = max(prime_floor + 1, math.ceil(Q / a))
        b_hi = math.floor(2 * Q / a)
        for b in primerange(b_lo, b_hi + 1):
            q = a * b
            if b != a and Q <= q <= 2 * Q:
                found.setdefault(q, (q, a, b))
    return [found[q] for q in sorted(found)]


def build_qset(Delta: float,
               N: int,
               mode: QSetMode = 'desk',
               prime_floor: Optional[int] = None,
               a_band: Optional[tuple[int, int]] = None,
               ) -> QSet:
    """
    The modulus family in [Q, 2Q], Q = Delta sqrt(N).

    Asymptotic mode keeps only squarefree q whose prime factors all exceed Delta^2001,
    with a factor in [Q^(1/1000), 2Q^(1/1000)].
    Desk mode takes products q = ab of distinct primes above `prime_floor`,
    with a drawn from `a_band`.

    Raises:
        EmptyQSet: no modulus satisfies the constraints.
    """
    if N < 100:
        raise ValueError(f'N must be at least 100, got {N}')
    if Delta <= 0:
        raise ValueError(f'Delta must be positive, got {Delta}')
    Q = Delta * math.sqrt(N)

    if mode == 'asymptotic':
        if 2001 * math.log(Delta) >= math.log(2 * Q):
            raise EmptyQSet(f'no integer in [{Q:g}, {2 * Q:g}] has all prime factors above {Delta:g}^2001')
        floor = 1
        members = _asymptotic_members(Q, Delta)
    else:
        floor = default_prime_floor(Delta) if prime_floor is None else prime_floor
        if floor < 3:
            raise ValueError(f'prime floor must be at least 3, got {floor}')
        a_band = a_band or default_a_band(Delta, N, floor)
        members = _desk_members(Q, floor, a_band)

    if not members:
        raise EmptyQSet(f'{mode} mode yields no moduli for Delta={Delta:g}, N={N}')

    LOGGER.debug(f'Q-set {mode} Delta={Delta:g} N={N}: {len(members)} moduli')
    return QSet(Delta=Delta,
                N=N,
                mode=mode,
                prime_floor=floor,
                a_band=a_band if mode == 'desk' else None,
                members=tuple(members))


def qset_ladder(deltas: Iterable[float],
                N: int,
                prime_floor: Optional[int] = None,
                skip_empty: bool = False,
                ) -> list[QSet]:
    """
    Desk QSets for every Delta, in order.
    With `skip_empty`, a Delta without moduli is logged and left out instead of raising EmptyQSet.
    """
    ladder = []
    for d in deltas:
        try:
            ladder.append(build_qset(d, N, 'desk', prime_floor))
        except EmptyQSet as ex:
            if not skip_empty:
                raise
            LOGGER.warning(f'Skipping Delta={d:g}: {strex(ex)}')
    return ladder


def default_u_cap(Delta: float) -> int:
    return math.floor(Delta**4)


def default_v_cap(Delta: float, N: int) -> int:
    return math.ceil(Delta * math.sqrt(N))


def enumerate_bset(fp: FareyPoint,
                   Delta: float,
                   v_cap: int,
                   u_cap: Optional[int] = None,
                   ) -> list[LatticePair]:
    """
    Pairs (u, v) with 1 <= |u| <= u_cap, 1 <= |v| <= v_cap and u = 2va (mod q),
    sorted by (v, u).
    """
    a, q = fp
    if q % 2 == 0:
        raise ValueError(f'modulus must be odd, got {q}')
    if math.gcd(a, q) != 1:
        raise ValueError(f'{a}/{q} is not reduced')
    if v_cap < 1:
        raise ValueError(f'v_cap must be positive, got {v_cap}')
    u_cap = default_u_cap(Delta) if u_cap is None else u_cap
    inv_2a = mod_inverse(2 * a, q) if q > 1 else 0

    pairs = []
    for mag in range(1, u_cap + 1):
        if math.gcd(mag, q) != 1:
            continue
        for u in (-mag, mag):
            v0 = (u * inv_2a) % q if q > 1 else 0
            k_lo = -((v_cap + v0) // q)
            k_hi = (v_cap - v0) // q
            for k in range(k_lo, k_hi + 1):
                v = v0 + k * q
                if v:
                    pairs.append(LatticePair(u, v))
    pairs.sort(key=lambda p: (p.v, p.u))
    return pairs


def bset_arrays(pairs: Sequence[LatticePair]) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def phase_reduction_check(q: int, u: Sequence[int], v: Sequence[int]) -> Fraction:
    """
    Difference, mod 1, between the two sides of

        sum_i qbar_i^2 u_i^2 / (4 v_i)
            = -u_1 inv(4 v_1 mod q^2) sum_i u_i / q^2
              + u_1 inv(4 v_1^2 mod q) sum_i l_i / q
              + sum_i u_i^2 / (4 v_i q^2)     (mod 1)

    where qbar_i inverts q modulo 4|v_i| and u_1 v_i = u_i v_1 + q l_i.
    Admissible input always gives exactly 0.

    Raises:
        HypothesisFailed: l_i is not an integer, or 4 u_i v_i is not coprime to q.
    """
    if q < 3 or q % 2 == 0:
        raise ValueError(f'q must be an odd integer above 1, got {q}')
    if not u or len(u) != len(v):
        raise ValueError('u and v must be non-empty and of equal length')

    u1, v1 = u[0], v[0]
    ells = []
    for idx, (ui, vi) in enumerate(zip(u, v)):
        if vi == 0 or math.gcd(4 * ui * vi, q) != 1:
            raise HypothesisFailed(f'4*{ui}*{vi} is not coprime to {q}', idx)
        diff = u1 * vi - ui * v1
        if diff % q:
            raise HypothesisFailed(f'{u1}*{vi} - {ui}*{v1} is not divisible by {q}', idx)
        ells.append(diff // q)

    lhs = Fraction(0)
    for ui, vi in zip(u, v):
        qbar = mod_inverse(q, 4 * abs(vi))
        lhs += Fraction(qbar * qbar * ui * ui, 4 * vi)

    rhs = (-Fraction(u1 * mod_inverse(4 * v1, q * q) * sum(u), q * q)
           + Fraction(u1 * mod_inverse(4 * v1 * v1, q) * sum(ells), q)
           + sum((Fraction(ui * ui, 4 * vi * q * q) for ui, vi in zip(u, v)), Fraction(0)))

    return (lhs - rhs) % 1


def qset_phi_stats(qs: QSet, epsilon: float) -> PhiStatsReport:
    """Totient averages over the Q-set against their predicted sizes."""
    if not qs.members:
        raise EmptyQSet('empty Q-set')
    if not 0 < epsilon <= 1:
        raise ValueError(f'epsilon must be in (0, 1], got {epsilon}')

    Q = qs.Q
    ratios = [euler_phi(q) / q for q in qs.moduli]
    full = math.fsum(ratios)
    window = math.fsum(r for q, r in zip(qs.moduli, ratios) if q <= (1 + epsilon) * Q)
    total = sum(euler_phi(q) for q in qs.moduli)
    predicted = 1.5 * Q * full

    return PhiStatsReport(epsilon=epsilon,
                          window_sum=window,
                          scaled_sum=epsilon * full,
                          window_deviation=abs(window - epsilon * full) / (epsilon * full),
                          phi_total=total,
                          phi_predicted=predicted,
                          total_deviation=abs(total - predicted) / predicted,
                          members=len(qs.members))
