"""
The minor-arc side: the closed formula for the smoothed count near a/q,
the measure concentrated on the arcs, void statistics restricted to it,
and the L2 discrepancy of the arc approximant.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional

import numpy as np
from sympy import divisors, mobius

from sqrt_gaps import NumericsError, numerics_logger, parallel, quadrature
from sqrt_gaps.arith import (EmptyQSet, FareyPoint, QSet, default_v_cap,
                             enumerate_bset, euler_phi, mod_inverse)
from sqrt_gaps.models import JutilaReport, SmoothingReport
from sqrt_gaps.osc import FKernel, f_batch
from sqrt_gaps.seq import FracSequence, count_in_windows, r_direct, weighted_points
from sqrt_gaps.testfn import BumpFunction, TestFunctionSet, plateau_bump, sampled_transform

LOGGER = numerics_logger(__name__)

THETA_NODES = 64
THETA_PANELS = 4
ZERO_THRESHOLD = 1e-9
SYMMETRY_LIMIT = 1e-6
ARC_BLOCK = 4096
JUTILA_CHUNK = 1 << 20
JUTILA_TAIL_LIMIT = 0.1
JUTILA_EPSILON = 0.1
JUTILA_REACH = 200

Method = Literal['exact', 'quadrature']


class SymmetryViolation(NumericsError):

    def __init__(self, msg: str, residue: float):
        super().__init__(f'{msg} (residue {residue:.3g})')
        self.residue = residue


class TruncationTooCoarse(NumericsError):

    def __init__(self, msg: str, tail: float, head: float):
        super().__init__(f'{msg} (tail {tail:.3g}, head {head:.3g})')
        self.tail = tail
        self.head = head


def theta_rule(phi: BumpFunction, nodes: int = THETA_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on the support of phi, weighted by phi and normalized to total 1."""
    if nodes % THETA_PANELS:
        raise ValueError(f'node count must be a multiple of {THETA_PANELS}, got {nodes}')
    t, w = quadrature.composite_rule(np.linspace(phi.lo, phi.hi, THETA_PANELS + 1), nodes // THETA_PANELS)
    weights = w * phi(t)
    return t, weights / math.fsum(weights)


def select_arcs(qset: QSet, max_arcs: Optional[int] = None) -> tuple[list[FareyPoint], np.ndarray]:
    """
    Arcs in (q, a) order with their weights.

    Without `max_arcs` every reduced a/q is kept with weight 1/L. Otherwise each q keeps
    an evenly strided share of its residues, and the kept arcs split the mass phi(q)/L.
    """
    L = qset.L
    arcs: list[FareyPoint] = []
    weights: list[float] = []
    for q in qset.moduli:
        a = np.arange(1, q + 1)
        residues = a[np.gcd(a, q) == 1]
        count = len(residues)
        kept = count if max_arcs is None else min(count, max(1, round(max_arcs * count / L)))
        for r in residues[(np.arange(kept) * count) // kept]:
            arcs.append(FareyPoint(int(r), q))
        weights.extend([count / (kept * L)] * kept)
    return arcs, np.array(weights)


@dataclass(frozen=True, eq=False)
class MinorArcMeasure:
    """
    The probability measure (N/L) sum over a/q of phi(N(x - a/q)) dx,
    discretized by a fixed Gauss rule in t = N(a/q - x) on every arc.
    """
    qset: QSet
    tf: TestFunctionSet
    nodes: int = THETA_NODES
    max_arcs: Optional[int] = None
    L: int = field(init=False)
    thetas: np.ndarray = field(init=False)
    theta_weights: np.ndarray = field(init=False)
    arcs: list[FareyPoint] = field(init=False)
    arc_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        L = self.qset.L
        if L <= 0:
            raise EmptyQSet('measure needs at least one arc')
        thetas, theta_weights = theta_rule(self.tf.phi, self.nodes)
        arcs, arc_weights = select_arcs(self.qset, self.max_arcs)
        object.__setattr__(self, 'L', L)
        object.__setattr__(self, 'thetas', thetas)
        object.__setattr__(self, 'theta_weights', theta_weights)
        object.__setattr__(self, 'arcs', arcs)
        object.__setattr__(self, 'arc_weights', arc_weights)

    @property
    def N(self) -> int:
        return self.qset.N

    @property
    def centers(self) -> np.ndarray:
        return np.array([fp.a / fp.q for fp in self.arcs])

    def refined(self, nodes: int) -> 'MinorArcMeasure':
        return replace(self, nodes=nodes)


def measure_integrate(mu: MinorArcMeasure,
                      integrand: Callable[[np.ndarray], np.ndarray],
                      N: Optional[int] = None,
                      threads: Optional[int] = None,
                      ) -> float:
    """
    (N/L) sum over arcs of int integrand(a/q - t/N) phi(t) dt / N.

    `integrand` is called once per arc with the array of that arc's nodes in [0, 1).
    """
    N = N or mu.N

    def arc_value(i: int) -> float:
        fp = mu.arcs[i]
        x = np.mod(fp.a / fp.q - mu.thetas / N, 1.0)
        return mu.arc_weights[i] * math.fsum(mu.theta_weights * np.asarray(integrand(x), dtype=float))

    return math.fsum(parallel.chunked_map(arc_value, range(len(mu.arcs)), threads, chunk_size=ARC_BLOCK))


def _circular_max_gap(points: np.ndarray) -> float:
    return float(max(np.diff(points).max(initial=0.0), 1 - points[-1] + points[0]))


def _unwrapped(points: np.ndarray, j: np.ndarray) -> np.ndarray:
    n = len(points)
    return points[np.mod(j, n)] + np.floor_divide(j, n)


def _last_below(points: np.ndarray, y: np.ndarray) -> np.ndarray:
    base = np.floor(y)
    return np.searchsorted(points, y - base, side='left') - 1 + len(points) * base.astype(np.int64)


def _first_above(points: np.ndarray, y: np.ndarray) -> np.ndarray:
    base = np.floor(y)
    return np.searchsorted(points, y - base, side='right') + len(points) * base.astype(np.int64)


def _arc_zero_mass(phi: BumpFunction,
                   N: int,
                   points: np.ndarray,
                   centers: np.ndarray,
                   lo_off: float,
                   hi_off: float,
                   ) -> np.ndarray:
    """
    Per-arc mass of {x : no point p with x + lo_off < p < x + hi_off}.

    Between consecutive points p < p' that set is [p - lo_off, p' - hi_off].
    Its mass under phi(N(c - x)) N dx is a difference of the phi CDF.
    """
    lo = centers - phi.hi / N + lo_off
    hi = centers - phi.lo / N + hi_off
    j_lo = _last_below(points, lo)
    j_hi = _first_above(points, hi)
    width = int((j_hi - j_lo).max()) + 1
    J = j_lo[:, None] + np.arange(width)[None, :]
    valid = J[:, 1:] <= j_hi[:, None]
    P = _unwrapped(points, np.minimum(J, j_hi[:, None]))

    alpha = P[:, :-1] - lo_off
    beta = np.maximum(alpha, P[:, 1:] - hi_off)
    c = centers[:, None]
    mass = phi.cumulative(N * (c - alpha)) - phi.cumulative(N * (c - beta))
    return np.where(valid, mass, 0.0).sum(axis=1) / float(phi.cumulative(phi.hi))


def _zero_set_measure(mu: MinorArcMeasure,
                      points: np.ndarray,
                      lo_off: float,
                      hi_off: float,
                      threads: Optional[int] = None,
                      ) -> float:
    if _circular_max_gap(points) <= hi_off - lo_off:
        return 0.0
    centers = mu.centers
    blocks = [slice(i, i + ARC_BLOCK) for i in range(0, len(centers), ARC_BLOCK)]

    def block_mass(sl: slice) -> float:
        mass = _arc_zero_mass(mu.tf.phi, mu.N, points, centers[sl], lo_off, hi_off)
        return math.fsum(mu.arc_weights[sl] * mass)

    return math.fsum(parallel.chunked_map(block_mass, blocks, threads, chunk_size=1))


def restricted_void(mu: MinorArcMeasure,
                    seq: FracSequence,
                    s: float,
                    method: Method = 'exact',
                    threads: Optional[int] = None,
                    ) -> float:
    """
    The measure of the x with an empty window [x, x + s/N).

    'exact' integrates the phi profile over the empty-window intervals between
    consecutive points. 'quadrature' applies the measure's Gauss rule to the indicator.
    """
    if s <= 0:
        raise ValueError(f's must be positive, got {s}')
    if method == 'exact':
        return _zero_set_measure(mu, seq.values, 0.0, s / seq.N, threads)

    def empty(x):
        return count_in_windows(seq, x, s) == 0

    return measure_integrate(mu, empty, seq.N, threads)


def smoothed_void(mu: MinorArcMeasure,
                  tf: TestFunctionSet,
                  N: int,
                  method: Method = 'exact',
                  threads: Optional[int] = None,
                  ) -> float:
    """
    The measure of the x where the smoothed count vanishes.

    R(x) is positive exactly when some sqrt(n) with V(n/N) > 0 sits at a signed
    offset inside the open support of Phi, so 'exact' reuses the empty-window
    integration with the window (Phi.lo, Phi.hi) / N.
    """
    if method == 'exact':
        fracs, _ = weighted_points(N, tf.V)
        return _zero_set_measure(mu, fracs, tf.Phi.lo / N, tf.Phi.hi / N, threads)

    def vanishing(x):
        return np.array([r_direct(N, tf, xi) for xi in x]) < ZERO_THRESHOLD

    return measure_integrate(mu, vanishing, N, threads)


def bracket_test_functions(tf: TestFunctionSet) -> tuple[TestFunctionSet, TestFunctionSet]:
    """
    Inner and outer bump pairs around the indicators of [0, s) and [1, 2),
    so that R_inner <= count <= R_outer pointwise.
    """
    eta, s = tf.eta, tf.s
    if s <= 2 * eta:
        raise ValueError(f's={s} leaves no plateau for the inner bump at eta={eta}')
    inner = replace(tf,
                    Phi=plateau_bump(0.0, s, eta, s - eta),
                    V=plateau_bump(1.0, 2.0, 1 + eta, 2 - eta))
    outer = replace(tf,
                    Phi=plateau_bump(-eta, s + eta, 0.0, s),
                    V=plateau_bump(1 - eta, 2 + eta, 1.0, 2.0))
    return inner, outer


def smoothing_report(mu: MinorArcMeasure,
                     seq: FracSequence,
                     tf: TestFunctionSet,
                     threads: Optional[int] = None,
                     ) -> SmoothingReport:
    N = seq.N
    inner, outer = bracket_test_functions(tf)
    restricted = restricted_void(mu, seq, tf.s, threads=threads)
    smoothed = smoothed_void(mu, tf, N, threads=threads)
    report = SmoothingReport(n=N,
                             s=tf.s,
                             eta=tf.eta,
                             restricted=restricted,
                             smoothed=smoothed,
                             inner=smoothed_void(mu, inner, N, threads=threads),
                             outer=smoothed_void(mu, outer, N, threads=threads),
                             difference=abs(restricted - smoothed),
                             bound=8 * (1 + tf.s) * tf.eta)
    LOGGER.info(f'Smoothing N={N} s={tf.s:g}: difference {report.difference:.3g}, bound {report.bound:.3g}')
    return report


def bset_terms(fp: FareyPoint,
               N: int,
               Delta: float,
               v_cap: Optional[int] = None,
               u_cap: Optional[int] = None,
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Phase factors and kernel arguments (xi, eta) for every pair of the B-set.

    The phase -qbar^2 u^2 / 4v + u^2 / (4 v q^2) is reduced in exact integer
    arithmetic, one residue per denominator, before it is turned into a float.
    """
    q = fp.q
    pairs = enumerate_bset(fp, Delta, v_cap or default_v_cap(Delta, N), u_cap)
    phase = np.empty(len(pairs))
    xi = np.empty(len(pairs))
    eta = np.empty(len(pairs))
    root = math.sqrt(N)
    for i, (u, v) in enumerate(pairs):
        m = 4 * abs(v)
        qbar = mod_inverse(q, m)
        sign = 1 if v > 0 else -1
        first = (qbar * qbar * u * u) % m
        second = (u * u) % (m * q * q)
        phase[i] = sign * (second / (m * q * q) - first / m)
        xi[i] = v / root
        eta[i] = 2 * u * root / q
    return np.exp(2j * np.pi * phase), xi, eta


def r_tilde_nodes(fp: FareyPoint,
                  k: FKernel,
                  N: int,
                  Delta: float,
                  thetas,
                  v_cap: Optional[int] = None,
                  u_cap: Optional[int] = None,
                  ) -> np.ndarray:
    """
    The oscillating part of the smoothed count at a/q - theta_j/N for every rescaled theta_j.

    `k` is used at theta 0; each node enters through the shift eta -> eta - 4 xi theta.

    Raises:
        SymmetryViolation: the formula sum has an imaginary part above 1e-6.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phase, xi, eta = bset_terms(fp, N, Delta, v_cap, u_cap)
    if not len(phase):
        return np.zeros(len(thetas))

    xi_all = np.repeat(xi, len(thetas))
    eta_all = (eta[:, None] - 4 * xi[:, None] * thetas[None, :]).ravel()
    weights = f_batch(k.with_theta(0.0), xi_all, eta_all).reshape(len(xi), len(thetas))
    totals = phase @ weights

    residue = float(np.abs(totals.imag).max())
    if residue > SYMMETRY_LIMIT:
        raise SymmetryViolation(f'imaginary part in the formula at {fp.a}/{fp.q}', residue)
    return totals.real


def r_tilde(fp: FareyPoint,
            k: FKernel,
            N: int,
            Delta: float,
            v_cap: Optional[int] = None,
            u_cap: Optional[int] = None,
            ) -> float:
    """Formula sum at a/q - theta/N, theta = k.theta."""
    return float(r_tilde_nodes(fp, k, N, Delta, [k.theta], v_cap, u_cap)[0])


def prop3_terms(fp: FareyPoint,
                tf: TestFunctionSet,
                N: int,
                theta: float,
                Delta: float,
                v_cap: Optional[int] = None,
                u_cap: Optional[int] = None,
                kernel: Optional[FKernel] = None,
                ) -> tuple[float, float]:
    """The direct smoothed count at a/q - theta and its closed-formula value."""
    if abs(N * theta) > 1 / 100:
        raise ValueError(f'|N theta| must be at most 1/100, got {abs(N * theta):g}')
    k = (kernel or FKernel(tf)).with_theta(N * theta)
    direct = r_direct(N, tf, (fp.a / fp.q - theta) % 1.0)
    formula = tf.mass + 2 * r_tilde(fp, k, N, Delta, v_cap, u_cap)
    return direct, formula


def prop3_residual(fp: FareyPoint,
                   tf: TestFunctionSet,
                   N: int,
                   theta: float,
                   Delta: float,
                   v_cap: Optional[int] = None,
                   u_cap: Optional[int] = None,
                   kernel: Optional[FKernel] = None,
                   ) -> float:
    direct, formula = prop3_terms(fp, tf, N, theta, Delta, v_cap, u_cap, kernel)
    return abs(direct - formula)


def residual_table(qset: QSet,
                   tf: TestFunctionSet,
                   thetas=(0.0,),
                   v_cap: Optional[int] = None,
                   u_cap: Optional[int] = None,
                   max_arcs: Optional[int] = 64,
                   threads: Optional[int] = None,
                   kernel: Optional[FKernel] = None,
                   ) -> list[dict]:
    """Rows q, a, theta, r_direct, r_formula, residual over a strided arc sample."""
    N, Delta = qset.N, qset.Delta
    kernel = kernel or FKernel(tf)
    arcs, _ = select_arcs(qset, max_arcs)
    jobs = [(fp, theta) for fp in arcs for theta in thetas]

    def row(job) -> dict:
        fp, theta = job
        direct, formula = prop3_terms(fp, tf, N, theta, Delta, v_cap, u_cap, kernel)
        return {
            'q': fp.q,
            'a': fp.a,
            'theta': theta,
            'r_direct': direct,
            'r_formula': formula,
            'residual': abs(direct - formula),
        }

    rows = parallel.chunked_map(row, jobs, threads, chunk_size=8)
    LOGGER.info(f'Residuals: {len(rows)} rows, v_cap={v_cap or default_v_cap(Delta, N)}')
    return rows


def _divisor_coefficients(qset: QSet) -> dict[int, int]:
    """
    Coefficients c_d with sum over q of c_q(l) = sum over d of c_d 1(d | l),
    from c_q(l) = sum over d | q, d | l of mobius(q/d) d.
    """
    coef: dict[int, int] = {}
    for q in qset.moduli:
        for d in divisors(q):
            coef[d] = coef.get(d, 0) + int(mobius(q // d)) * d
    return {d: c for d, c in coef.items() if c}


def _jutila_chunk(phi: BumpFunction, N: int, coef: dict[int, int], bounds: tuple[int, int]):
    start, stop = bounds
    C = np.zeros(stop - start, dtype=np.float64)
    for d, c in coef.items():
        C[(-start) % d::d] += c
    _, hat = sampled_transform(phi, (stop - 1) / N, 1 / N, y_min=start / N)
    power = np.abs(hat)**2
    return math.fsum(power * C * C), math.fsum(C * C), math.fsum(power)


def jutila_l2(mu: MinorArcMeasure,
              N: Optional[int] = None,
              max_ell: Optional[int] = None,
              threads: Optional[int] = None,
              ) -> JutilaReport:
    """
    L2 distance between 1 and the arc approximant, by Plancherel over 1 <= |l| <= max_ell.

    The Fourier coefficients are phi^(l/N) C(l) / L with C(l) the sum of Ramanujan sums.
    The remainder beyond max_ell is estimated from the exact total
    sum over all l of |phi^(l/N)|^2 = N int phi^2, weighted by the mean of C^2.

    Raises:
        TruncationTooCoarse: the remainder estimate exceeds 10% of the head.
    """
    qs = mu.qset
    N = N or qs.N
    phi = mu.tf.phi
    max_ell = max_ell or JUTILA_REACH * N
    if max_ell < N:
        raise ValueError(f'max_ell must be at least N={N}, got {max_ell}')

    L = qs.L
    coef = _divisor_coefficients(qs)
    bounds = [(b, min(b + JUTILA_CHUNK, max_ell + 1)) for b in range(1, max_ell + 1, JUTILA_CHUNK)]
    parts = parallel.chunked_map(lambda b: _jutila_chunk(phi, N, coef, b), bounds, threads, chunk_size=1)

    head = 2 * math.fsum(p[0] for p in parts) / L**2
    mean_c2 = math.fsum(p[1] for p in parts) / max_ell
    captured = 1 + 2 * math.fsum(p[2] for p in parts)
    energy, _ = quadrature.integrate(lambda x: phi(x)**2, phi.breakpoints, abs_tol=1e-12)
    tail = mean_c2 * max(N * float(energy) - captured, 0.0) / L**2

    if tail > JUTILA_TAIL_LIMIT * head:
        raise TruncationTooCoarse(f'max_ell={max_ell} is too small', tail, head)

    Q, Delta = qs.Q, qs.Delta
    bound = Q**4 / (Delta**2 * L**2) + Q**(2 + JUTILA_EPSILON) / L**2
    LOGGER.info(f'Jutila Delta={Delta:g}: lhs {head + tail:.4g}, bound {bound:.4g}')
    return JutilaReport(delta=Delta,
                        n=N,
                        members=len(qs.members),
                        L=L,
                        lhs=head + tail,
                        head=head,
                        tail=tail,
                        bound=bound)


def phi_count(qset: QSet) -> int:
    return sum(euler_phi(q) for q in qset.moduli)
