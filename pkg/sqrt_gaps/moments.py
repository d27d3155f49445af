"""
Moments of the oscillating part of the smoothed count against the minor-arc measure,
and the main term they converge to.

The main term is computed on the frequency side. With

    g(tau; eta, theta) = int F_theta(xi, eta) e(-tau xi) dxi
                       = 1/2 int V(x^2) e(-eta x / 2) Phi(theta - tau / (2x)) dx

every factor is compactly supported in tau, and the coupling w(Delta^3 sum xi)
becomes a one-dimensional convolution:

    H(t, u) = int w^(rho) prod g(t_i - rho Delta^3; 2 u_i, theta) d rho
"""

import itertools
import math
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from sqrt_gaps import NumericsError, numerics_logger, parallel, quadrature
from sqrt_gaps.arith import QSet, build_qset, default_u_cap
from sqrt_gaps.minorarc import (MinorArcMeasure, SymmetryViolation,
                                TruncationTooCoarse, r_tilde_nodes, theta_rule)
from sqrt_gaps.models import K_MAX, MomentReport
from sqrt_gaps.osc import FKernel
from sqrt_gaps.testfn import TestFunctionSet, TransformTable, fourier_transform

LOGGER = numerics_logger(__name__)

T_CAP = 64
V_NODES = 32
RHS_THETA_NODES = 16
X_ORDER = 16
TAU_SAMPLES_PER_RAMP = 64
RHO_ORDER = 16
IMAG_LIMIT = 1e-8
T_TAIL_LIMIT = 0.01
REL_FLOOR = 1e-12
TABLE_LIMIT = 4 * 10**7

Method = Literal['poisson', 'truncated']


def _check_k(k: int):
    if not 1 <= k <= K_MAX:
        raise ValueError(f'k must be in [1, {K_MAX}], got {k}')


class CouplingTooLarge(NumericsError):
    """
    The tau grid times the x rule of a coupling table exceeds TABLE_LIMIT entries.
    Narrow ramps make the table quadratically larger.
    """

    def __init__(self, msg: str, entries: int):
        super().__init__(msg)
        self.entries = entries


class CouplingKernel:
    """
    g(tau; eta, theta) for one test function set and one theta,
    on a fixed Gauss rule in x fine enough for every |eta| <= eta_max.

    The Phi profile on the uniform tau grid does not depend on eta,
    and is computed once on first use by `table()`.
    """

    def __init__(self, tf: TestFunctionSet, theta: float, eta_max: float):
        self.tf = tf
        self.theta = theta
        Phi, V = tf.Phi, tf.V
        self.x_lo = math.sqrt(V.lo)
        self.x_hi = math.sqrt(V.hi)

        ends = [2 * x * (theta - p) for x in (self.x_lo, self.x_hi) for p in (Phi.lo, Phi.hi)]
        self.support = (min(ends), max(ends))
        reach = max(abs(e) for e in ends)

        panel = min(Phi.ramp * 2 * self.x_lo**2 / reach,
                    V.ramp / (2 * self.x_hi),
                    1 / max(eta_max, 1e-9)) / 4
        breaks = np.linspace(self.x_lo, self.x_hi, math.ceil((self.x_hi - self.x_lo) / panel) + 1)
        self.x, w = quadrature.composite_rule(breaks, order=X_ORDER)
        self._xw = 0.5 * w * V(self.x**2)

        lo, hi = self.support
        self.grid = np.linspace(lo, hi, math.ceil((hi - lo) * TAU_SAMPLES_PER_RAMP / self.tau_ramp) + 1)
        self._profile: Optional[np.ndarray] = None

    @property
    def tau_ramp(self) -> float:
        """Narrowest ramp of g in tau."""
        return 2 * self.x_lo * self.tf.Phi.ramp

    @property
    def entries(self) -> int:
        return len(self.grid) * len(self.x)

    def _weights(self, eta: np.ndarray) -> np.ndarray:
        return self._xw[:, None] * np.exp(-1j * np.pi * self.x[:, None] * eta[None, :])

    def _profile_at(self, tau: np.ndarray) -> np.ndarray:
        return self.tf.Phi(self.theta - tau[:, None] / (2 * self.x[None, :]))

    def __call__(self, tau, eta) -> np.ndarray:
        """g on a (tau, eta) grid."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        return self._profile_at(tau) @ self._weights(eta)

    def table(self, eta) -> 'CouplingTable':
        """
        Raises:
            CouplingTooLarge: the cached profile would exceed TABLE_LIMIT entries.
        """
        if self._profile is None:
            if self.entries > TABLE_LIMIT:
                raise CouplingTooLarge(f'coupling table needs {self.entries} entries, '
                                       f'ramps are too narrow (Phi ramp {self.tf.Phi.ramp:g})', self.entries)
            self._profile = self._profile_at(self.grid)
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        return CouplingTable(self.grid, self.support, self._profile @ self._weights(eta))


class CouplingTable:
    """g on a uniform tau grid over its support, one column per eta."""

    def __init__(self, grid: np.ndarray, support: tuple[float, float], values: np.ndarray):
        self.grid = grid
        self.step = grid[1] - grid[0]
        self.support = support
        self.values = values
        self._spline = CubicSpline(grid, values, axis=0)

    def shifted(self, column: int, shift: float) -> np.ndarray:
        """g(grid + shift) for one column, zero outside the support."""
        if shift == 0:
            return self.values[:, column]
        points = self.grid + shift
        lo, hi = self.support
        inside = (points > lo) & (points < hi)
        out = np.zeros(len(points), dtype=complex)
        out[inside] = self._spline(points[inside])[:, column]
        return out


def coupling_budget(tf: TestFunctionSet) -> int:
    """Number of tau samples per g table at theta = 0."""
    return len(CouplingKernel(tf, 0.0, 1.0).grid)


def constraint_vectors(k: int, u_cap: int) -> list[tuple[int, ...]]:
    """All u with 1 <= |u_i| <= u_cap and sum(u) = 0, in lexicographic order."""
    _check_k(k)
    if k == 1:
        return []
    values = [u for u in range(-u_cap, u_cap + 1) if u]
    vectors = []
    for head in itertools.product(values, repeat=k - 1):
        last = -sum(head)
        if 1 <= abs(last) <= u_cap:
            vectors.append((*head, last))
    return vectors


def t_representatives(u: Sequence[int], reach: float) -> list[tuple[int, ...]]:
    """
    Representatives t' of {t : <u, t> = 0} modulo the diagonal, normalized to t'_1 = 0,
    with every |t'_i| <= reach.
    """
    k = len(u)
    if k == 1:
        return [(0,)]
    if k == 2:
        return [(0, 0)]
    if k != 3:
        raise ValueError(f'k must be at most 3, got {k}')
    _, u2, u3 = u
    g = math.gcd(u2, u3)
    step2, step3 = u3 // g, -u2 // g
    n_max = math.floor(reach / max(abs(step2), abs(step3)))
    return [(0, n * step2, n * step3) for n in range(-n_max, n_max + 1)]


def lattice_points(u: Sequence[int], t_cap: int) -> list[tuple[int, ...]]:
    """Every t with |t_i| <= t_cap and <u, t> = 0."""
    points = []
    for rep in t_representatives(u, 2 * t_cap):
        lo = -t_cap - min(rep)
        hi = t_cap - max(rep)
        points.extend(tuple(t1 + r for r in rep) for t1 in range(lo, hi + 1))
    return sorted(points)


def _eta_columns(u_cap: int) -> tuple[np.ndarray, dict[int, int]]:
    values = [u for u in range(-u_cap, u_cap + 1) if u]
    return np.array(values, dtype=float), {u: i for i, u in enumerate(values)}


def _lattice_sum(table: CouplingTable,
                 columns: dict[int, int],
                 vectors: list[tuple[int, ...]],
                 v: float,
                 Delta: float,
                 method: Method,
                 t_cap: int,
                 w_hat: Optional[TransformTable],
                 ) -> tuple[complex, complex]:
    """
    Sum over u and t of H(t/v, u/v) at one v, by t'-representatives.

    Returns the sum and, for 'truncated', the same sum with the cap halved.
    """
    lo, hi = table.support
    width = hi - lo
    z = table.grid
    D3 = Delta**3
    full = []
    half = []

    for u in vectors:
        for rep in t_representatives(u, width * v):
            product = table.values[:, columns[u[0]]].copy()
            for ui, ti in zip(u[1:], rep[1:]):
                product *= table.shifted(columns[ui], ti / v)
            if method == 'poisson':
                base = v * table.step * product
                full.append(complex(math.fsum(base.real), math.fsum(base.imag)))
                continue
            for cap, out in ((t_cap, full), (t_cap // 2, half)):
                t1 = np.arange(-cap - min(rep), cap - max(rep) + 1)
                if not len(t1):
                    continue
                kernel = w_hat((t1[:, None] / v - z[None, :]) / D3).sum(axis=0) / D3
                terms = table.step * kernel * product
                out.append(complex(math.fsum(terms.real), math.fsum(terms.imag)))

    total = parallel.ordered_complex_sum(full)
    return total, (parallel.ordered_complex_sum(half) if method == 'truncated' else total)


def moment_rhs(tf: TestFunctionSet,
               Delta: float,
               k: int,
               u_cap: Optional[int] = None,
               t_cap: int = T_CAP,
               method: Method = 'poisson',
               v_nodes: int = V_NODES,
               theta_nodes: int = RHS_THETA_NODES,
               threads: Optional[int] = None,
               ) -> float:
    """
    The main term

        2 / (3 Delta^2) int phi(theta) int_Delta^2Delta sum_{u, t} H(t/v, u/v) v^(1-k) dv dtheta

    over u with 1 <= |u_i| <= u_cap, sum u = 0 and <u, t> = 0.

    'poisson' sums each diagonal t-direction exactly: for v >= 1 only the zero
    frequency survives, leaving v int prod g_i(z + t'_i / v) dz per representative.
    'truncated' sums |t_i| <= t_cap literally.

    Raises:
        TruncationTooCoarse: the truncated sum moved by more than 1% between t_cap/2 and t_cap.
        SymmetryViolation: the result has an imaginary part above 1e-8.
    """
    _check_k(k)
    if Delta < 1:
        raise ValueError(f'Delta must be at least 1, got {Delta}')
    if k == 1:
        return 0.0

    u_cap = default_u_cap(Delta) if u_cap is None else u_cap
    vectors = constraint_vectors(k, u_cap)
    if not vectors:
        return 0.0
    etas, columns = _eta_columns(u_cap)
    thetas, theta_weights = theta_rule(tf.phi, theta_nodes)
    v, v_weights = quadrature.composite_rule([Delta, 2 * Delta], order=v_nodes)

    w_hat = None
    if method == 'truncated':
        reach = max(abs(e) for e in CouplingKernel(tf, 0.0, 1.0).support) + 1
        w_hat = TransformTable(tf.w, (t_cap / Delta + 3 * reach) / Delta**3 + 1)

    def theta_term(j: int) -> tuple[complex, complex]:
        kernel = CouplingKernel(tf, float(thetas[j]), 2 * u_cap / Delta)
        full, half = [], []
        for vi, wi in zip(v, v_weights):
            table = kernel.table(2 * etas / vi)
            a, b = _lattice_sum(table, columns, vectors, vi, Delta, method, t_cap, w_hat)
            scale = wi * vi**(1 - k)
            full.append(scale * a)
            half.append(scale * b)
        return parallel.ordered_complex_sum(full), parallel.ordered_complex_sum(half)

    parts = parallel.chunked_map(theta_term, range(len(thetas)), threads, chunk_size=1)
    prefactor = 2 / (3 * Delta**2)
    total = prefactor * parallel.ordered_complex_sum(w * p[0] for w, p in zip(theta_weights, parts))
    halved = prefactor * parallel.ordered_complex_sum(w * p[1] for w, p in zip(theta_weights, parts))

    if abs(total.imag) > IMAG_LIMIT * max(1.0, abs(total.real)):
        raise SymmetryViolation(f'imaginary part in the k={k} main term', abs(total.imag))
    if method == 'truncated' and abs(total - halved) > T_TAIL_LIMIT * abs(total):
        raise TruncationTooCoarse(f't_cap={t_cap} is too small', abs(total - halved), abs(total))

    LOGGER.info(f'Main term k={k} Delta={Delta:g}: {total.real:.6g} over {len(vectors)} u-vectors')
    return total.real


def h_eval(tf: TestFunctionSet,
           theta: float,
           Delta: float,
           k: int,
           t: Sequence[float],
           u: Sequence[float],
           ) -> complex:
    """
    H(t, u) = int prod F_theta(xi_i, u_i) e(-<t, xi>) w(Delta^3 sum xi) d xi,
    evaluated as int w^(rho) prod g_i(t_i - rho Delta^3) d rho.

    The second argument of F carries the factor 2 of the kernel convention, so factor i uses eta = 2 u_i.
    """
    _check_k(k)
    t = np.asarray(t, dtype=float)
    eta = 2 * np.asarray(u, dtype=float)
    if len(t) != k or len(eta) != k:
        raise ValueError(f't and u must have length {k}')

    kernel = CouplingKernel(tf, theta, float(np.abs(eta).max()))
    lo, hi = kernel.support
    D3 = Delta**3
    rho_lo = float(np.max((t - hi) / D3))
    rho_hi = float(np.min((t - lo) / D3))
    if rho_lo >= rho_hi:
        return 0j

    panel = kernel.tau_ramp / (4 * D3)
    breaks = np.linspace(rho_lo, rho_hi, math.ceil((rho_hi - rho_lo) / panel) + 1)
    rho, weights = quadrature.composite_rule(breaks, order=RHO_ORDER)
    values = weights * fourier_transform(tf.w, rho)
    for ti, ei in zip(t, eta):
        values = values * kernel(ti - rho * D3, [ei])[:, 0]
    return complex(math.fsum(values.real), math.fsum(values.imag))


def moment_lhs(mu: MinorArcMeasure,
               tf: TestFunctionSet,
               N: int,
               Delta: float,
               k: int,
               v_cap: Optional[int] = None,
               u_cap: Optional[int] = None,
               threads: Optional[int] = None,
               kernel: Optional[FKernel] = None,
               ) -> float:
    """(N/L) sum over arcs of int r_tilde(a/q - theta)^k phi(N theta) d theta."""
    _check_k(k)
    kernel = kernel or FKernel(tf)

    def arc_term(i: int) -> float:
        r = r_tilde_nodes(mu.arcs[i], kernel, N, Delta, mu.thetas, v_cap, u_cap)
        return mu.arc_weights[i] * math.fsum(mu.theta_weights * r**k)

    return math.fsum(parallel.chunked_map(arc_term, range(len(mu.arcs)), threads, chunk_size=8))


def moment_compare(N: int,
                   Delta: float,
                   k: int,
                   tf: TestFunctionSet,
                   qset: Optional[QSet] = None,
                   prime_floor: Optional[int] = None,
                   v_cap: Optional[int] = None,
                   u_cap: Optional[int] = None,
                   t_cap: int = T_CAP,
                   method: Method = 'poisson',
                   max_arcs: Optional[int] = None,
                   threads: Optional[int] = None,
                   ) -> MomentReport:
    qset = qset or build_qset(Delta, N, 'desk', prime_floor)
    mu = MinorArcMeasure(qset, tf, max_arcs=max_arcs)
    lhs = moment_lhs(mu, tf, N, Delta, k, v_cap, u_cap, threads)
    rhs = moment_rhs(tf, Delta, k, u_cap, t_cap, method, threads=threads)
    report = MomentReport(k=k,
                          lhs=lhs,
                          rhs=rhs,
                          rel_error=abs(lhs - rhs) / max(abs(rhs), REL_FLOOR),
                          n=N,
                          delta=Delta,
                          u_cap=default_u_cap(Delta) if u_cap is None else u_cap,
                          t_cap=t_cap if method == 'truncated' else None,
                          method=method,
                          xi_budget=coupling_budget(tf),
                          arcs=len(mu.arcs))
    LOGGER.info(f'Moment k={k} N={N}: lhs {lhs:.6g}, rhs {rhs:.6g}, rel_error {report.rel_error:.3g}')
    return report


def moment_ladder(Ns: Sequence[int],
                  Delta: float,
                  tf: TestFunctionSet,
                  k: int = 1,
                  max_arcs: Optional[int] = None,
                  threads: Optional[int] = None,
                  ) -> list[MomentReport]:
    return [moment_compare(N, Delta, k, tf, max_arcs=max_arcs, threads=threads) for N in Ns]
