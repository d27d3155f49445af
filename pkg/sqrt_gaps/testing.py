"""
Testing utility functions: matchers and slow reference implementations.
"""

import math
import re
from dataclasses import replace
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np

from sqrt_gaps import quadrature
from sqrt_gaps.arith import FareyPoint, LatticePair, QSet, mod_inverse
from sqrt_gaps.minorarc import MinorArcMeasure
from sqrt_gaps.osc import FKernel, f_batch, f_values
from sqrt_gaps.seq import FracSequence, count_in_windows
from sqrt_gaps.testfn import BumpFunction, TestFunctionSet


class matching:
    """Assert that a given string meets some expectations."""

    def __init__(self, pattern, flags=0):
        self._regex = re.compile(pattern, flags)

    def __eq__(self, actual):
        return bool(self._regex.match(actual))

    def __repr__(self):
        return self._regex.pattern


def frac_sqrt_oracle(n: int, bits: int = 96) -> int:
    """floor(2^bits frac(sqrt(n))) at 200-bit working precision."""
    with mpmath.workprec(200):
        root = mpmath.sqrt(n)
        return int(mpmath.floor((root - mpmath.floor(root)) * mpmath.mpf(2)**bits))


def brute_bset(fp: FareyPoint, v_cap: int, u_cap: int) -> list[LatticePair]:
    a, q = fp
    pairs = []
    for v in range(-v_cap, v_cap + 1):
        for u in range(-u_cap, u_cap + 1):
            if u and v and (u - 2 * v * a) % q == 0 and math.gcd(u, q) == 1:
                pairs.append(LatticePair(u, v))
    return sorted(pairs, key=lambda p: (p.v, p.u))


def sample_measure(mu: MinorArcMeasure, rng: np.random.Generator, size: int) -> np.ndarray:
    """Points in [0, 1) drawn from the minor-arc measure, phi sampled by rejection."""
    phi = mu.tf.phi
    arcs = rng.choice(len(mu.arcs), size=size, p=mu.arc_weights / mu.arc_weights.sum())
    top = float(phi((phi.lo + phi.hi) / 2))
    t = np.empty(0)
    while len(t) < size:
        cand = rng.uniform(phi.lo, phi.hi, size)
        t = np.concatenate([t, cand[rng.uniform(0, top, size) < phi(cand)]])
    centers = mu.centers[arcs]
    return np.mod(centers - t[:size] / mu.N, 1.0)


def void_monte_carlo(mu: MinorArcMeasure,
                     seq: FracSequence,
                     s: float,
                     rng: np.random.Generator,
                     size: int = 20000,
                     ) -> tuple[float, float]:
    """Estimate and standard error of the restricted void statistic."""
    hits = (count_in_windows(seq, sample_measure(mu, rng, size), s) == 0).astype(float)
    return float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(size))


def approximant(qset: QSet, phi: BumpFunction, N: int, alpha: np.ndarray) -> np.ndarray:
    """(N/L) sum over reduced a/q of phi(N(alpha - a/q)), for arcs that neither overlap nor wrap."""
    centers = np.sort(np.array([fp.a / fp.q for fp in qset.arcs()]))
    idx = np.searchsorted(centers, alpha)
    out = np.zeros(len(alpha))
    for near in (idx - 1, idx):
        valid = (near >= 0) & (near < len(centers))
        out[valid] += phi(N * (alpha[valid] - centers[near[valid]]))
    return N * out / qset.L


def jutila_direct(qset: QSet, phi: BumpFunction, N: int, abs_tol: float = 1e-10) -> float:
    """int_0^1 |1 - chi(alpha)|^2 d alpha by panels split at every arc end."""
    centers = np.array([fp.a / fp.q for fp in qset.arcs()])
    ends = np.concatenate([[0.0, 1.0], centers + phi.lo / N, centers + phi.hi / N, centers])
    value, _ = quadrature.integrate(lambda a: (1 - approximant(qset, phi, N, a))**2,
                                    np.unique(ends),
                                    abs_tol=abs_tol)
    return float(value)


def naive_r_tilde(fp: FareyPoint,
                  tf: TestFunctionSet,
                  N: int,
                  theta: float,
                  pairs: list[LatticePair],
                  ) -> float:
    """The formula sum with exact rational phases and unmemoized F."""
    a, q = fp
    kernel = FKernel(tf, theta=theta)
    total = 0j
    for u, v in pairs:
        qbar = mod_inverse(q, 4 * abs(v))
        phase = (Fraction(u * u, 4 * v * q * q) - Fraction(qbar * qbar * u * u, 4 * v)) % 1
        F = f_values(kernel, [v / math.sqrt(N)], [2 * u * math.sqrt(N) / q], memo=False)[0]
        total += complex(np.exp(2j * np.pi * float(phase))) * F
    return total.real


def zero_u_terms(fp: FareyPoint, tf: TestFunctionSet, N: int, theta: float, v_cap: int) -> float:
    """
    Twice the sum of F_theta(v / sqrt(N), 0) over the nonzero multiples v of q with |v| <= v_cap.
    These u = 0 pairs lie outside the B-set, so the closed formula leaves them out.
    """
    q = fp.q
    vs = [sign * m * q for m in range(1, v_cap // q + 1) for sign in (1, -1)]
    if not vs:
        return 0.0
    xi = np.array(vs, dtype=float) / math.sqrt(N)
    F = f_values(FKernel(tf, theta=theta), xi, np.zeros(len(xi)), memo=False)
    return 2 * float(np.sum(F).real)


def naive_moment_lhs(mu: MinorArcMeasure,
                     tf: TestFunctionSet,
                     N: int,
                     k: int,
                     pairs_for: dict,
                     ) -> float:
    """Double loop over arcs and theta nodes. `pairs_for` maps each arc to its B-set."""
    total = 0.0
    for weight, fp in zip(mu.arc_weights, mu.arcs):
        inner = 0.0
        for theta, w in zip(mu.thetas, mu.theta_weights):
            inner += w * naive_r_tilde(fp, tf, N, theta, pairs_for[fp])**k
        total += weight * inner
    return total


def h_oracle_1d(tf: TestFunctionSet, theta: float, Delta: float, t: float, u: float) -> complex:
    """int F_theta(xi, 2u) e(-t xi) w(Delta^3 xi) d xi by adaptive quadrature over the w window."""
    kernel = FKernel(tf, theta=theta, abs_tol=1e-11)
    D3 = Delta**3
    w = tf.w

    def integrand(xi):
        return (f_values(kernel, xi, np.full_like(xi, 2 * u), memo=False)
                * np.exp(-2j * np.pi * t * xi) * w(D3 * xi))

    value, _ = quadrature.integrate(integrand, [w.lo / D3, 0.0, w.hi / D3], abs_tol=1e-10)
    return complex(value)


def h_oracle_2d(tf: TestFunctionSet,
                theta: float,
                Delta: float,
                t: tuple[float, float],
                u: tuple[float, float],
                xi_max: float = 16.0,
                panel: float = 0.25,
                inner_panels: int = 8,
                inner_order: int = 16,
                ) -> complex:
    """
    Iterated tensor quadrature of the k = 2 coupled integral: xi_1 on fixed panels,
    xi_2 on the window where w(Delta^3 (xi_1 + xi_2)) is nonzero.
    """
    kernel = FKernel(tf, theta=theta)
    D3 = Delta**3
    w = tf.w
    xi1, w1 = quadrature.composite_rule(np.arange(-xi_max, xi_max + panel / 2, panel))
    offsets, inner_w = quadrature.composite_rule(np.linspace(w.lo / D3, w.hi / D3, inner_panels + 1), inner_order)
    xi2 = -xi1[:, None] + offsets[None, :]
    f1 = f_batch(kernel, xi1, np.full_like(xi1, 2 * u[0]))
    f2 = f_batch(kernel, xi2.ravel(), np.full(xi2.size, 2 * u[1])).reshape(xi2.shape)
    coupling = w(D3 * (xi1[:, None] + xi2))
    phase = np.exp(-2j * np.pi * (t[0] * xi1[:, None] + t[1] * xi2))
    inner = (f2 * coupling * phase * inner_w[None, :]).sum(axis=1)
    return complex(np.sum(w1 * f1 * inner))


def brute_lattice(u: tuple[int, ...], t_cap: int) -> list[tuple[int, ...]]:
    return sorted(t for t in product(range(-t_cap, t_cap + 1), repeat=len(u))
                  if sum(ui * ti for ui, ti in zip(u, t)) == 0)


def brute_constraint_vectors(k: int, u_cap: int) -> list[tuple[int, ...]]:
    values = [u for u in range(-u_cap, u_cap + 1) if u]
    return sorted(u for u in product(values, repeat=k) if sum(u) == 0)


def scaled_phi(tf: TestFunctionSet, height: float) -> TestFunctionSet:
    return replace(tf, Phi=tf.Phi.scaled(height))
