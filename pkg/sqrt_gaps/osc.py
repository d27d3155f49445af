"""
Oscillatory integrals around the minor-arc formula.

The weight attached to a lattice pair is

    F(xi, eta) = int_0^inf Phi^(2 xi x) e(2 xi theta x) x V(x^2) e(-eta x / 2) dx

which only depends on theta through eta: F_theta(xi, eta) = F_0(xi, eta - 4 xi theta).
"""

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from sqrt_gaps import numerics_logger, quadrature
from sqrt_gaps.models import DecayReport
from sqrt_gaps.testfn import (BumpFunction, TestFunctionSet, TransformTable,
                              fourier_transform, sampled_transform)

LOGGER = numerics_logger(__name__)

F_ABS_TOL = 1e-9
F_MIN_TOL = 1e-12
F_GROUP = 32
PHI_HAT_RANGE = 96.0
RAMP_PANELS = 16
BATCH_SIZE = 2048
DECAY_ORDER_MAX = 8
ETA_GATE = 50
FRESNEL_MARGIN = 8.0
FRESNEL_ALIAS = 60.0
FRESNEL_RANGE = 400.0
FRESNEL_SAMPLE_LIMIT = 10**7

Axis = Literal['xi', 'eta']


def _sqrt_breaks(f: BumpFunction) -> np.ndarray:
    return np.sqrt(np.maximum(f.breakpoints, 0.0))


@dataclass(frozen=True, eq=False)
class FKernel:
    """
    Evaluates the weight F for one test function set and one rescaled theta.

    The Phi^ lookup table is built eagerly and shared by kernels derived
    through `with_theta()`, so evaluation never mutates the kernel.
    """
    tf: TestFunctionSet
    theta: float = 0.0
    abs_tol: float = F_ABS_TOL
    phi_hat: Optional[TransformTable] = None

    def __post_init__(self):
        if self.abs_tol < F_MIN_TOL:
            raise ValueError(f'target error must be at least {F_MIN_TOL:g}, got {self.abs_tol:g}')
        if not math.isfinite(self.theta):
            raise ValueError(f'theta must be finite, got {self.theta}')
        if self.phi_hat is None:
            object.__setattr__(self, 'phi_hat', TransformTable(self.tf.Phi, PHI_HAT_RANGE))

    def with_theta(self, theta: float) -> 'FKernel':
        return replace(self, theta=theta)

    @property
    def x_breaks(self) -> np.ndarray:
        """Breakpoints of x -> V(x^2) on its support."""
        return _sqrt_breaks(self.tf.V)

    @property
    def phi_reach(self) -> float:
        return max(abs(self.tf.Phi.lo), abs(self.tf.Phi.hi))

    def shifted_eta(self, xi, eta):
        return np.asarray(eta, dtype=float) - 4 * np.asarray(xi, dtype=float) * self.theta

    def frequency(self, xi, eta_eff) -> np.ndarray:
        """Oscillation frequency in x of the theta-free integrand."""
        return 2 * np.abs(xi) * self.phi_reach + np.abs(eta_eff) / 2

    def amplitude(self, x: np.ndarray, xi: np.ndarray, exact: bool = False) -> np.ndarray:
        """Phi^(2 xi x) x V(x^2) on an (x, xi) grid."""
        y = 2 * x[:, None] * xi[None, :]
        hat = fourier_transform(self.tf.Phi, y.ravel()).reshape(y.shape) if exact else self.phi_hat(y)
        return hat * (x * self.tf.V(x * x))[:, None]


def f_values(k: FKernel,
             xi,
             eta,
             memo: bool = True,
             ) -> np.ndarray:
    """
    Adaptive evaluation of F at matching arrays of xi and eta.

    Raises:
        QuadratureError: refinement did not reach the kernel's target error.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta_eff = np.atleast_1d(k.shifted_eta(xi, eta))
    freq = k.frequency(xi, eta_eff)
    out = np.empty(xi.shape, dtype=complex)
    order = np.argsort(freq, kind='stable')

    for start in range(0, len(order), F_GROUP):
        idx = order[start:start + F_GROUP]
        g_xi, g_eta = xi[idx], eta_eff[idx]
        breaks = quadrature.oscillation_breaks(k.x_breaks, freq[idx].max())

        def integrand(x, g_xi=g_xi, g_eta=g_eta):
            return k.amplitude(x, g_xi, exact=not memo) * np.exp(-1j * np.pi * x[:, None] * g_eta[None, :])

        out[idx], _ = quadrature.integrate(integrand, breaks, abs_tol=k.abs_tol)

    return out


def f_eval(k: FKernel, xi: float, eta: float) -> complex:
    return complex(f_values(k, [xi], [eta])[0])


def batch_rule(k: FKernel, max_frequency: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Fixed composite Gauss rule in x: every ramp of V(x^2) split into RAMP_PANELS panels,
    and no panel longer than half a period of `max_frequency`.
    """
    base = k.x_breaks
    fine = np.concatenate([np.linspace(a, b, RAMP_PANELS + 1)[:-1] for a, b in zip(base[:-1], base[1:])])
    breaks = quadrature.oscillation_breaks(np.append(fine, base[-1]), max_frequency, per_cycle=0.5)
    return quadrature.composite_rule(breaks)


def f_batch(k: FKernel, xi, eta) -> np.ndarray:
    """
    F at matching arrays of xi and eta, on one fixed rule.

    Inputs are processed in chunks of BATCH_SIZE. Within a chunk the amplitude
    is computed once per distinct xi, so callers that repeat xi for many eta
    values should keep the repeats adjacent.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta_eff = np.atleast_1d(k.shifted_eta(xi, eta))
    out = np.empty(xi.shape, dtype=complex)
    if not xi.size:
        return out

    x, w = batch_rule(k, float(k.frequency(xi, eta_eff).max()))
    for start in range(0, len(xi), BATCH_SIZE):
        sl = slice(start, start + BATCH_SIZE)
        unique, local = np.unique(xi[sl], return_inverse=True)
        amp = k.amplitude(x, unique) * w[:, None]
        phase = np.exp(-1j * np.pi * eta_eff[sl, None] * x[None, :])
        out[sl] = np.einsum('kx,xk->k', phase, amp[:, local])
    return out


class RadialWeight:
    """W(y) = y V(y^2) for y > 0, and 0 for y <= 0."""

    def __init__(self, V: BumpFunction):
        self.V = V
        self.breakpoints = _sqrt_breaks(V)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y > 0, y * self.V(y * y), 0.0)


def w_hat(tf: TestFunctionSet, xi):
    """Fourier transform of W(y) = y V(y^2), to 1e-9."""
    return fourier_transform(RadialWeight(tf.V), xi, abs_tol=1e-9)


def fresnel_identity_check(v: float, f: BumpFunction) -> tuple[complex, complex]:
    """
    Both sides of

        int e(-v y^2) f(y) dy = e(-sgn(v)/8) / sqrt(2|v|) * int e(xi^2 / 4v) f^(xi) dxi

    The left side is adaptive quadrature. The right side samples f^ on a uniform
    xi-grid by zoom FFT and sums it by the trapezoid rule. Each alias of that rule
    is a Fresnel integral of f with its stationary point moved out by a multiple of
    1/step, so the step is chosen to leave at least FRESNEL_ALIAS oscillations
    of the chirp across the narrowest ramp of f.

    Raises:
        ValueError: the grid would exceed FRESNEL_SAMPLE_LIMIT samples (ramp too narrow for |v|).
    """
    if v == 0:
        raise ValueError('v must be nonzero')
    reach = max(abs(f.lo), abs(f.hi))

    xi_max = FRESNEL_RANGE / f.ramp
    step = 1 / (reach + max(FRESNEL_MARGIN, FRESNEL_ALIAS / (2 * abs(v) * f.ramp)))
    if xi_max / step > FRESNEL_SAMPLE_LIMIT:
        raise ValueError(f'ramp {f.ramp:g} is too narrow for the transform side at v={v:g}')

    breaks = quadrature.oscillation_breaks(f.breakpoints, 2 * abs(v) * reach)
    lhs, _ = quadrature.integrate(lambda y: f(y) * np.exp(-2j * np.pi * v * y * y), breaks, abs_tol=1e-10)

    xi, hat = sampled_transform(f, xi_max, step)
    chirp = np.exp(2j * np.pi * xi * xi / (4 * v))
    # f^(-xi) = conj(f^(xi)) and the chirp is even, so the two halves combine to 2 Re f^.
    terms = np.concatenate([[chirp[0] * hat[0]], chirp[1:] * 2 * hat[1:].real])
    total = complex(math.fsum(terms.real), math.fsum(terms.imag)) * (xi[1] - xi[0])
    rhs = np.exp(-2j * np.pi * np.sign(v) / 8) / math.sqrt(2 * abs(v)) * total

    return complex(lhs), complex(rhs)


def decay_probe(k: FKernel,
                axis: Axis,
                A: int,
                grid,
                fixed: float = 0.0,
                ) -> DecayReport:
    """
    sup |F| (1 + |t|^A) / (1 + |theta|^A) over the grid, where t runs along `axis`
    and the other argument is held at `fixed`.

    Points on the eta axis only count when |eta| > 50 |xi theta|.
    """
    if A > DECAY_ORDER_MAX:
        raise ValueError(f'decay order {A} exceeds {DECAY_ORDER_MAX}')
    grid = np.asarray(grid, dtype=float)

    if axis == 'xi':
        xi, eta = grid, np.full_like(grid, fixed)
    else:
        keep = np.abs(grid) > ETA_GATE * abs(fixed * k.theta)
        grid = grid[keep]
        xi, eta = np.full_like(grid, fixed), grid

    if not grid.size:
        return DecayReport(order=A, sup=0.0, argsup=0.0, points=0)

    weighted = np.abs(f_values(k, xi, eta)) * (1 + np.abs(grid)**A) / (1 + abs(k.theta)**A)
    best = int(np.argmax(weighted))
    return DecayReport(order=A, sup=float(weighted[best]), argsup=float(grid[best]), points=len(grid))
