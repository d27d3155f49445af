"""
Smooth compactly supported test functions and their Fourier transforms.

Every bump is built from the mollifier m(t) = exp(-1/(1-t^2)).
A ramp of width r rising at `lo` is m(1-t)/(m(1-t)+m(t)) with t = (x-lo)/r,
so plateau bumps are exactly 1 on their plateau and exactly 0 off their support.
Bumps without a plateau are exp(-t^2/(1-t^2)) on the rescaled support,
which peaks at exactly 1 in the middle.

Fourier transforms use the convention f^(xi) = int f(x) e(-xi x) dx, e(t) = exp(2 pi i t).
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal, Optional, Union

import numpy as np
from scipy import signal
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from sqrt_gaps import numerics_logger, quadrature
from sqrt_gaps.models import DecayReport, TestFunctionParams

LOGGER = numerics_logger(__name__)

Normalization = Literal['plateau-one', 'unit-integral']

FT_ABS_TOL = 1e-10
FT_GROUP = 32
NORMALIZATION_TOL = 1e-14
DECAY_ORDER_MAX = 12
CDF_CELLS = 4096
SAMPLES_PER_RAMP = 100


def _mollifier(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1 / (1 - t[inside]**2))
    return out


def _rise(t):
    t = np.clip(np.asarray(t, dtype=float), 0, 1)
    up = _mollifier(1 - t)
    return up / (up + _mollifier(t))


def _peak(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    sq = t[inside]**2
    out[inside] = np.exp(-sq / (1 - sq))
    return out


@dataclass(frozen=True)
class BumpFunction:
    """
    A C-infinity bump on the open interval (lo, hi).

    With a plateau [p0, p1] the bump rises on (lo, p0), equals 1 on the plateau,
    and falls on (p1, hi). Without a plateau it peaks at the midpoint.
    In 'unit-integral' mode the shape is rescaled to integrate to 1.
    `height` multiplies the result; it is 1 for every bump used as a test function
    and 0 for the vanishing bump used by degenerate-case checks.
    """
    lo: float
    hi: float
    plateau: Optional[tuple[float, float]] = None
    normalization: Normalization = 'plateau-one'
    height: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f'empty support ({self.lo}, {self.hi})')
        if self.plateau is not None:
            p0, p1 = self.plateau
            if not self.lo < p0 <= p1 < self.hi:
                raise ValueError(f'plateau {self.plateau} leaves a zero-width ramp in ({self.lo}, {self.hi})')
        scale = 1.0
        if self.normalization == 'unit-integral':
            total, _ = quadrature.integrate(self._shape, self.breakpoints, abs_tol=NORMALIZATION_TOL)
            scale = 1 / float(total)
        object.__setattr__(self, '_scale', scale)

    def _shape(self, x):
        x = np.asarray(x, dtype=float)
        if self.plateau is None:
            half = (self.hi - self.lo) / 2
            return _peak((x - self.lo - half) / half)
        p0, p1 = self.plateau
        return np.where(x < p0,
                        _rise((x - self.lo) / (p0 - self.lo)),
                        np.where(x > p1, _rise((self.hi - x) / (self.hi - p1)), 1.0))

    def __call__(self, x):
        return self.height * self._scale * self._shape(x)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def breakpoints(self) -> np.ndarray:
        if self.plateau is None:
            return np.array([self.lo, (self.lo + self.hi) / 2, self.hi])
        return np.unique([self.lo, *self.plateau, self.hi])

    @property
    def ramp(self) -> float:
        """Smoothness scale: the narrowest ramp width."""
        if self.plateau is None:
            return (self.hi - self.lo) / 2
        return min(self.plateau[0] - self.lo, self.hi - self.plateau[1])

    @cached_property
    def integral(self) -> float:
        if self.normalization == 'unit-integral':
            return self.height
        total, _ = quadrature.integrate(self, self.breakpoints, abs_tol=NORMALIZATION_TOL)
        return float(total)

    @cached_property
    def _cdf(self) -> CubicHermiteSpline:
        grid = np.linspace(self.lo, self.hi, CDF_CELLS + 1)
        x, w = quadrature.composite_rule(grid, order=16)
        cells = (self(x) * w).reshape(CDF_CELLS, 16).sum(axis=1)
        return CubicHermiteSpline(grid, np.concatenate([[0.0], np.cumsum(cells)]), self(grid))

    def cumulative(self, x):
        """Integral of the bump from its left support end up to x."""
        return self._cdf(np.clip(x, self.lo, self.hi))

    def scaled(self, height: float) -> 'BumpFunction':
        return replace(self, height=height)


def plateau_bump(lo: float, hi: float, p0: float, p1: float) -> BumpFunction:
    return BumpFunction(lo, hi, (p0, p1), 'plateau-one')


def peak_bump(lo: float, hi: float) -> BumpFunction:
    return BumpFunction(lo, hi, None, 'plateau-one')


def unit_bump(lo: float, hi: float) -> BumpFunction:
    return BumpFunction(lo, hi, None, 'unit-integral')


def eval_bump(f: BumpFunction, x: float) -> float:
    return float(f(x))


def fourier_transform(f: BumpFunction,
                      xi: Union[float, np.ndarray],
                      abs_tol: float = FT_ABS_TOL,
                      ) -> Union[complex, np.ndarray]:
    """
    Adaptive quadrature of f(x) e(-xi x) over the support of f.

    Frequencies are processed in groups of similar magnitude,
    with panels holding at most one oscillation of the group's largest frequency.

    Raises:
        QuadratureError: refinement did not reach `abs_tol`.
    """
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.empty(xi.shape, dtype=complex)
    order = np.argsort(np.abs(xi), kind='stable')

    for start in range(0, len(order), FT_GROUP):
        idx = order[start:start + FT_GROUP]
        group = xi[idx]
        breaks = quadrature.oscillation_breaks(f.breakpoints, np.abs(group).max())

        def integrand(x, group=group):
            return f(x)[:, None] * np.exp(-2j * np.pi * x[:, None] * group[None, :])

        out[idx], _ = quadrature.integrate(integrand, breaks, abs_tol=abs_tol)

    return complex(out[0]) if scalar else out


def sampled_transform(f: BumpFunction,
                      y_max: float,
                      step: float,
                      y_min: float = 0.0,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """
    f^ on the uniform grid y_min, y_min + step, ..., y_max.

    Uses the trapezoid rule on a fine x-grid, evaluated at all grid frequencies at once
    by a zoom FFT. For a C-infinity function with compact support the trapezoid rule
    converges spectrally; the x-step resolves the narrowest ramp and keeps aliased
    frequencies far beyond the grid.
    """
    if not y_min < y_max:
        raise ValueError(f'empty frequency range [{y_min}, {y_max}]')
    h_target = min(f.ramp / SAMPLES_PER_RAMP, 1 / (4 * max(abs(y_min), abs(y_max))))
    n_x = math.ceil((f.hi - f.lo) / h_target)
    h = (f.hi - f.lo) / n_x
    x = f.lo + h * np.arange(n_x + 1)

    m = int(round((y_max - y_min) / step)) + 1
    y = np.linspace(y_min, y_max, m)
    raw = signal.zoom_fft(f(x), [y_min, y_max], m=m, fs=1 / h, endpoint=True)
    return y, h * np.exp(-2j * np.pi * y * f.lo) * raw


class TransformTable:
    """
    Memoized f^ on [-y_max, y_max]: cubic splines of the real and imaginary parts
    on a uniform grid, with conj(f^(y)) = f^(-y) for the negative half.
    Arguments outside the table fall back to `fourier_transform()`.
    """

    def __init__(self, f: BumpFunction, y_max: float, step: Optional[float] = None):
        self.f = f
        self.y_max = float(y_max)
        self.step = step or 1 / (512 * max(1.0, abs(f.lo), abs(f.hi)))
        self.grid, self.values = sampled_transform(f, self.y_max, self.step)
        self._re = CubicSpline(self.grid, self.values.real)
        self._im = CubicSpline(self.grid, self.values.imag)
        LOGGER.debug(f'Transform table: {len(self.grid)} points up to {self.y_max:g}')

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        mag = np.abs(y)
        inside = mag <= self.y_max
        out = np.empty(y.shape, dtype=complex)
        out[inside] = self._re(mag[inside]) + 1j * np.sign(y[inside]) * self._im(mag[inside])
        if not inside.all():
            out[~inside] = fourier_transform(self.f, y[~inside])
        return out


def check_decay(f: BumpFunction, A: int, xi_grid) -> DecayReport:
    """
    Reports sup |f^(xi)| (1 + |xi|^A) over the grid.
    """
    if A > DECAY_ORDER_MAX:
        raise ValueError(f'decay order {A} exceeds {DECAY_ORDER_MAX}')
    xi_grid = np.asarray(xi_grid, dtype=float)
    if not xi_grid.size:
        raise ValueError('empty frequency grid')
    weighted = np.abs(fourier_transform(f, xi_grid)) * (1 + np.abs(xi_grid)**A)
    best = int(np.argmax(weighted))
    return DecayReport(order=A,
                       sup=float(weighted[best]),
                       argsup=float(xi_grid[best]),
                       points=len(xi_grid))


@dataclass(frozen=True)
class TestFunctionSet:
    """
    The four bumps of the smoothed counting problem.

    Phi: plateau (eta, s), support (0, s + eta).
    V: plateau (1, 2), support (1 - eta, 2 + eta).
    phi: unit-integral, supported in [-1/100, 1/100].
    w: peak 1 at 0, supported in (-1/2, 1/2).
    """
    __test__ = False

    Phi: BumpFunction
    V: BumpFunction
    phi: BumpFunction
    w: BumpFunction
    eta: float
    s: float
    mode: str = 'strict'

    def __post_init__(self):
        if not (0.5 <= self.V.lo and self.V.hi <= 3):
            raise ValueError(f'V support {self.V.support} is not inside (1/2, 3)')
        if not (-1 / 100 <= self.phi.lo and self.phi.hi <= 1 / 100):
            raise ValueError(f'phi support {self.phi.support} is not inside [-1/100, 1/100]')
        if not (-1 / 2 <= self.w.lo < 0 < self.w.hi <= 1 / 2):
            raise ValueError(f'w support {self.w.support} is not inside (-1/2, 1/2)')
        TestFunctionParams(eta=self.eta, s=self.s, mode=self.mode)

    @classmethod
    def from_params(cls, params: TestFunctionParams) -> 'TestFunctionSet':
        eta, s = params.eta, params.s
        return cls(
            Phi=plateau_bump(0.0, s + eta, eta, s),
            V=plateau_bump(1 - eta, 2 + eta, 1.0, 2.0),
            phi=unit_bump(*params.phi_support),
            w=peak_bump(*params.w_support),
            eta=eta,
            s=s,
            mode=params.mode,
        )

    @property
    def mass(self) -> float:
        """Phi^(0) V^(0), the mean of the smoothed count."""
        return self.Phi.integral * self.V.integral

    def params(self) -> TestFunctionParams:
        return TestFunctionParams(eta=self.eta,
                                  s=self.s,
                                  phi_support=self.phi.support,
                                  w_support=self.w.support,
                                  mode=self.mode)


def default_test_functions(eta: float = 1 / 200, s: float = 1.0, mode: str = 'strict') -> TestFunctionSet:
    return TestFunctionSet.from_params(TestFunctionParams(eta=eta, s=s, mode=mode))
