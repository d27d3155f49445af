"""
Gauss-Legendre quadrature on panels.

`integrate()` refines panels until the whole-panel estimate and the sum of the
two half-panel estimates agree. Integrands are vectorized: they are called with
a 1-D array of nodes and return an array whose first axis matches the nodes.
Trailing axes are integrated independently, with refinement driven by the worst
component.

Example:

    value, error = quadrature.integrate(np.cos, [0, np.pi / 2], abs_tol=1e-12)
"""

import math
from functools import lru_cache
from typing import Callable

import numpy as np

from sqrt_gaps import NumericsError, numerics_logger

LOGGER = numerics_logger(__name__, dedupe=True)

GAUSS_ORDER = 24
MAX_ROUNDS = 40
MAX_PANELS = 1 << 18

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureError(NumericsError):
    """
    Adaptive refinement stopped before reaching the requested accuracy.
    """

    def __init__(self, msg: str, achieved: float, target: float):
        super().__init__(f'{msg} (achieved {achieved:.3g}, target {target:.3g})')
        self.achieved = achieved
        self.target = target


@lru_cache(maxsize=32)
def legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_rule(a: float, b: float, order: int = GAUSS_ORDER) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = legendre_rule(order)
    half = (b - a) / 2
    return a + half * (nodes + 1), half * weights


def composite_rule(breaks, order: int = GAUSS_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated Gauss rules on each interval between consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    nodes, weights = legendre_rule(order)
    half = np.diff(breaks)[:, None] / 2
    x = breaks[:-1, None] + half * (nodes + 1)
    w = half * weights
    return x.ravel(), w.ravel()


def oscillation_breaks(breaks, frequency: float, per_cycle: float = 1.0) -> np.ndarray:
    """
    Subdivides every interval between `breaks` so that no panel spans more than
    `per_cycle` periods of an oscillation with the given frequency (cycles per unit).
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    out = [breaks[:1]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        count = max(1, math.ceil((b - a) * abs(frequency) / per_cycle))
        out.append(np.linspace(a, b, count + 1)[1:])
    return np.concatenate(out)


def _estimates(func: Integrand, panels: np.ndarray, order: int):
    nodes, weights = legendre_rule(order)
    a = panels[:, 0:1]
    b = panels[:, 1:2]
    half = (b - a) / 2
    mid = (a + b) / 2

    x = np.concatenate([
        a + half * (nodes + 1),
        a + half / 2 * (nodes + 1),
        mid + half / 2 * (nodes + 1),
    ], axis=1)

    values = np.asarray(func(x.ravel()))
    values = values.reshape(len(panels), 3, order, *values.shape[1:])
    trailing = (1,) * (values.ndim - 3)
    w_whole = (half * weights).reshape(len(panels), order, *trailing)
    w_half = (half / 2 * weights).reshape(len(panels), order, *trailing)

    whole = np.sum(values[:, 0] * w_whole, axis=1)
    halves = np.sum(values[:, 1] * w_half, axis=1) + np.sum(values[:, 2] * w_half, axis=1)
    return whole, halves


def _worst(arr: np.ndarray) -> np.ndarray:
    arr = np.abs(arr)
    if arr.ndim > 1:
        arr = arr.reshape(len(arr), -1).max(axis=1)
    return arr


def integrate(func: Integrand,
              breaks,
              abs_tol: float = 1e-10,
              order: int = GAUSS_ORDER,
              max_rounds: int = MAX_ROUNDS,
              max_panels: int = MAX_PANELS,
              ) -> tuple[np.ndarray, float]:
    """
    Adaptive panel quadrature of `func` over [breaks[0], breaks[-1]].

    Args:
        func (Integrand):
            Vectorized integrand. Called with a 1-D node array.

        breaks (array-like):
            Initial panel boundaries. Discontinuities of the integrand
            or of its derivatives must be included.

        abs_tol (float):
            Target for the total absolute error.
            Each panel gets a share proportional to its width, and refinement
            also stops as soon as the summed estimate of all panels is below it.

    Returns:
        tuple[np.ndarray, float]: The integral (scalar array, or one value per
            trailing component), and the accumulated error estimate.

    Raises:
        QuadratureError: refinement exhausted `max_rounds` or `max_panels`.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    if len(breaks) < 2:
        raise ValueError('at least two distinct breakpoints are required')

    span = breaks[-1] - breaks[0]
    panels = np.column_stack([breaks[:-1], breaks[1:]])
    starts: list[np.ndarray] = []
    parts: list[np.ndarray] = []
    error = 0.0
    pending = 0.0

    for _ in range(max_rounds):
        whole, halves = _estimates(func, panels, order)
        err = _worst(whole - halves)
        width = panels[:, 1] - panels[:, 0]
        noise = 64 * np.finfo(float).eps * _worst(halves)
        done = (err <= abs_tol * width / span) | (err <= noise)
        if error + float(np.sum(err)) <= abs_tol:
            done[:] = True

        starts.append(panels[done, 0])
        parts.append(halves[done])
        error += float(np.sum(err[done]))
        pending = float(np.sum(err[~done]))

        panels = panels[~done]
        if not len(panels) or 2 * len(panels) > max_panels:
            break
        mid = panels.mean(axis=1)
        panels = np.concatenate([
            np.column_stack([panels[:, 0], mid]),
            np.column_stack([mid, panels[:, 1]]),
        ])

    if len(panels):
        raise QuadratureError(f'{len(panels)} panels did not converge', error + pending, abs_tol)

    if error > abs_tol:
        LOGGER.warning('Rounding floor reached above the requested tolerance')

    start = np.concatenate(starts)
    values = np.concatenate(parts)
    ordered = np.argsort(start, kind='stable')
    return np.sum(values[ordered], axis=0), error
