"""
The sweeps behind each command.

Every command function takes a validated RunConfig and returns the results object
and the table rows written in CSV mode. Check commands raise CheckFailed when a
measured value is outside its tolerance.
"""

import math
import statistics
from typing import Callable, Optional

import numpy as np

from sqrt_gaps import CheckFailed, numerics_logger, parallel
from sqrt_gaps.arith import (EmptyQSet, build_qset, gauss_sum_closed,
                             gauss_sum_direct, gauss_sum_row,
                             mod_inverse, phase_reduction_check, qset_ladder,
                             qset_phi_stats)
from sqrt_gaps.minorarc import (MinorArcMeasure, jutila_l2, residual_table,
                                restricted_void, smoothing_report)
from sqrt_gaps.models import RunConfig
from sqrt_gaps.moments import moment_compare
from sqrt_gaps.osc import fresnel_identity_check
from sqrt_gaps.seq import build_sequence, gap_report, void_gap_functional
from sqrt_gaps.testfn import TestFunctionSet, peak_bump, plateau_bump

LOGGER = numerics_logger(__name__)

Result = tuple[object, Optional[list[dict]]]

GAUSS_V_MAX = 200
GAUSS_DIRECT_V_MAX = 60
GAUSS_U_MAX = 400
GAUSS_C_MAX = 500
GAUSS_TOL = 1e-9
PHASE_SAMPLES = 1000
PHASE_Q_MAX = 10**4
PHASE_K_MAX = 4
VOID_LEVELS = (0.1, 0.5, 1.0, 2.0, 5.0)
VOID_TOL = 1e-12
FRESNEL_VS = (1.0, -1.0, 2.0, -2.0, 5.5, -5.5, 17.0, -17.0)
FRESNEL_TOL = 1e-6
JUTILA_RATIO_MAX = 10.0
PROP3_ARCS = 64
MOMENT_ARCS = 2048


def fresnel_bumps() -> dict:
    """Bumps with ramps broad enough for the transform side of the Fresnel identity."""
    return {
        'peak': peak_bump(-1.0, 1.0),
        'plateau': plateau_bump(0.5, 3.0, 1.0, 2.0),
    }


def random_admissible(rng: np.random.Generator,
                      q_max: int = PHASE_Q_MAX,
                      k_max: int = PHASE_K_MAX,
                      ) -> tuple[int, list[int], list[int]]:
    """
    A random (q, u, v) with q odd, every 4 u_i v_i coprime to q,
    and u_1 v_i = u_i v_1 (mod q).
    """
    while True:
        q = int(rng.integers(1, q_max // 2)) * 2 + 1
        v1 = int(rng.integers(1, 50))
        u1 = int(rng.integers(1, 50))
        if math.gcd(4 * u1 * v1, q) == 1:
            break
    k = int(rng.integers(1, k_max + 1))
    u, v = [u1], [v1]
    inv_v1 = mod_inverse(v1, q)
    while len(u) < k:
        vi = int(rng.integers(-50, 51))
        if vi == 0 or math.gcd(vi, q) != 1:
            continue
        ui = (u1 * vi * inv_v1) % q + q * int(rng.integers(-2, 2))
        if ui == 0:
            continue
        u.append(ui)
        v.append(vi)
    return q, u, v


def _closed_deviation(v: int) -> float:
    m = 4 * v
    if v <= GAUSS_DIRECT_V_MAX:
        row = np.array([gauss_sum_direct(1, b, m) for b in range(m)])
    else:
        row = gauss_sum_row(1, m)
    worst = 0.0
    for u in range(-GAUSS_U_MAX, GAUSS_U_MAX + 1):
        worst = max(worst, abs(gauss_sum_closed(u, v) - row[u % m]))
    return worst / math.sqrt(m)


def _vanishing_ratio(c: int) -> float:
    worst = 0.0
    b = np.arange(c)
    for a in range(1, c):
        d = math.gcd(a, c)
        if d == 1:
            continue
        row = gauss_sum_row(a, c)
        mask = b % d != 0
        if mask.any():
            worst = max(worst, float(np.abs(row[mask]).max()))
    return worst / c


def run_gaps(cfg: RunConfig) -> Result:
    seq = build_sequence(cfg.n, cfg.threads)
    report = gap_report(seq, cfg.bins, cfg.bin_max)
    rows = report.rows()
    LOGGER.info(f'Gaps N={cfg.n}: sup deviation {report.summary.sup_deviation:.3g}')
    return {'summary': report.summary, 'rows': rows}, rows


def run_void(cfg: RunConfig) -> Result:
    seq = build_sequence(cfg.n, cfg.threads)
    levels = sorted({*VOID_LEVELS, cfg.s})
    mu = None
    if cfg.restricted:
        tf = TestFunctionSet.from_params(cfg.function_params())
        mu = MinorArcMeasure(build_qset(cfg.delta, cfg.n, cfg.qset_mode, cfg.prime_floor), tf)

    rows = []
    for s in levels:
        void, overshoot = void_gap_functional(seq, s)
        row = {'s': s, 'void': void, 'overshoot': overshoot}
        if mu is not None:
            row['restricted'] = restricted_void(mu, seq, s, threads=cfg.threads)
        rows.append(row)

    mismatch = max(abs(r['void'] - r['overshoot']) for r in rows)
    results = {'rows': rows, 'max_mismatch': mismatch}
    if mu is not None:
        smoothing = smoothing_report(mu, seq, mu.tf, cfg.threads)
        results['smoothing'] = smoothing
        if not smoothing.holds:
            raise CheckFailed(f'smoothing bound failed at s={cfg.s:g}', results)
    if mismatch > VOID_TOL:
        raise CheckFailed(f'void identity mismatch {mismatch:.3g}', results)
    return results, rows


def run_gauss_check(cfg: RunConfig) -> Result:
    closed = parallel.chunked_map(_closed_deviation, range(1, GAUSS_V_MAX + 1), cfg.threads, chunk_size=8)
    vanishing = parallel.chunked_map(_vanishing_ratio, range(2, GAUSS_C_MAX + 1), cfg.threads, chunk_size=8)

    rng = np.random.default_rng(cfg.seed)
    residues = 0
    for _ in range(PHASE_SAMPLES):
        if phase_reduction_check(*random_admissible(rng)) != 0:
            residues += 1

    results = {
        'closed_max_deviation': max(closed),
        'vanishing_max_ratio': max(vanishing),
        'phase_samples': PHASE_SAMPLES,
        'phase_nonzero': residues,
        'tolerance': GAUSS_TOL,
    }
    LOGGER.info(f'Gauss sums: closed {results["closed_max_deviation"]:.3g}, '
                f'vanishing {results["vanishing_max_ratio"]:.3g}, phase residues {residues}')
    if max(closed) > GAUSS_TOL or max(vanishing) > GAUSS_TOL or residues:
        raise CheckFailed('Gauss sum sweep out of tolerance', results)
    return results, None


def run_fresnel_check(cfg: RunConfig) -> Result:
    rows = []
    for name, f in fresnel_bumps().items():
        for v in FRESNEL_VS:
            lhs, rhs = fresnel_identity_check(v, f)
            rows.append({
                'v': v,
                'bump': name,
                'lhs_re': lhs.real,
                'lhs_im': lhs.imag,
                'rhs_re': rhs.real,
                'rhs_im': rhs.imag,
                'deviation': abs(lhs - rhs),
            })
    worst = max(r['deviation'] for r in rows)
    results = {'rows': rows, 'max_deviation': worst}
    if worst > FRESNEL_TOL:
        raise CheckFailed(f'Fresnel deviation {worst:.3g}', results)
    return results, rows


def run_prop3_check(cfg: RunConfig) -> Result:
    tf = TestFunctionSet.from_params(cfg.function_params())
    qs = build_qset(cfg.delta, cfg.n, cfg.qset_mode, cfg.prime_floor)
    thetas = (0.0, cfg.theta) if cfg.theta else (0.0,)
    rows = residual_table(qs, tf, thetas, cfg.v_cap, cfg.u_cap, cfg.max_arcs or PROP3_ARCS, cfg.threads)
    residuals = [r['residual'] for r in rows]
    results = {
        'median_residual': statistics.median(residuals),
        'max_residual': max(residuals),
        'budget': cfg.budget,
        'rows': rows,
    }
    if results['median_residual'] > cfg.budget:
        raise CheckFailed(f'median residual {results["median_residual"]:.3g} above {cfg.budget:g}', results)
    return results, rows


def run_jutila(cfg: RunConfig) -> Result:
    tf = TestFunctionSet.from_params(cfg.function_params())
    ladder = qset_ladder(cfg.deltas or [cfg.delta], cfg.n, cfg.prime_floor, skip_empty=True)
    if not ladder:
        raise EmptyQSet(f'no moduli for any Delta at N={cfg.n}')
    rows = []
    for qs in ladder:
        report = jutila_l2(MinorArcMeasure(qs, tf), cfg.n, cfg.max_ell, cfg.threads)
        rows.append({
            'delta': report.delta,
            'lhs': report.lhs,
            'bound': report.bound,
            'ratio': report.ratio,
            'head': report.head,
            'tail': report.tail,
            'L': report.L,
        })
    worst = max(r['ratio'] for r in rows)
    results = {'rows': rows, 'max_ratio': worst}
    if worst > JUTILA_RATIO_MAX:
        raise CheckFailed(f'Jutila ratio {worst:.3g} above {JUTILA_RATIO_MAX:g}', results)
    return results, rows


def run_moments(cfg: RunConfig) -> Result:
    tf = TestFunctionSet.from_params(cfg.function_params())
    qs = build_qset(cfg.delta, cfg.n, cfg.qset_mode, cfg.prime_floor)
    report = moment_compare(cfg.n, cfg.delta, cfg.k, tf,
                            qset=qs,
                            v_cap=cfg.v_cap,
                            u_cap=cfg.u_cap,
                            t_cap=cfg.t_cap,
                            method=cfg.method,
                            max_arcs=cfg.max_arcs or MOMENT_ARCS,
                            threads=cfg.threads)
    # The first moment has no main term; its size is recorded only.
    if cfg.k > 1 and report.rel_error > cfg.tolerance:
        raise CheckFailed(f'moment rel_error {report.rel_error:.3g} above {cfg.tolerance:g}', report)
    return report, None


def run_qset(cfg: RunConfig) -> Result:
    qs = build_qset(cfg.delta, cfg.n, cfg.qset_mode, cfg.prime_floor)
    results = {'qset': qs.to_model(), 'phi_stats': qset_phi_stats(qs, 0.5)}
    return results, [{'q': q, 'a': a, 'b': b} for q, a, b in qs.members]


COMMANDS: dict[str, Callable[[RunConfig], Result]] = {
    'gaps': run_gaps,
    'void': run_void,
    'gauss-check': run_gauss_check,
    'fresnel-check': run_fresnel_check,
    'prop3-check': run_prop3_check,
    'jutila': run_jutila,
    'moments': run_moments,
    'qset': run_qset,
}
