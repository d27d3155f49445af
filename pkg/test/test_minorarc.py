"""
Tests sqrt_gaps.minorarc
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from sqrt_gaps import arith, minorarc, quadrature, seq, testfn, testing
from sqrt_gaps.arith import FareyPoint, QSet
from sqrt_gaps.osc import FKernel
from sqrt_gaps.testfn import plateau_bump

TESTED = minorarc.__name__


@pytest.fixture(scope='module')
def mu(desk_qset, strict_tf) -> minorarc.MinorArcMeasure:
    return minorarc.MinorArcMeasure(desk_qset, strict_tf)


def one_prime_qset(p: int, N: int) -> QSet:
    return QSet(Delta=1.0, N=N, mode='desk', prime_floor=3, a_band=None, members=((p, p, 1),))


def test_theta_rule(strict_tf):
    t, w = minorarc.theta_rule(strict_tf.phi)
    assert len(t) == len(w) == 64
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.all(w > 0)
    assert np.all((t > strict_tf.phi.lo) & (t < strict_tf.phi.hi))
    assert len(minorarc.theta_rule(strict_tf.phi, 8)[0]) == 8

    with pytest.raises(ValueError):
        minorarc.theta_rule(strict_tf.phi, 30)


def test_select_arcs(desk_qset):
    L = desk_qset.L
    arcs, weights = minorarc.select_arcs(desk_qset)
    assert arcs == list(desk_qset.arcs())
    assert np.all(weights == 1 / L)

    arcs, weights = minorarc.select_arcs(desk_qset, 40)
    assert 8 <= len(arcs) < 60
    assert math.fsum(weights) == pytest.approx(1.0, abs=1e-12)
    for q in desk_qset.moduli:
        share = math.fsum(w for fp, w in zip(arcs, weights) if fp.q == q)
        assert share == pytest.approx(arith.euler_phi(q) / L, abs=1e-14)
    assert all(math.gcd(a, q) == 1 for a, q in arcs)


def test_measure(mu, desk_qset):
    assert mu.L == desk_qset.L
    assert mu.N == 10**4
    assert len(mu.arcs) == len(mu.centers) == desk_qset.L
    assert mu.refined(16).thetas.shape == (16,)

    with pytest.raises(arith.EmptyQSet):
        minorarc.MinorArcMeasure(replace(desk_qset, members=()), mu.tf)


def test_measure_integrate(mu):
    def f(x):
        return np.sin(2 * np.pi * x)**2

    def g(x):
        return f(x) + 0.1

    assert minorarc.measure_integrate(mu, np.ones_like) == pytest.approx(1.0, abs=1e-12)

    If = minorarc.measure_integrate(mu, f)
    Ig = minorarc.measure_integrate(mu, g)
    assert If <= Ig
    assert Ig == pytest.approx(If + 0.1, abs=1e-12)
    assert minorarc.measure_integrate(mu, lambda x: 2 * f(x) + g(x)) == pytest.approx(2 * If + Ig, abs=1e-12)

    # Thread count does not change the result
    assert minorarc.measure_integrate(mu, f, threads=3) == If


def test_restricted_void(mu, desk_seq, rng):
    exact = minorarc.restricted_void(mu, desk_seq, 1.0)
    assert 0 < exact < 1

    estimate, stderr = testing.void_monte_carlo(mu, desk_seq, 1.0, rng)
    assert abs(exact - estimate) < 4 * stderr + 1e-9

    rule = minorarc.restricted_void(mu, desk_seq, 1.0, method='quadrature')
    assert abs(rule - exact) < 0.05


def test_restricted_void_limits(mu, desk_seq):
    assert minorarc.restricted_void(mu, desk_seq, desk_seq.N * desk_seq.max_gap * 1.001) == 0.0
    assert minorarc.restricted_void(mu, desk_seq, 1e-6) == pytest.approx(1.0, abs=1e-4)

    wider = [minorarc.restricted_void(mu, desk_seq, s) for s in (0.5, 1.0, 2.0)]
    assert wider[0] >= wider[1] >= wider[2]

    with pytest.raises(ValueError):
        minorarc.restricted_void(mu, desk_seq, 0.0)


def test_smoothed_void(mu, strict_tf, rng):
    N = mu.N
    exact = minorarc.smoothed_void(mu, strict_tf, N)
    xs = testing.sample_measure(mu, rng, 4000)
    hits = np.array([seq.r_direct(N, strict_tf, float(x)) < minorarc.ZERO_THRESHOLD for x in xs])
    stderr = max(hits.std(ddof=1), 1e-3) / math.sqrt(len(xs))
    assert abs(exact - hits.mean()) < 4 * stderr


def test_smoothed_void_wide(mu, strict_tf):
    fracs, _ = seq.weighted_points(mu.N, strict_tf.V)
    widest = max(np.diff(fracs).max(), 1 - fracs[-1] + fracs[0])
    W = mu.N * widest + 2
    wide = replace(strict_tf, Phi=plateau_bump(0.0, W, 1.0, W - 1))
    assert minorarc.smoothed_void(mu, wide, mu.N) == 0.0


def test_bracket_test_functions(strict_tf):
    inner, outer = minorarc.bracket_test_functions(strict_tf)
    x = np.linspace(-0.1, 1.2, 200)
    assert np.all(inner.Phi(x) <= strict_tf.Phi(x))
    assert np.all(strict_tf.Phi(x) <= outer.Phi(x) + 1e-15)
    assert inner.Phi.support == (0.0, 1.0)
    assert outer.V.support == pytest.approx(strict_tf.V.support)

    with pytest.raises(ValueError):
        minorarc.bracket_test_functions(replace(strict_tf, s=0.005))


def test_bracket_order(mu, desk_seq, strict_tf):
    inner, outer = minorarc.bracket_test_functions(strict_tf)
    restricted = minorarc.restricted_void(mu, desk_seq, strict_tf.s)
    assert minorarc.smoothed_void(mu, inner, mu.N) >= restricted - 1e-12
    assert restricted >= minorarc.smoothed_void(mu, outer, mu.N) - 1e-12


@pytest.mark.parametrize('s', [0.5, 1.0, 2.0])
def test_smoothing_report(s):
    tf = testfn.default_test_functions(s=s)
    N = 10**5
    mu = minorarc.MinorArcMeasure(arith.build_qset(1.5, N), tf)
    report = minorarc.smoothing_report(mu, seq.build_sequence(N), tf)
    assert report.n == N
    assert report.s == s
    assert report.bound == pytest.approx(8 * (1 + s) * tf.eta)
    assert report.difference == pytest.approx(abs(report.restricted - report.smoothed))
    assert report.holds


@pytest.mark.slow
@pytest.mark.parametrize('s', [0.5, 1.0, 2.0])
def test_smoothing_report_large(s):
    tf = testfn.default_test_functions(s=s)
    N = 10**6
    mu = minorarc.MinorArcMeasure(arith.build_qset(1.5, N), tf)
    assert minorarc.smoothing_report(mu, seq.build_sequence(N), tf).holds


@pytest.mark.parametrize('s', [0.5, 1.0, 2.0])
def test_bracket_pointwise(desk_seq, s):
    tf = testfn.default_test_functions(s=s)
    inner, outer = minorarc.bracket_test_functions(tf)
    N = desk_seq.N
    xs = np.linspace(0.0, 1.0, 2000, endpoint=False) + 1 / (7 * math.pi * N)
    counts = seq.count_in_windows(desk_seq, xs, s)
    lower = np.array([seq.r_direct(N, inner, x) for x in xs])
    upper = np.array([seq.r_direct(N, outer, x) for x in xs])
    assert np.all(lower <= counts + 1e-9)
    assert np.all(counts <= upper + 1e-9)
    assert np.any(lower < counts)
    assert np.any(counts > 0)


def test_bset_terms():
    fp = FareyPoint(2, 9)
    phase, xi, eta = minorarc.bset_terms(fp, 10**4, 1.0, v_cap=30, u_cap=4)
    pairs = arith.enumerate_bset(fp, 1.0, 30, 4)
    assert len(phase) == len(pairs)
    assert np.allclose(np.abs(phase), 1.0)
    assert xi.tolist() == [p.v / 100 for p in pairs]
    assert eta == pytest.approx([2 * p.u * 100 / 9 for p in pairs])


def test_r_tilde_naive(relaxed_tf):
    fp = FareyPoint(5, 161)
    N, theta = 10**4, 0.004
    pairs = arith.enumerate_bset(fp, 1.5, 300, 5)
    assert pairs

    k = FKernel(relaxed_tf).with_theta(theta)
    fast = minorarc.r_tilde(fp, k, N, 1.5, v_cap=300, u_cap=5)
    slow = testing.naive_r_tilde(fp, relaxed_tf, N, theta, pairs)
    assert fast == pytest.approx(slow, abs=1e-6)

    nodes = minorarc.r_tilde_nodes(fp, k, N, 1.5, [0.0, theta], v_cap=300, u_cap=5)
    assert nodes[1] == pytest.approx(fast, abs=1e-9)


def test_r_tilde_empty(relaxed_tf):
    # u_cap=0 leaves no pairs
    k = FKernel(relaxed_tf)
    assert minorarc.r_tilde_nodes(FareyPoint(1, 3), k, 10**4, 1.0, [0.0, 0.001], v_cap=10, u_cap=0).tolist() == [0, 0]


def test_symmetry_violation(mocker, relaxed_tf):
    mocker.patch(TESTED + '.bset_terms', return_value=(np.array([1j]), np.array([0.0]), np.array([0.0])))
    with pytest.raises(minorarc.SymmetryViolation) as exc_info:
        minorarc.r_tilde(FareyPoint(1, 7), FKernel(relaxed_tf), 10**4, 1.0)
    assert exc_info.value.residue > 0.5


@pytest.mark.parametrize('a', [1, 17, 75])
@pytest.mark.parametrize('theta', [0.0, 4e-7])
def test_prime_modulus_formula(relaxed_tf, a, theta):
    # The B-set leaves out the u = 0 pairs v = +-151 m, at xi = 1.51 m where F(xi, 0) is not yet negligible
    N, v_cap = 10**4, 1000
    fp = FareyPoint(a, 151)
    direct, formula = minorarc.prop3_terms(fp, relaxed_tf, N, theta, 1.51, v_cap=v_cap, u_cap=60)
    omitted = testing.zero_u_terms(fp, relaxed_tf, N, N * theta, v_cap)
    assert abs(omitted) > 1e-3
    assert abs(direct - formula) < 2 * abs(omitted) + 1e-3
    assert abs(direct - formula - omitted) < abs(omitted)


def v_cap_ladder_medians(N: int, tf, max_arcs: int) -> list[float]:
    qs = arith.build_qset(1.5, N)
    root = math.isqrt(N)
    medians = []
    for v_cap in (root // 8, root // 4, root // 2):
        rows = minorarc.residual_table(qs, tf, (0.0,), v_cap=v_cap, max_arcs=max_arcs)
        assert len(rows) >= 50
        medians.append(float(np.median([r['residual'] for r in rows])))
    return medians


def test_residual_v_cap_ladder(relaxed_tf):
    medians = v_cap_ladder_medians(10**4, relaxed_tf, 64)
    assert medians[0] > medians[1] > medians[2]


@pytest.mark.slow
def test_residual_v_cap_ladder_large(relaxed_tf):
    medians = v_cap_ladder_medians(10**6, relaxed_tf, 64)
    assert medians[0] > medians[1] > medians[2]


def test_prop3_residual(relaxed_tf):
    fp = FareyPoint(17, 151)
    kernel = FKernel(relaxed_tf)
    direct, formula = minorarc.prop3_terms(fp, relaxed_tf, 10**4, 0.0, 1.51,
                                           v_cap=1000, u_cap=60, kernel=kernel)
    residual = minorarc.prop3_residual(fp, relaxed_tf, 10**4, 0.0, 1.51,
                                       v_cap=1000, u_cap=60, kernel=kernel)
    assert residual == abs(direct - formula)


def test_prop3_errors(relaxed_tf):
    with pytest.raises(ValueError):
        minorarc.prop3_terms(FareyPoint(1, 151), relaxed_tf, 10**4, 2e-6, 1.5)
    with pytest.raises(ValueError):
        minorarc.prop3_residual(FareyPoint(1, 151), relaxed_tf, 10**4, -2e-6, 1.5)


def test_residual_table(desk_qset, relaxed_tf):
    N = desk_qset.N
    rows = minorarc.residual_table(desk_qset, relaxed_tf, (0.0, 0.004 / N), max_arcs=4, threads=2)
    arcs, _ = minorarc.select_arcs(desk_qset, 4)
    assert len(rows) == 2 * len(arcs)
    assert list(rows[0].keys()) == ['q', 'a', 'theta', 'r_direct', 'r_formula', 'residual']
    for row in rows:
        assert row['residual'] == abs(row['r_direct'] - row['r_formula'])
        assert math.gcd(row['a'], row['q']) == 1


def test_jutila_one_prime(strict_tf):
    N, p = 1000, 101
    qs = one_prime_qset(p, N)
    mu = minorarc.MinorArcMeasure(qs, strict_tf)
    report = minorarc.jutila_l2(mu, N, max_ell=1000 * N)

    phi = strict_tf.phi
    energy, _ = quadrature.integrate(lambda x: phi(x)**2, phi.breakpoints, abs_tol=1e-12)
    expected = N * float(energy) / (p - 1) - 1
    assert report.lhs == pytest.approx(expected, rel=1e-6)
    assert report.lhs == pytest.approx(testing.jutila_direct(qs, phi, N), rel=1e-6)
    assert report.lhs == report.head + report.tail
    assert report.L == p - 1
    assert report.members == 1
    assert report.ratio == pytest.approx(report.lhs / report.bound)


def test_jutila_errors(strict_tf):
    N = 1000
    mu = minorarc.MinorArcMeasure(one_prime_qset(101, N), strict_tf)
    with pytest.raises(minorarc.TruncationTooCoarse) as exc_info:
        minorarc.jutila_l2(mu, N, max_ell=N)
    assert exc_info.value.tail > exc_info.value.head * minorarc.JUTILA_TAIL_LIMIT

    with pytest.raises(ValueError):
        minorarc.jutila_l2(mu, N, max_ell=N - 1)


def test_phi_count(desk_qset):
    assert minorarc.phi_count(desk_qset) == desk_qset.L == 1496
