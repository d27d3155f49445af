"""
Tests sqrt_gaps.osc
"""

import numpy as np
import pytest

from sqrt_gaps import checks, osc

XI = np.array([-1.3, -0.2, 0.0, 0.4, 2.0])
ETA = np.array([-15.0, 0.0, 7.0, 3.0, 20.0])


@pytest.fixture(scope='module')
def kernel(relaxed_tf) -> osc.FKernel:
    return osc.FKernel(relaxed_tf)


def test_kernel_errors(relaxed_tf):
    with pytest.raises(ValueError):
        osc.FKernel(relaxed_tf, abs_tol=1e-13)
    with pytest.raises(ValueError):
        osc.FKernel(relaxed_tf, theta=float('inf'))


def test_with_theta(kernel):
    shifted = kernel.with_theta(0.004)
    assert shifted.theta == 0.004
    assert shifted.phi_hat is kernel.phi_hat
    assert shifted.shifted_eta(2.0, 1.0) == pytest.approx(1.0 - 4 * 2.0 * 0.004)


def test_zero_frequency(kernel, relaxed_tf):
    # F(0, 0) = Phi^(0) int x V(x^2) dx = mass / 2
    assert abs(osc.f_eval(kernel, 0.0, 0.0) - relaxed_tf.mass / 2) < 1e-9


def test_conjugation(kernel):
    k = kernel.with_theta(0.003)
    pos = osc.f_values(k, XI, ETA)
    neg = osc.f_values(k, -XI, -ETA)
    assert np.max(np.abs(neg - np.conj(pos))) < 1e-9


def test_memo(kernel):
    memo = osc.f_values(kernel, XI, ETA)
    exact = osc.f_values(kernel, XI, ETA, memo=False)
    assert np.max(np.abs(memo - exact)) < 1e-9


def test_batch(kernel):
    k = kernel.with_theta(-0.002)
    adaptive = osc.f_values(k, XI, ETA)
    batch = osc.f_batch(k, XI, ETA)
    assert np.max(np.abs(batch - adaptive)) < 1e-8
    assert len(osc.f_batch(k, [], [])) == 0


def test_batch_strict(strict_tf):
    k = osc.FKernel(strict_tf)
    xi = np.array([0.5, 1.1, 1.1])
    eta = np.array([1.0, -4.0, 9.0])
    assert np.max(np.abs(osc.f_batch(k, xi, eta) - osc.f_values(k, xi, eta))) < 1e-8


def test_w_hat(relaxed_tf):
    assert abs(osc.w_hat(relaxed_tf, 0.0) - relaxed_tf.V.integral / 2) < 1e-8

    weight = osc.RadialWeight(relaxed_tf.V)
    assert weight(np.array([-1.0, 0.0])).tolist() == [0.0, 0.0]
    assert weight(1.2) == pytest.approx(1.2 * relaxed_tf.V(1.44))


@pytest.mark.parametrize('v', [1.0, -2.0, 5.5])
@pytest.mark.parametrize('name', ['peak', 'plateau'])
def test_fresnel_identity(name, v):
    f = checks.fresnel_bumps()[name]
    lhs, rhs = osc.fresnel_identity_check(v, f)
    assert abs(lhs - rhs) < 1e-6

    conj_lhs, _ = osc.fresnel_identity_check(-v, f)
    assert abs(conj_lhs - np.conj(lhs)) < 1e-9


def test_fresnel_errors(strict_tf):
    f = checks.fresnel_bumps()['peak']
    with pytest.raises(ValueError):
        osc.fresnel_identity_check(0.0, f)
    with pytest.raises(ValueError):
        osc.fresnel_identity_check(1.0, strict_tf.V)


def test_decay_probe(kernel):
    k = kernel.with_theta(0.003)
    report = osc.decay_probe(k, 'xi', 2, np.linspace(-4, 4, 17))
    assert report.order == 2
    assert report.points == 17
    assert report.sup > 0
    assert -4 <= report.argsup <= 4

    # Only |eta| > 50 |xi theta| = 0.15 counts
    gated = osc.decay_probe(k, 'eta', 3, [-0.1, 0.1, 1.0, 10.0], fixed=1.0)
    assert gated.points == 2
    assert abs(gated.argsup) >= 1.0

    empty = osc.decay_probe(k, 'eta', 3, [0.05], fixed=1.0)
    assert empty.points == 0
    assert empty.sup == 0.0

    with pytest.raises(ValueError):
        osc.decay_probe(k, 'xi', 9, [1.0])
