import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentode.dual import (
    eval_with_derivs,
    exp,
    log,
    seed_dual1,
    sqrt,
    value,
)
from momentode.errors import NonFiniteOutputError
from momentode.models import Logistic

SMALL = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def test_product_example():
    d = eval_with_derivs(lambda th: th[0] * th[1], [2.0, 3.0])
    assert d.value[0] == 6.0
    assert np.array_equal(d.grad[0], [3.0, 2.0])
    assert np.array_equal(d.hess[0], [[0.0, 1.0], [1.0, 0.0]])


def test_affine_has_zero_hessian():
    d = eval_with_derivs(lambda th: 2.0 * th[0] - 3.0 * th[1] + 1.0, [0.3, -0.7])
    assert not d.hess.any()
    assert np.array_equal(d.grad[0], [2.0, -3.0])


@settings(max_examples=40, deadline=None)
@given(SMALL, SMALL, SMALL, SMALL)
def test_polynomial_product_and_chain_rules(a, b, x, y):
    # f = (a x + y^2)(b y + x^3): symbolic derivatives below are exact
    def f(th):
        return (a * th[0] + th[1] ** 2) * (b * th[1] + th[0] ** 3)

    d = eval_with_derivs(f, [x, y])
    u, v = a * x + y * y, b * y + x**3
    fx = a * v + u * 3 * x**2
    fy = 2 * y * v + u * b
    fxx = 2 * a * 3 * x**2 + u * 6 * x
    fxy = a * b + 2 * y * 3 * x**2
    fyy = 2 * v + 2 * y * b * 2
    assert np.allclose(d.value, [u * v], rtol=1e-12, atol=1e-12)
    assert np.allclose(d.grad[0], [fx, fy], rtol=1e-10, atol=1e-10)
    assert np.allclose(d.hess[0], [[fxx, fxy], [fxy, fyy]], rtol=1e-10, atol=1e-10)


def test_transcendental_chain():
    def f(th):
        return exp(th[0]) * log(th[1]) + sqrt(th[1])

    x, y = 0.4, 2.5
    d = eval_with_derivs(f, [x, y])
    assert np.isclose(d.value[0], np.exp(x) * np.log(y) + np.sqrt(y))
    assert np.isclose(d.grad[0, 0], np.exp(x) * np.log(y))
    assert np.isclose(d.grad[0, 1], np.exp(x) / y + 0.5 / np.sqrt(y))
    assert np.isclose(d.hess[0, 1, 1], -np.exp(x) / y**2 - 0.25 * y**-1.5)
    assert np.isclose(d.hess[0, 0, 1], np.exp(x) / y)


def _fd_grad_hess(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    m = len(theta)
    f0 = f(theta)
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    for i in range(m):
        hi = h * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += hi
        dn[i] -= hi
        grad[i] = (f(up) - f(dn)) / (2 * hi)
        hess[i, i] = (f(up) - 2 * f0 + f(dn)) / hi**2
    for i in range(m):
        for j in range(i + 1, m):
            hi = h * max(1.0, abs(theta[i]))
            hj = h * max(1.0, abs(theta[j]))
            pp, pm, mp, mm = (theta.copy() for _ in range(4))
            pp[[i, j]] += [hi, hj]
            pm[[i, j]] += [hi, -hj]
            mp[[i, j]] += [-hi, hj]
            mm[[i, j]] += [-hi, -hj]
            hess[i, j] = hess[j, i] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * hi * hj)
    return grad, hess


def test_logistic_derivatives_match_finite_differences():
    model = Logistic()
    theta = [50.0, 1.0, 300.0]
    t = 10.0
    d = eval_with_derivs(lambda th: model.raw_columns(th, (t,))[0], theta)

    def f(th):
        return float(np.asarray(model.raw_columns(list(th), (t,))[0])[0])

    grad, hess = _fd_grad_hess(f, theta)
    assert np.allclose(d.grad[0], grad, rtol=1e-6, atol=1e-8)
    assert np.allclose(d.hess[0], hess, rtol=1e-4, atol=1e-5)


def test_hessian_symmetry():
    model = Logistic()
    d = eval_with_derivs(
        lambda th: model.raw_columns(th, (2.0, 5.0, 9.0))[0], [50.0, 1.0, 300.0]
    )
    asym = np.abs(d.hess - np.swapaxes(d.hess, 1, 2))
    assert asym.max() <= 1e-10 * (1 + np.abs(d.hess).max())


def test_nonfinite_raises_with_index_and_theta():
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(
        NonFiniteOutputError
    ) as e:
        eval_with_derivs(lambda th: 1.0 / (th[0] - 2.0), [2.0])
    assert e.value.index == 0
    assert e.value.theta == [2.0]


def test_active_subset_restricts_directions():
    d = eval_with_derivs(lambda th: th[0] * th[1] + th[2], [1.0, 2.0, 3.0], active=(1,))
    assert d.grad.shape == (1, 1)
    assert d.grad[0, 0] == 1.0  # d/d(theta_1) of theta_0*theta_1
    assert d.active == (1,)


def test_dual1_arithmetic_and_value():
    a, b = seed_dual1([0.7, -0.2])
    y = (a * b + a.exp()) / (1.0 + b * b)
    h = 1e-7
    ref = lambda x, z: (x * z + np.exp(x)) / (1.0 + z * z)
    g0 = (ref(0.7 + h, -0.2) - ref(0.7 - h, -0.2)) / (2 * h)
    g1 = (ref(0.7, -0.2 + h) - ref(0.7, -0.2 - h)) / (2 * h)
    assert np.isclose(y.val, ref(0.7, -0.2), rtol=1e-12)
    assert np.allclose(y.grad, [g0, g1], rtol=1e-6)
    assert value(y) == y.val


def test_dual1_inside_dual2():
    # second-order sweep whose coefficients carry first-order duals
    (s,) = seed_dual1([1.5])

    def f(th):
        return th[0] * th[0] * s

    d = eval_with_derivs(f, [2.0])
    assert value(d.value[0]) == 6.0
    assert np.isclose(value(d.grad[0, 0]), 6.0)  # 2*x*s at x=2, s=1.5
    assert np.isclose(d.value[0].grad[0], 4.0)  # d/ds of x^2 s
    assert np.isclose(d.grad[0, 0].grad[0], 4.0)  # d/ds of 2 x s
    assert np.isclose(d.hess[0, 0, 0].grad[0], 2.0)  # d/ds of 2 s
