import math

import numpy as np
import pytest

from finslerlab import expr as ex
from finslerlab import jet as J
from finslerlab.errors import ConvergenceFailure, DomainError, InputError, NavigationDegenerate, ZeroCovector, ZeroVector
from finslerlab.metric import (
    ConformalScale,
    EuclideanBase,
    RiemannianSpec,
    cartan_tensor,
    eval_F,
    fundamental_tensor,
    legendre,
    legendre_inverse,
    norm_squared,
)
from finslerlab.randers import navigate


# ---- jets -----------------------------------------------------------------

def test_jet_matches_closed_form_derivatives():
    x, y = J.variables([0.3, -0.7], 3)
    f = J.exp(x * y) * J.sin(x) + J.log(2.0 + J.cos(y)) / J.sqrt(1.0 + x * x)
    fx = lambda a, b: (b * math.exp(a * b) * math.sin(a) + math.exp(a * b) * math.cos(a)
                       - a * math.log(2 + math.cos(b)) / (1 + a * a) ** 1.5)
    assert f.value == pytest.approx(math.exp(-0.21) * math.sin(0.3) + math.log(2 + math.cos(-0.7)) / math.sqrt(1.09))
    assert f.partial(0) == pytest.approx(fx(0.3, -0.7), rel=1e-13)
    h = 1e-5
    fxy = (fx(0.3, -0.7 + h) - fx(0.3, -0.7 - h)) / (2 * h)
    assert f.partial(0, 1) == pytest.approx(fxy, rel=1e-8)


def test_jet_third_derivatives_match_symbolic():
    sp = pytest.importorskip("sympy")
    a, b = sp.symbols("a b")
    f = (a ** 3 * b - 2 * a * b ** 2) / (1 + a * a) + sp.exp(a / 2)
    at = {a: 0.4, b: 1.1}
    x, y = J.variables([0.4, 1.1], 3)
    d3 = J.derivatives((x ** 3 * y - 2 * x * y ** 2) / (1 + x * x) + J.exp(0.5 * x), [0, 1], 3)
    assert d3[0, 0, 0] == pytest.approx(float(sp.diff(f, a, 3).subs(at)), rel=1e-13)
    assert d3[0, 0, 1] == pytest.approx(float(sp.diff(f, a, 2, b).subs(at)), rel=1e-13)
    assert d3[0, 1, 0] == d3[1, 0, 0] == d3[0, 0, 1]


def test_jet_batches_broadcast():
    xs = J.variables([np.array([0.1, 0.2, 0.3])], 2)
    f = xs[0] ** 3
    np.testing.assert_allclose(f.partial(0, 0), 6 * np.array([0.1, 0.2, 0.3]))


def test_jet_matrix_inverse():
    a, b = J.variables([0.2, 0.5], 2)
    m = J.stack([[2.0 + a, b], [b, 3.0 + a * b]])
    inv = J.inverse(m)
    prod = J.matmul(m, inv)
    np.testing.assert_allclose(prod.c[..., 0], np.eye(2), atol=1e-14)
    np.testing.assert_allclose(prod.c[..., 1:], 0.0, atol=1e-13)


# ---- expressions ----------------------------------------------------------

def test_expression_parse_and_evaluate():
    e = ex.parse("log(2 + cos(pi * x1)) - x2**2 / 4 + exp(-x3)")
    x = [0.3, 0.8, -0.2]
    want = math.log(2 + math.cos(math.pi * 0.3)) - 0.16 + math.exp(0.2)
    assert ex.evaluate(e, x) == pytest.approx(want, rel=1e-15)
    assert ex.coords_used(e) == {0, 1, 2}


def test_expression_text_round_trip():
    e = ex.parse("sqrt(x1 * x2 + 1) - sin(x2) / (3 - x1)")
    assert ex.parse(ex.to_string(e)) == e


def test_negative_base_survives_printing():
    e = ex.parse("(-2) ** 2 + (-0.5) * x1")
    assert ex.evaluate(ex.parse(ex.to_string(e)), [2.0]) == ex.evaluate(e, [2.0]) == 3.0


@pytest.mark.parametrize("text,x", [("log(x1)", [-1.0]), ("sqrt(x1 - 2)", [1.0]), ("x1 ** -1", [0.0])])
def test_expression_domain_errors(text, x):
    with pytest.raises(DomainError):
        ex.evaluate(ex.parse(text), x)


@pytest.mark.parametrize("text", ["x0 + 1", "foo(x1)", "x1 ** x2", "lambda: 1", "x1 +"])
def test_expression_rejects_bad_input(text):
    with pytest.raises(InputError):
        ex.parse(text)


# ---- norm and tensors -----------------------------------------------------

def test_eval_F_examples(randers):
    assert eval_F(EuclideanBase(2), [0, 0], [3, 4]) == 5.0
    assert eval_F(randers, [0, 0, 0], [0, 0, 1.5]) == pytest.approx(1.0, rel=1e-15)
    y = np.array([0.3, -1.2, 0.5])
    assert eval_F(randers, [0, 0, 0], 2 * y) == pytest.approx(2 * eval_F(randers, [0, 0, 0], y), rel=1e-15)


def test_eval_F_errors(randers):
    with pytest.raises(NavigationDegenerate):
        eval_F(navigate(3, [0, 0, 1.0]), [0, 0, 0], [1, 0, 0])
    with pytest.raises(ZeroVector):
        eval_F(randers, [0, 0, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        eval_F(ConformalScale(EuclideanBase(2), ex.parse("log(x1)")), [-1, 0], [1, 0])


def test_fundamental_tensor_examples(randers, conformal):
    np.testing.assert_allclose(fundamental_tensor(EuclideanBase(3), [1, 2, 3], [0.3, 0.1, -2]).g, np.eye(3), atol=1e-15)
    g = fundamental_tensor(randers, [0, 0, 0], [0, 0, 1.5]).g
    np.testing.assert_allclose(g, np.diag([2 / 3, 2 / 3, 4 / 9]), atol=1e-15)
    # conformal scaling multiplies g by e^{2 rho}
    x, y = np.array([0.3, 0.7, 0.1]), np.array([0.2, -0.4, 1.0])
    rho = float(np.sum(np.log(2 + np.cos(np.pi * x[:2]))))
    np.testing.assert_allclose(fundamental_tensor(conformal.metric, x, y).g,
                               math.exp(2 * rho) * fundamental_tensor(randers, x, y).g, rtol=1e-13)


def test_fundamental_tensor_identities(conformal, rng):
    for _ in range(20):
        x, y = rng.uniform(-2, 2, 3), rng.normal(size=3)
        t = fundamental_tensor(conformal.metric, x, y)
        np.testing.assert_allclose(t.g @ t.g_inv, np.eye(3), atol=1e-12)
        F = eval_F(conformal.metric, x, y)
        assert y @ t.g @ y == pytest.approx(F * F, rel=1e-12)
        assert t.det_g > 0


def test_fundamental_tensor_matches_finite_differences(conformal, rng):
    for _ in range(10):
        x, y = rng.uniform(-2, 2, 3), rng.normal(size=3)
        scale = np.max(np.abs(y))
        # fourth root: the roundoff-optimal step for a second difference
        h = np.finfo(float).eps ** (1 / 4) * scale
        half_e = lambda v: 0.5 * float(norm_squared(conformal.metric, list(x), list(v)))
        fd = np.empty((3, 3))
        for i, ei in enumerate(np.eye(3) * h):
            for j, ej in enumerate(np.eye(3) * h):
                fd[i, j] = (half_e(y + ei + ej) - half_e(y + ei - ej) - half_e(y - ei + ej)
                            + half_e(y - ei - ej)) / (4 * h * h)
        g = fundamental_tensor(conformal.metric, x, y).g
        assert np.max(np.abs(fd - g)) / np.max(np.abs(g)) < 1e-6


def test_cartan_tensor(conformal, rng):
    assert np.max(np.abs(cartan_tensor(EuclideanBase(3), [0, 0, 0], [1, 2, 3]).C)) < 1e-15
    x = np.array([0.3, 0.7, 0.0])
    assert np.max(np.abs(cartan_tensor(conformal.metric, x, conformal.normal(x)).C)) < 1e-12
    x, y = rng.uniform(-2, 2, 3), rng.normal(size=3)
    ct = cartan_tensor(conformal.metric, x, y)
    assert np.max(np.abs(ct.C @ y)) < 1e-12
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        np.testing.assert_allclose(ct.C, ct.C.transpose(perm), atol=1e-14)
    np.testing.assert_allclose(ct.I, np.einsum("ij,ijk->k", fundamental_tensor(conformal.metric, x, y).g_inv, ct.C))


def test_legendre_inverse_examples(randers):
    y, dual = legendre_inverse(EuclideanBase(3), [0, 0, 0], [1, 0, 0])
    np.testing.assert_allclose(y, [1, 0, 0], atol=1e-14)
    assert dual == pytest.approx(1.0)
    y, dual = legendre_inverse(randers, [0, 0, 0], [0, 0, 2 / 3])
    np.testing.assert_allclose(y, [0, 0, 1.5], atol=1e-12)
    assert dual == pytest.approx(1.0, rel=1e-12)
    _, dual = legendre_inverse(randers, [0, 0, 0], [0, 0, 1])
    assert dual == pytest.approx(1.5, rel=1e-12)


def test_legendre_round_trips(conformal, rng):
    for _ in range(20):
        x, y = rng.uniform(-2, 2, 3), rng.normal(size=3)
        xi = legendre(conformal.metric, x, y)
        back, _ = legendre_inverse(conformal.metric, x, xi)
        np.testing.assert_allclose(back, y, rtol=0, atol=1e-10 * np.max(np.abs(y)))
        xi2 = rng.normal(size=3)
        y2, _ = legendre_inverse(conformal.metric, x, xi2)
        np.testing.assert_allclose(legendre(conformal.metric, x, y2), xi2, atol=1e-10 * np.max(np.abs(xi2)))


def test_legendre_errors(randers):
    with pytest.raises(ZeroCovector):
        legendre_inverse(randers, [0, 0, 0], [0, 0, 0])
    with pytest.raises(ConvergenceFailure) as info:
        legendre_inverse(randers, [0, 0, 0], [0.3, 0.2, 1.0], max_iter=0)
    assert info.value.context["residual"] > 0


def test_riemannian_spec_validation():
    with pytest.raises(InputError):
        RiemannianSpec(2, ((1.0, 0.1), (0.2, 1.0)))
    with pytest.raises(InputError):
        EuclideanBase(1)
    with pytest.raises(InputError):
        navigate(2, [0.1, 0.0, 0.0])
