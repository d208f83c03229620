"""Randomized property checks (hypothesis, derandomized via the conftest profile)."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerlab import config as C
from finslerlab import expr as ex
from finslerlab.counterexample import build_paper_metric
from finslerlab.geodesics import integrate_geodesics
from finslerlab.metric import cartan_tensor, eval_F, fundamental_tensor, legendre, legendre_inverse
from finslerlab.spray import ricci, s_curvature, spray

EXAMPLES = settings(max_examples=100)
METRICS = {b: build_paper_metric(3, b).metric for b in (0.0, 0.3, 0.5, 0.9)}

coord = st.floats(-2, 2, allow_nan=False)
points = st.tuples(coord, coord, coord).map(np.array)
directions = st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3).map(np.array).filter(
    lambda y: np.linalg.norm(y) > 1e-2)
winds = st.sampled_from(sorted(METRICS))
scales = st.floats(0.1, 10)


@EXAMPLES
@given(winds, points, directions, scales)
def test_norm_and_tensors_are_homogeneous(b, x, y, lam):
    m = METRICS[b]
    assert eval_F(m, x, lam * y) == pytest.approx(lam * eval_F(m, x, y), rel=1e-12)
    np.testing.assert_allclose(fundamental_tensor(m, x, lam * y).g, fundamental_tensor(m, x, y).g,
                               rtol=1e-10, atol=1e-12 * np.exp(2 * 2 * np.log(3)))


@EXAMPLES
@given(winds, points, directions)
def test_fundamental_tensor_reproduces_the_norm(b, x, y):
    m = METRICS[b]
    t = fundamental_tensor(m, x, y)
    assert y @ t.g @ y == pytest.approx(eval_F(m, x, y) ** 2, rel=1e-12)
    assert np.all(np.linalg.eigvalsh(t.g) > 0)


@EXAMPLES
@given(winds, points, directions)
def test_legendre_round_trip(b, x, y):
    m = METRICS[b]
    back, dual = legendre_inverse(m, x, legendre(m, x, y))
    np.testing.assert_allclose(back, y, atol=1e-10 * np.max(np.abs(y)))
    assert dual == pytest.approx(eval_F(m, x, y), rel=1e-10)


@EXAMPLES
@given(winds, points, directions)
def test_cartan_tensor_annihilates_y(b, x, y):
    C_ = cartan_tensor(METRICS[b], x, y).C
    assert np.max(np.abs(C_ @ y)) <= 1e-12 * max(1.0, np.max(np.abs(C_)) * np.max(np.abs(y)))


@EXAMPLES
@given(winds, points, directions, scales)
def test_spray_ricci_and_s_homogeneity(b, x, y, lam):
    m = METRICS[b]
    sd = spray(m, x, y)
    np.testing.assert_allclose(spray(m, x, lam * y).G, lam ** 2 * sd.G, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(sd.N @ y, 2 * sd.G, atol=1e-12 * max(1.0, np.max(np.abs(sd.G))))
    r = ricci(m, x, y)
    assert ricci(m, x, lam * y) == pytest.approx(lam ** 2 * r, rel=1e-9, abs=1e-12)
    s = s_curvature(m, x, y)
    assert s_curvature(m, x, lam * y) == pytest.approx(lam * s, rel=1e-9, abs=1e-12)


@EXAMPLES
@given(st.sampled_from([0.3, 0.5]), st.tuples(coord, coord).map(np.array), directions,
       st.sampled_from(["flip", "shift"]))
def test_geodesics_respect_the_lattice_symmetries(b, xa, y, kind):
    m = METRICS[b]
    x = np.array([*xa, 0.0])
    y = y / eval_F(m, x, y)
    if kind == "flip":
        sym = move = lambda p: p * np.array([-1.0, 1.0, 1.0])
    else:
        sym = lambda p: p
        move = lambda p: p + np.array([2.0, 0.0, 0.0])
    # both curves in one batch so they share a step sequence
    _, X, V = integrate_geodesics(m, [x, move(x)], [y, sym(y)], 0.2, 1e-10, t_eval=np.linspace(0, 0.2, 5))
    np.testing.assert_allclose(X[:, 1], move(X[:, 0]), atol=1e-8)
    F = eval_F(m, X[:, 0], V[:, 0])
    assert np.ptp(F) <= 10 * 1e-10


leaves = st.one_of(st.sampled_from(["x1", "x2", "x3", "pi"]),
                   st.floats(-5, 5, allow_nan=False).map(lambda v: f"{v:.6g}"))
formulas = st.recursive(
    leaves,
    lambda sub: st.one_of(
        st.tuples(sub, sub).map(lambda p: f"({p[0]} + {p[1]})"),
        st.tuples(sub, sub).map(lambda p: f"({p[0]} - {p[1]})"),
        st.tuples(sub, sub).map(lambda p: f"({p[0]} * {p[1]})"),
        sub.map(lambda a: f"sin({a})"),
        sub.map(lambda a: f"cos({a})"),
        sub.map(lambda a: f"({a}) ** 2"),
    ),
    max_leaves=8,
)


@EXAMPLES
@given(formulas, points)
def test_expression_text_round_trip(text, x):
    e = ex.parse(text)
    again = ex.parse(ex.to_string(e))
    assert again == e
    assert ex.evaluate(again, list(x)) == ex.evaluate(e, list(x))


@EXAMPLES
@given(st.floats(0, 0.9), st.floats(-0.2, 0.2), formulas, points, directions)
def test_metric_json_round_trip(b, w, rho, x, y):
    doc = {"type": "conformal", "rho": f"0.1 * sin({rho})",
           "inner": {"type": "randers_navigation", "base": {"dim": 3}, "wind": [w, 0.0, b]}}
    metric = C.metric_from_dict(doc)
    again = C.metric_from_dict(json.loads(C.dumps(C.metric_to_dict(metric))))
    assert again == metric
    assert eval_F(again, x, y) == eval_F(metric, x, y)
