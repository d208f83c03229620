"""Zermelo navigation, the closed-form Randers-Minkowski tensors, and the
navigation correspondence for hypersurface normals and principal curvatures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import InvalidParameter, IsotropyViolation
from .metric import (
    ConformalScale,
    EuclideanBase,
    FundamentalTensor,
    MetricSpec,
    RandersNavigation,
    RiemannianSpec,
    eval_F,
    navigation_data,
)


def navigate(h, v) -> RandersNavigation:
    """Randers metric solving the navigation problem on ``h`` with wind ``v``.

    ``h`` may be a :class:`RiemannianSpec`, an :class:`EuclideanBase` or an
    integer dimension (Euclidean).  The constraint |v|_h < 1 is enforced when
    the metric is evaluated.
    """
    if isinstance(h, int):
        h = RiemannianSpec(h)
    elif isinstance(h, EuclideanBase):
        h = RiemannianSpec(h.dim)
    return RandersNavigation(h, tuple(ex.as_expr(w) for w in v))


def riemannian_metric(h: RiemannianSpec) -> RandersNavigation:
    """The Riemannian norm of ``h`` as a metric (navigation with no wind)."""
    return RandersNavigation(h, (0.0,) * h.dim)


def minkowski_randers(n: int, b: float) -> RandersNavigation:
    """Euclidean navigation with constant wind b * d/dx^n."""
    if not 0.0 <= b < 1.0:
        raise InvalidParameter("wind strength must satisfy 0 <= b < 1", b=b)
    return navigate(n, [0.0] * (n - 1) + [b])


def vertical_wind_strength(metric: MetricSpec) -> float | None:
    """``b`` if ``metric`` is Euclidean navigation with constant wind b*d/dx^n, else None."""
    if not isinstance(metric, RandersNavigation) or not metric.base.is_euclidean:
        return None
    w = metric.wind
    if not all(isinstance(c, ex.Const) for c in w):
        return None
    if any(c.value != 0.0 for c in w[:-1]) or not 0.0 <= w[-1].value < 1.0:
        return None
    return w[-1].value


def is_minkowski(metric: MetricSpec) -> bool:
    """True when F does not depend on x (flat Minkowski space)."""
    if isinstance(metric, EuclideanBase):
        return True
    if isinstance(metric, RandersNavigation):
        exprs = list(metric.wind) + ([] if metric.base.is_euclidean else
                                     [e for row in metric.base.matrix for e in row])
        return all(ex.is_constant(e) for e in exprs)
    if isinstance(metric, ConformalScale):
        return ex.is_constant(metric.rho) and is_minkowski(metric.inner)
    return False


@dataclass(frozen=True)
class NavigationData:
    h: np.ndarray
    v: np.ndarray
    v_low: np.ndarray
    b: float
    lam: float


def navigation_at(metric: RandersNavigation, x) -> NavigationData:
    xs = list(np.asarray(x, dtype=float))
    h, v, v_low, b2, lam = navigation_data(metric, xs)
    n = metric.dim
    h = np.eye(n) if h is None else np.array(h, dtype=float)
    return NavigationData(h=h, v=np.array(v, dtype=float) * np.ones(n),
                          v_low=np.array(v_low, dtype=float) * np.ones(n),
                          b=float(np.sqrt(b2)), lam=float(lam))


@dataclass(frozen=True)
class AlphaBetaSplit:
    alpha_matrix: np.ndarray
    alpha_inv: np.ndarray
    beta_covector: np.ndarray
    beta_vector: np.ndarray
    b_norm: float


def alpha_beta_split(b: float, n: int) -> AlphaBetaSplit:
    """F = alpha + beta for Euclidean navigation with wind b * d/dx^n."""
    if not 0.0 <= b < 1.0:
        raise InvalidParameter("wind strength must satisfy 0 <= b < 1", b=b)
    lam = 1.0 - b * b
    a = np.diag([1.0 / lam] * (n - 1) + [1.0 / lam ** 2])
    a_inv = np.diag([lam] * (n - 1) + [lam ** 2])
    b_low = np.zeros(n)
    b_low[-1] = -b / lam
    b_up = np.zeros(n)
    b_up[-1] = -lam * b
    return AlphaBetaSplit(a, a_inv, b_low, b_up, float(np.sqrt(b_low @ a_inv @ b_low)))


def closed_form_tensor(b: float, n: int, y) -> tuple[FundamentalTensor, AlphaBetaSplit]:
    """Fundamental tensor and inverse of the Randers-Minkowski metric, term by term.

    The inverse is the printed closed form, not a numerical inverse, so
    ``g @ g_inv == I`` is a genuine check of the formulas.
    """
    split = alpha_beta_split(b, n)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise InvalidParameter("direction must be nonzero")
    lam = 1.0 - b * b
    ya, yn = y[:-1], y[-1]
    alpha = np.sqrt(ya @ ya / lam + yn * yn / lam ** 2)
    beta = -b * yn / lam
    F = alpha + beta

    g = np.empty((n, n))
    g[:-1, :-1] = F / (lam * alpha) * np.eye(n - 1) - beta * np.outer(ya, ya) / (alpha ** 3 * lam ** 2)
    g[:-1, -1] = g[-1, :-1] = -b * ya / (lam ** 2 * alpha) - beta * ya * yn / (lam ** 3 * alpha ** 3)
    g[-1, -1] = (F / (lam ** 2 * alpha) * (1.0 - yn ** 2 / (lam ** 2 * alpha ** 2))
                 + (yn / (lam ** 2 * alpha) - b / lam) ** 2)

    K = (b * b * alpha + beta) / F ** 3
    gi = np.empty((n, n))
    gi[:-1, :-1] = alpha / F * lam * np.eye(n - 1) + K * np.outer(ya, ya)
    gi[:-1, -1] = gi[-1, :-1] = b * lam * alpha / F ** 2 * ya + K * ya * yn
    gi[-1, -1] = lam ** 2 * alpha / F + 2 * b * lam * alpha / F ** 2 * yn + K * yn ** 2
    return FundamentalTensor(g=g, g_inv=gi, det_g=float(np.linalg.det(g))), split


@dataclass(frozen=True)
class CurvatureShift:
    n_riem: np.ndarray
    n_fins: np.ndarray
    wind: np.ndarray
    mu_riem: np.ndarray
    mu_fins: np.ndarray
    k: float
    isotropy_spread: float
    normal_error: float
    operator_error: float

    def consistent(self, tol: float = 1e-8) -> bool:
        return (self.normal_error < tol and self.operator_error < tol
                and np.allclose(self.mu_fins, self.mu_riem + self.k, atol=tol, rtol=0))


def isotropic_s_factor(metric: RandersNavigation, x, directions: int = 12, tol: float = 1e-8,
                       seed: int = 0) -> tuple[float, float]:
    """Measure k(x) in S = (n+1) k(x) F over random directions; returns (k, spread)."""
    from .spray import s_curvature

    n = metric.dim
    rng = np.random.default_rng(seed)
    ks = []
    for y in rng.normal(size=(directions, n)):
        ks.append(s_curvature(metric, x, y) / ((n + 1) * eval_F(metric, x, y)))
    ks = np.array(ks)
    spread = float(ks.max() - ks.min())
    if spread > tol:
        raise IsotropyViolation("S-curvature is not isotropic at this point",
                                spread=spread, tolerance=tol)
    return float(ks.mean()), spread


def normal_and_curvature_shift(metric: RandersNavigation, hyp, x,
                               isotropy_tol: float = 1e-8) -> CurvatureShift:
    """Compare the Finsler and Riemannian (navigation base) normals and shape operators.

    With isotropic S-curvature S = (n+1)k(x)F the two shape operators share
    principal vectors and differ by k(x) times the identity; the Finsler unit
    normal is the Riemannian one shifted by the wind.
    """
    from .hypersurface import weingarten_map

    if not isinstance(metric, RandersNavigation):
        raise InvalidParameter("normal shift needs a navigation metric")
    x = np.asarray(x, dtype=float)
    k, spread = isotropic_s_factor(metric, x, tol=isotropy_tol)
    nav = navigation_at(metric, x)
    wf = weingarten_map(metric, hyp, x)
    wr = weingarten_map(riemannian_metric(metric.base), hyp, x)
    mu_f = np.sort(np.linalg.eigvals(wf.operator).real)
    mu_r = np.sort(np.linalg.eigvals(wr.operator).real)
    eye = np.eye(len(mu_f))
    return CurvatureShift(
        n_riem=wr.normal, n_fins=wf.normal, wind=nav.v, mu_riem=mu_r, mu_fins=mu_f, k=k,
        isotropy_spread=spread,
        normal_error=float(np.max(np.abs(wf.normal - (wr.normal + nav.v)))),
        operator_error=float(np.max(np.abs(wf.operator - wr.operator - k * eye))),
    )
