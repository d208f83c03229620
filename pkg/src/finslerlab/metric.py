"""Finsler metric specifications and their fiberwise tensors.

A metric is a small immutable tree:

* :class:`EuclideanBase` -- the flat norm on R^n,
* :class:`RandersNavigation` -- Zermelo navigation on a Riemannian base ``h``
  with wind ``v`` (``|v|_h < 1``),
* :class:`ConformalScale` -- ``exp(rho(x)) * F_inner(x, y)``.

Every function here evaluates the norm through :func:`finsler_norm`, which
accepts floats, arrays or jets, so y- and x-derivatives are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import expr as ex
from . import jet as J
from .errors import (
    ConvergenceFailure,
    DomainError,
    InvalidParameter,
    NavigationDegenerate,
    NotPositiveDefinite,
    ZeroCovector,
    ZeroVector,
)


@dataclass(frozen=True)
class RiemannianSpec:
    """Symmetric positive-definite matrix field; ``matrix=None`` is the identity."""

    dim: int
    matrix: tuple | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidParameter("dimension must be at least 2", dim=self.dim)
        if self.matrix is not None:
            m = tuple(tuple(ex.as_expr(e) for e in row) for row in self.matrix)
            if len(m) != self.dim or any(len(r) != self.dim for r in m):
                raise InvalidParameter("Riemannian matrix must be dim x dim", dim=self.dim)
            if any(m[i][j] != m[j][i] for i in range(self.dim) for j in range(i)):
                raise InvalidParameter("Riemannian matrix must be symmetric")
            object.__setattr__(self, "matrix", m)

    @classmethod
    def euclidean(cls, n: int) -> "RiemannianSpec":
        return cls(n)

    @property
    def is_euclidean(self) -> bool:
        return self.matrix is None

    def values(self, xs):
        if self.matrix is None:
            return None
        return [[ex.evaluate(e, xs) for e in row] for row in self.matrix]


@dataclass(frozen=True)
class EuclideanBase:
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise InvalidParameter("dimension must be at least 2", dim=self.dim)


@dataclass(frozen=True)
class RandersNavigation:
    base: RiemannianSpec
    wind: tuple

    def __post_init__(self):
        wind = tuple(ex.as_expr(w) for w in self.wind)
        if len(wind) != self.base.dim:
            raise InvalidParameter("wind must have one component per dimension",
                                   dim=self.base.dim, components=len(wind))
        _check_coords(wind, self.base.dim)
        object.__setattr__(self, "wind", wind)

    @property
    def dim(self) -> int:
        return self.base.dim


@dataclass(frozen=True)
class ConformalScale:
    inner: "MetricSpec"
    rho: ex.Expr

    def __post_init__(self):
        object.__setattr__(self, "rho", ex.as_expr(self.rho))
        _check_coords([self.rho], self.inner.dim)

    @property
    def dim(self) -> int:
        return self.inner.dim


MetricSpec = Union[EuclideanBase, RandersNavigation, ConformalScale]


def _check_coords(exprs, dim):
    used = set().union(*(ex.coords_used(e) for e in exprs)) if exprs else set()
    if used and max(used) >= dim:
        raise InvalidParameter(f"expression uses x{max(used) + 1} in dimension {dim}")


class PointVector(NamedTuple):
    """Base point ``x`` with a nonzero direction ``y``."""

    x: np.ndarray
    y: np.ndarray


# ---------------------------------------------------------------------------
# norm evaluation on arbitrary scalars (floats, arrays, jets)


def _dot(a, b):
    out = 0.0
    for p, q in zip(a, b):
        out = out + p * q
    return out


def navigation_data(metric: RandersNavigation, xs):
    """Per-point (h-matrix or None, v^i, v_i, b^2, lambda) at ``xs``."""
    h = metric.base.values(xs)
    v = [ex.evaluate(w, xs) for w in metric.wind]
    if h is None:
        v_low = v
    else:
        v_low = [_dot(row, v) for row in h]
    b2 = _dot(v_low, v)
    lam = 1.0 - b2
    lam_val = np.asarray(J.value(lam))
    if np.any(lam_val <= 0):
        raise NavigationDegenerate("wind speed |v|_h must stay below 1",
                                   b=float(np.sqrt(np.max(1.0 - lam_val))))
    return h, v, v_low, b2, lam


def finsler_norm(metric: MetricSpec, xs, ys):
    """F(x, y) for component sequences ``xs``/``ys`` of any numeric kind."""
    if isinstance(metric, EuclideanBase):
        return J.sqrt(_dot(ys, ys))
    if isinstance(metric, RandersNavigation):
        h, _, v_low, _, lam = navigation_data(metric, xs)
        h2 = _dot(ys, ys) if h is None else _dot(ys, [_dot(row, ys) for row in h])
        v0 = _dot(v_low, ys)
        return (J.sqrt(lam * h2 + v0 * v0) - v0) / lam
    if isinstance(metric, ConformalScale):
        return J.exp(ex.evaluate(metric.rho, xs)) * finsler_norm(metric.inner, xs, ys)
    raise TypeError(f"not a metric specification: {metric!r}")


def norm_squared(metric: MetricSpec, xs, ys):
    f = finsler_norm(metric, xs, ys)
    return f * f


def _columns(a):
    a = np.asarray(a, dtype=float)
    return [a[..., i] for i in range(a.shape[-1])]


def check_point_vector(metric: MetricSpec, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = metric.dim
    if x.shape[-1:] != (n,) or y.shape[-1:] != (n,):
        raise InvalidParameter(f"points and vectors must have {n} components",
                               x_shape=x.shape, y_shape=y.shape)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite point or vector")
    if np.any(np.all(y == 0.0, axis=-1)):
        raise ZeroVector("Finsler quantities are undefined at y = 0")
    return x, y


# ---------------------------------------------------------------------------
# public operations


def eval_F(metric: MetricSpec, x, y):
    """Finsler norm F(x, y); broadcasts over leading axes of ``x`` and ``y``."""
    x, y = check_point_vector(metric, x, y)
    f = finsler_norm(metric, _columns(x), _columns(y))
    return float(f) if np.ndim(f) == 0 else np.asarray(f)


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    g_inv: np.ndarray
    det_g: float


@dataclass(frozen=True)
class CartanTensor:
    C: np.ndarray
    I: np.ndarray


def y_jet(metric: MetricSpec, x, y, order: int):
    """F^2 as a jet in the fiber variables only (x held fixed); broadcasts over leading axes."""
    n = metric.dim
    ys = J.variables(_columns(y), order)
    return norm_squared(metric, _columns(x), ys), list(range(n))


def _make_fundamental(g: np.ndarray) -> FundamentalTensor:
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("fundamental tensor is not positive definite",
                                  eigenvalues=np.linalg.eigvalsh(g)) from None
    return FundamentalTensor(g=g, g_inv=np.linalg.inv(g), det_g=float(np.linalg.det(g)))


def fundamental_tensor(metric: MetricSpec, x, y) -> FundamentalTensor:
    """g_ij = (1/2) d^2 F^2 / dy^i dy^j by automatic differentiation."""
    x, y = check_point_vector(metric, x, y)
    e, v = y_jet(metric, x, y, 2)
    return _make_fundamental(0.5 * J.derivatives(e, v, 2))


def cartan_tensor(metric: MetricSpec, x, y) -> CartanTensor:
    """C_ijk = (1/4) d^3 F^2 / dy^i dy^j dy^k and the mean Cartan form I_k."""
    x, y = check_point_vector(metric, x, y)
    e, v = y_jet(metric, x, y, 3)
    gt = _make_fundamental(0.5 * J.derivatives(e, v, 2))
    C = 0.25 * J.derivatives(e, v, 3)
    return CartanTensor(C=C, I=np.einsum("ij,ijk->k", gt.g_inv, C))


def legendre(metric: MetricSpec, x, y) -> np.ndarray:
    """Forward Legendre map y -> g_ij(x, y) y^j."""
    x, y = check_point_vector(metric, x, y)
    e, v = y_jet(metric, x, y, 1)
    return 0.5 * J.derivatives(e, v, 1)


def _legendre_with_jacobian(metric, x, y):
    e, v = y_jet(metric, x, y, 2)
    return 0.5 * J.derivatives(e, v, 1), 0.5 * J.derivatives(e, v, 2)


def legendre_inverse_batch(metric: MetricSpec, x, xi, tol: float = 1e-12,
                           max_iter: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`legendre_inverse` for arrays of shape (m, n)."""
    n = metric.dim
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    x, xi = np.broadcast_arrays(x, xi)
    scale = np.linalg.norm(xi, axis=-1)
    if np.any(scale == 0.0):
        raise ZeroCovector("Legendre inverse of the zero covector")
    check_point_vector(metric, x, xi)

    # average of g over the coordinate directions as a Riemannian first guess
    g_avg = np.zeros(x.shape[:-1] + (n, n))
    for d in np.concatenate([np.eye(n), -np.eye(n)]):
        g_avg += _legendre_with_jacobian(metric, x, np.broadcast_to(d, x.shape))[1]
    y = np.linalg.solve(g_avg / (2 * n), xi[..., None])[..., 0]

    ell, g = _legendre_with_jacobian(metric, x, y)
    res = np.linalg.norm(ell - xi, axis=-1)
    for _ in range(max_iter):
        active = res > tol * scale
        if not np.any(active):
            break
        step = -np.linalg.solve(g, (ell - xi)[..., None])[..., 0]
        damping = np.ones(len(y))
        pending = active.copy()
        for _ in range(40):
            trial = y + damping[:, None] * step
            ok = np.any(trial != 0.0, axis=-1)
            t_ell, t_g = _legendre_with_jacobian(metric, x, np.where(ok[:, None], trial, y))
            t_res = np.linalg.norm(t_ell - xi, axis=-1)
            accept = pending & ok & ((t_res < res) | (t_res <= tol * scale))
            y[accept], ell[accept], g[accept], res[accept] = trial[accept], t_ell[accept], t_g[accept], t_res[accept]
            pending &= ~accept
            if not np.any(pending):
                break
            damping[pending] *= 0.5
        else:
            break
    bad = res > tol * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ConvergenceFailure("Legendre inversion did not converge",
                                 residual=float(res[i]), iterations=max_iter, covector=xi[i])
    return y, np.asarray(eval_F(metric, x, y)).reshape(len(y))


def legendre_inverse(metric: MetricSpec, x, xi, tol: float = 1e-12,
                     max_iter: int = 50) -> tuple[np.ndarray, float]:
    """Solve g_y(y, .) = xi for y by damped Newton; returns (y, F*(xi)).

    The first guess solves with the average of g over the signed coordinate
    directions; each Newton step is halved until the residual decreases.
    """
    y, fs = legendre_inverse_batch(metric, np.reshape(x, (1, -1)), np.reshape(xi, (1, -1)), tol, max_iter)
    return y[0], float(fs[0])
