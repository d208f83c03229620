"""Busemann-Hausdorff volume density by spherical quadrature of the indicatrix."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import expr as ex
from . import jet as J
from .errors import QuadratureNotConverged
from .metric import ConformalScale, EuclideanBase, MetricSpec, RandersNavigation, eval_F

DEFAULT_ORDER = {2: 64, 3: 64, 4: 32, 5: 16}
MAX_POINTS = 4_000_000


@lru_cache(maxsize=32)
def sphere_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss-Legendre rule on S^{n-1} in hyperspherical angles.

    Returns unit directions (K, n) and weights (K,) integrating over the sphere.
    """
    t, w = np.polynomial.legendre.leggauss(m)
    polar = 0.5 * math.pi * (t + 1.0)
    polar_w = 0.5 * math.pi * w
    azim = math.pi * (t + 1.0)
    azim_w = math.pi * w

    grids = np.meshgrid(*([polar] * (n - 2) + [azim]), indexing="ij")
    wgrids = np.meshgrid(*([polar_w] * (n - 2) + [azim_w]), indexing="ij")
    angles = [g.ravel() for g in grids]
    weights = np.prod([g.ravel() for g in wgrids], axis=0)

    dirs = np.empty((angles[0].size, n))
    sin_prod = np.ones_like(angles[0])
    for k in range(n - 2):
        dirs[:, k] = sin_prod * np.cos(angles[k])
        weights = weights * np.sin(angles[k]) ** (n - 2 - k)
        sin_prod = sin_prod * np.sin(angles[k])
    dirs[:, n - 2] = sin_prod * np.cos(angles[-1])
    dirs[:, n - 1] = sin_prod * np.sin(angles[-1])
    return dirs, weights


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def indicatrix_volume(metric: MetricSpec, x, m: int) -> float:
    """Euclidean volume of {y : F(x, y) <= 1} with an m-point rule per angle."""
    n = metric.dim
    dirs, w = sphere_rule(n, m)
    F = eval_F(metric, np.broadcast_to(np.asarray(x, dtype=float), dirs.shape), dirs)
    return float(w @ F ** (-n)) / n


def bh_density_report(metric: MetricSpec, x, tol: float = 1e-6, order: int | None = None):
    """(sigma, estimated relative error, order used) for the BH density at ``x``."""
    n = metric.dim
    m = order or DEFAULT_ORDER.get(n, 12)
    coarse = indicatrix_volume(metric, x, m)
    while True:
        if (2 * m) ** (n - 1) > MAX_POINTS:
            raise QuadratureNotConverged("Busemann-Hausdorff quadrature exceeded its point budget",
                                         order=m, dim=n)
        fine = indicatrix_volume(metric, x, 2 * m)
        err = abs(fine - coarse) / abs(fine)
        m *= 2
        if err <= tol:
            return unit_ball_volume(n) / fine, err, m
        coarse = fine


def bh_density(metric: MetricSpec, x, tol: float = 1e-6) -> float:
    """sigma_BH(x) = vol(unit ball) / vol(indicatrix at x)."""
    return bh_density_report(metric, x, tol)[0]


def log_density_gradient(metric: MetricSpec, x, method: str = "auto", step: float = 1e-5) -> np.ndarray:
    """d/dx^i ln sigma_BH.

    ``auto`` uses exact closed forms: a navigation indicatrix is the h-ball
    translated by the wind (so sigma = sqrt(det h)), and a conformal factor
    contributes n * d rho.  ``quadrature`` central-differences the quadrature
    at a fixed rule so that its discretisation error cancels.
    """
    x = np.asarray(x, dtype=float)
    n = metric.dim
    if method == "quadrature":
        _, _, m = bh_density_report(metric, x)
        out = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            out[i] = (math.log(indicatrix_volume(metric, x - e, m))
                      - math.log(indicatrix_volume(metric, x + e, m))) / (2 * step)
        return out
    if method != "auto":
        raise ValueError(f"unknown density gradient method {method!r}")
    if isinstance(metric, EuclideanBase):
        return np.zeros(n)
    if isinstance(metric, RandersNavigation):
        if metric.base.is_euclidean:
            return np.zeros(n)
        xs = J.variables(list(x), 1)
        det = _det(metric.base.values(xs))
        if not isinstance(det, J.Jet):
            return np.zeros(n)
        return 0.5 * J.derivatives(J.log(det), range(n), 1)
    if isinstance(metric, ConformalScale):
        xs = J.variables(list(x), 1)
        rho = ex.evaluate(metric.rho, xs)
        grad = np.zeros(n) if not isinstance(rho, J.Jet) else J.derivatives(rho, range(n), 1)
        return n * grad + log_density_gradient(metric.inner, x, "auto", step)
    raise TypeError(f"not a metric specification: {metric!r}")


def _det(m):
    """Determinant by cofactor expansion; entries may be floats or jets."""
    if len(m) == 1:
        return m[0][0]
    out = 0.0
    for j in range(len(m)):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        out = out + term if j % 2 == 0 else out - term
    return out
