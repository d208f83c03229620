"""Geodesic integration, gradients and Laplacians of scalar fields, and
sampled transnormal / isoparametric checks for functions."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import expr as ex
from . import jet as J
from .errors import CriticalPoint, InsufficientSamples, InvalidParameter, StepSizeUnderflow
from .metric import MetricSpec, _columns, check_point_vector, eval_F, legendre_inverse_batch, norm_squared
from .spray import geodesic_acceleration, spray_jets
from .volume import log_density_gradient


# ---------------------------------------------------------------------------
# geodesics


@dataclass(frozen=True)
class GeodesicTrajectory:
    t: np.ndarray
    x: np.ndarray  # (len t, n)
    v: np.ndarray
    F: np.ndarray
    metric: MetricSpec
    _dense: object = None

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity from the solver's continuous extension."""
        n = self.x.shape[1]
        s = self._dense(np.asarray(t, dtype=float))
        return s[:n].T, s[n:].T

    def acceleration(self) -> np.ndarray:
        return geodesic_acceleration(self.metric, self.x, self.v)

    def to_csv(self) -> str:
        n = self.x.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["F"])
        for k in range(len(self.t)):
            w.writerow([f"{val:.12e}" for val in (self.t[k], *self.x[k], *self.v[k], self.F[k])])
        return buf.getvalue()


def _solve(metric: MetricSpec, x0s: np.ndarray, y0s: np.ndarray, T: float, tol: float, t_eval, dense: bool):
    m, n = x0s.shape

    def rhs(_, s):
        s = s.reshape(m, 2 * n)
        return np.concatenate([s[:, n:], geodesic_acceleration(metric, s[:, :n], s[:, n:])], axis=1).ravel()

    s0 = np.concatenate([x0s, y0s], axis=1).ravel()
    # the solver bounds the RMS of the scaled local error; dividing by
    # sqrt(size) turns that into a bound on every component
    tol = tol / np.sqrt(s0.size)
    sol = solve_ivp(rhs, (0.0, T), s0, method="RK45", rtol=tol, atol=tol,
                    t_eval=t_eval, dense_output=dense)
    if sol.status != 0:
        raise StepSizeUnderflow("geodesic integration stopped", reason=sol.message,
                                t=float(sol.t[-1]) if sol.t.size else 0.0)
    states = sol.y.T.reshape(len(sol.t), m, 2 * n)
    return sol, states[..., :n], states[..., n:]


def integrate_geodesics(metric: MetricSpec, x0s, y0s, T: float, tol: float = 1e-10, t_eval=None):
    """Integrate x'' = -2 G(x, x') for a batch of initial conditions in one system.

    Returns ``(t, X, V)`` with X and V of shape (len t, batch, n).  Sharing the
    step sequence keeps neighbouring geodesics on identical time grids.
    """
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    y0s = np.atleast_2d(np.asarray(y0s, dtype=float))
    check_point_vector(metric, x0s, y0s)
    if not T > 0:
        raise InvalidParameter("integration time must be positive", T=T)
    sol, X, V = _solve(metric, x0s, y0s, T, tol, t_eval, dense=False)
    return sol.t, X, V


def integrate_geodesic(metric: MetricSpec, x0, y0, T: float, tol: float = 1e-10,
                       t_eval=None) -> GeodesicTrajectory:
    """Adaptive Dormand-Prince solution of the geodesic equation on [0, T]."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    check_point_vector(metric, x0, y0)
    if not T > 0:
        raise InvalidParameter("integration time must be positive", T=T)
    sol, X, V = _solve(metric, x0[None], y0[None], T, tol, t_eval, dense=True)
    X, V = X[:, 0], V[:, 0]
    return GeodesicTrajectory(t=sol.t, x=X, v=V, F=np.asarray(eval_F(metric, X, V)).reshape(len(sol.t)),
                              metric=metric, _dense=sol.sol)


def geodesic_residual(metric: MetricSpec, x, v, a) -> float:
    """max |a + 2 G(x, v)| over samples of a curve with velocity v and acceleration a."""
    return float(np.max(np.abs(np.asarray(a) - geodesic_acceleration(metric, x, v))))


# ---------------------------------------------------------------------------
# gradients and Laplacians


@dataclass(frozen=True)
class FieldAnalysis:
    grad: np.ndarray
    F_of_grad: float
    lap_sigma: float
    lap_grad: float
    S_grad: float


def _field_derivatives(f: ex.Expr, X: np.ndarray, order: int):
    n = X.shape[-1]
    val = ex.evaluate(f, J.variables(_columns(X), order))
    if not isinstance(val, J.Jet):
        zeros = np.zeros(X.shape)
        return np.full(X.shape[:-1], float(val)), zeros, np.zeros(X.shape + (n,))
    hess = J.derivatives(val, range(n), 2) if order >= 2 else None
    return np.broadcast_to(val.value, X.shape[:-1]), J.derivatives(val, range(n), 1), hess


def _field_batch(metric: MetricSpec, f: ex.Expr, X: np.ndarray) -> dict:
    n = metric.dim
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, df, H = _field_derivatives(f, X, 2)
    if np.any(np.linalg.norm(df, axis=-1) < 1e-12):
        raise CriticalPoint("df vanishes; the gradient is undefined", point=X[np.argmin(np.linalg.norm(df, axis=-1))])
    V, Fs = legendre_inverse_batch(metric, X, df)

    # Jacobian of the gradient field: differentiate L(x, V(x)) = df(x) in x
    v = J.variables(_columns(X) + _columns(V), 2)
    E = norm_squared(metric, v[:n], v[n:])
    d2 = 0.5 * J.derivatives(E, range(2 * n), 2)
    g, ell_x = d2[..., n:, n:], d2[..., n:, :n]
    V_x = np.linalg.solve(g, H - ell_x)
    div = np.trace(V_x, axis1=-2, axis2=-1)

    dlns = np.array([log_density_gradient(metric, xx) for xx in X])
    G, _, _ = spray_jets(metric, X, V, 1)
    trN = sum(G.partial(n + i)[..., i] for i in range(n))
    flux = np.einsum("...i,...i->...", V, dlns)
    return {"grad": V, "F": Fs, "lap_sigma": div + flux, "lap_grad": div + trN, "S": trN - flux}


def field_analysis(metric: MetricSpec, f, x, volume: str = "bh") -> FieldAnalysis:
    """Gradient L^{-1}(df), F(grad f), and both Laplacians of ``f`` at ``x``.

    ``lap_sigma`` is the divergence of the gradient field for the BH density,
    with the field's Jacobian obtained by differentiating L(x, grad f) = df
    implicitly.  ``lap_grad`` is the g_{grad f}-trace of the Berwald Hessian,
    div grad f + N^i_i(grad f); the two differ by S(grad f).
    """
    if volume != "bh":
        raise InvalidParameter("only the Busemann-Hausdorff volume is supported", volume=volume)
    f = ex.parse(f) if isinstance(f, str) else f
    out = _field_batch(metric, f, np.asarray(x, dtype=float)[None])
    return FieldAnalysis(grad=out["grad"][0], F_of_grad=float(out["F"][0]),
                         lap_sigma=float(out["lap_sigma"][0]), lap_grad=float(out["lap_grad"][0]),
                         S_grad=float(out["S"][0]))


# ---------------------------------------------------------------------------
# sampled isoparametric test


@dataclass(frozen=True)
class IsoparametricVerdict:
    transnormal_spread: float
    laplacian_spread: float
    is_transnormal: bool
    is_isoparametric: bool
    levels: np.ndarray
    a: np.ndarray
    b: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {"transnormal_spread": self.transnormal_spread, "laplacian_spread": self.laplacian_spread,
                "is_transnormal": self.is_transnormal, "is_isoparametric": self.is_isoparametric,
                "levels": self.levels.tolist(), "a": self.a.tolist(), "b": self.b.tolist(),
                "counts": self.counts.tolist()}


def spread(values, atol: float = 1e-8) -> tuple[float, bool]:
    """(spread, is_relative): relative to the median, absolute when the median is below ``atol``."""
    values = np.asarray(values, dtype=float)
    width = float(values.max() - values.min())
    mid = abs(float(np.median(values)))
    return (width / mid, True) if mid > atol else (width, False)


def snap_to_level(f: ex.Expr, X: np.ndarray, levels: np.ndarray, max_iter: int = 30):
    """Newton steps along the Euclidean gradient onto f = level, row by row.

    Returns the moved points and a mask of rows that converged.
    """
    X = np.array(X, dtype=float)
    ok = np.zeros(len(X), dtype=bool)
    for _ in range(max_iter):
        val, df, _ = _field_derivatives(f, X, 1)
        r = val - levels
        ok = np.abs(r) <= 1e-14 * (1.0 + np.abs(levels))
        if ok.all():
            break
        nrm = np.einsum("ij,ij->i", df, df)
        safe = nrm > 1e-24
        step = np.where(safe, r / np.where(safe, nrm, 1.0), 0.0)
        X = X - step[:, None] * df
    return X, ok


def isoparametric_function_check(metric: MetricSpec, f, region, samples: int = 2000, seed: int = 0,
                                 threshold: float = 1e-6, buckets: int = 64,
                                 min_per_bucket: int = 10) -> IsoparametricVerdict:
    """Test F(grad f) = a(f) and Delta_sigma f = b(f) on random samples of a box.

    Samples are grouped into ``buckets`` equal-width bands of f-values and
    moved onto the centre level of their band, so each band becomes a true
    level set.  Bands with fewer than ``min_per_bucket`` points are dropped.
    """
    f = ex.parse(f) if isinstance(f, str) else f
    lo, hi = (np.asarray(r, dtype=float) for r in region)
    rng = np.random.default_rng(seed)
    X = lo + (hi - lo) * rng.random((samples, metric.dim))
    vals, _, _ = _field_derivatives(f, X, 1)
    vmin, vmax = float(vals.min()), float(vals.max())
    if vmax - vmin <= 1e-12 * (1.0 + abs(vmax)):
        raise CriticalPoint("f is constant on the sampled region")
    width = (vmax - vmin) / buckets
    idx = np.minimum(((vals - vmin) / width).astype(int), buckets - 1)
    centres = vmin + (idx + 0.5) * width
    X, ok = snap_to_level(f, X, centres)
    _, df, _ = _field_derivatives(f, X, 1)
    ok &= np.linalg.norm(df, axis=-1) > 1e-8

    keep = [k for k in range(buckets) if np.count_nonzero(ok & (idx == k)) >= min_per_bucket]
    if not keep:
        raise InsufficientSamples("no level bucket holds enough samples",
                                  samples=samples, buckets=buckets, min_per_bucket=min_per_bucket)
    mask = ok & np.isin(idx, keep)
    data = _field_batch(metric, f, X[mask])
    sub = idx[mask]

    a_tab, b_tab, t_spread, l_spread, counts = [], [], 0.0, 0.0, []
    for k in keep:
        sel = sub == k
        a_vals, b_vals = data["F"][sel], data["lap_sigma"][sel]
        a_tab.append(float(np.median(a_vals)))
        b_tab.append(float(np.median(b_vals)))
        counts.append(int(sel.sum()))
        t_spread = max(t_spread, spread(a_vals)[0])
        l_spread = max(l_spread, spread(b_vals)[0])
    transnormal = t_spread < threshold
    return IsoparametricVerdict(
        transnormal_spread=t_spread, laplacian_spread=l_spread, is_transnormal=transnormal,
        is_isoparametric=transnormal and l_spread < threshold,
        levels=vmin + (np.array(keep) + 0.5) * width, a=np.array(a_tab), b=np.array(b_tab),
        counts=np.array(counts))
