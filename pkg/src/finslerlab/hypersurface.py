"""Unit normals, shape operators and parallel hypersurface flows.

Sign convention: the shape operator is A X = -D_X n, where D is the Berwald
covariant derivative with reference vector n.  With this choice the inward
normal of a round sphere of radius r has principal curvatures 1/r.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import jet as J
from .errors import CriticalPoint, FocalPoint, InvalidParameter
from .geodesics import _field_derivatives, integrate_geodesics, snap_to_level, spread
from .metric import MetricSpec, legendre_inverse_batch, norm_squared, y_jet
from .spray import ricci, s_curvature, spray_jets


# ---------------------------------------------------------------------------
# hypersurface descriptions


@dataclass(frozen=True)
class LevelSet:
    """{f = value}; orientation +1 points the normal along df, -1 against it."""

    f: ex.Expr
    value: float = 0.0
    orientation: int = 1

    def __post_init__(self):
        object.__setattr__(self, "f", ex.parse(self.f) if isinstance(self.f, str) else ex.as_expr(self.f))
        if self.orientation not in (1, -1):
            raise InvalidParameter("orientation must be +1 or -1", orientation=self.orientation)

    def as_level_set(self) -> "LevelSet":
        return self


@dataclass(frozen=True)
class Graph:
    """x^n = height(x^1, ..., x^{n-1}); orientation +1 has a positive last normal component."""

    height: ex.Expr
    dim: int
    orientation: int = 1

    def __post_init__(self):
        h = ex.parse(self.height) if isinstance(self.height, str) else ex.as_expr(self.height)
        if self.dim - 1 in ex.coords_used(h):
            raise InvalidParameter(f"graph height may not depend on x{self.dim}")
        object.__setattr__(self, "height", h)

    def as_level_set(self) -> LevelSet:
        return LevelSet(ex.coord(self.dim - 1) - self.height, 0.0, self.orientation)


HypersurfaceSpec = LevelSet | Graph


def hyperplane(n: int, height: float = 0.0, orientation: int = 1) -> LevelSet:
    """{x^n = height}."""
    return LevelSet(ex.coord(n - 1), float(height), orientation)


def sphere(n: int, radius: float, center=None, inward: bool = True) -> LevelSet:
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    f = ex.add(*[(ex.coord(i) - float(center[i])) ** 2 for i in range(n)])
    return LevelSet(f, float(radius) ** 2, -1 if inward else 1)


def project(hyp: HypersurfaceSpec, points) -> np.ndarray:
    """Move points onto the hypersurface along the Euclidean gradient of its defining function."""
    ls = hyp.as_level_set()
    P = np.atleast_2d(np.asarray(points, dtype=float))
    out, ok = snap_to_level(ls.f, P, np.full(len(P), ls.value))
    if not ok.all():
        raise CriticalPoint("could not project a point onto the hypersurface", point=P[np.argmin(ok)])
    return out


def tangent_basis(df: np.ndarray) -> np.ndarray:
    """Euclidean orthonormal basis (n, n-1) of ker df."""
    n = len(df)
    q, _ = np.linalg.qr(np.column_stack([df, np.eye(n)]))
    return q[:, 1:n]


def _unit_normals(metric, hyp, X):
    """Unit normal field, its x-Jacobian and df at the rows of X."""
    ls = hyp.as_level_set()
    n = metric.dim
    _, df, H = _field_derivatives(ls.f, X, 2)
    if np.any(np.linalg.norm(df, axis=-1) < 1e-12):
        raise CriticalPoint("the defining function is critical on the hypersurface")
    xi = ls.orientation * df
    V, Fs = legendre_inverse_batch(metric, X, xi)

    v = J.variables([X[:, i] for i in range(n)] + [V[:, i] for i in range(n)], 2)
    E = norm_squared(metric, v[:n], v[n:])
    d2 = 0.5 * J.derivatives(E, range(2 * n), 2)
    g, ell_x = d2[..., n:, n:], d2[..., n:, :n]
    V_x = np.linalg.solve(g, ls.orientation * H - ell_x)
    # F_y(V) = xi / F, so dF/dx = F_x + xi V_x / F
    F_x = 0.5 * J.derivatives(E, range(n), 1) / Fs[:, None]
    dF = F_x + np.einsum("bi,bij->bj", xi, V_x) / Fs[:, None]
    nrm = V / Fs[:, None]
    nrm_x = V_x / Fs[:, None, None] - np.einsum("bi,bj->bij", V, dF) / (Fs ** 2)[:, None, None]
    return nrm, nrm_x, df


def _connection(metric, X, Y):
    n = metric.dim
    G, _, _ = spray_jets(metric, X, Y, 1)
    return J.derivatives(G, range(n, 2 * n), 1)


def _fundamental(metric, X, Y):
    e, v = y_jet(metric, X, Y, 2)
    return 0.5 * J.derivatives(e, v, 2)


@dataclass(frozen=True)
class WeingartenMap:
    """X -> -D_X n on T_xM written in a Euclidean orthonormal basis of T_xM.

    ``normal_leak`` is max |df(D_X n)| / |df| over the basis: D_X n should be
    tangent, and the projection onto the basis would otherwise hide it.
    """

    normal: np.ndarray
    basis: np.ndarray
    operator: np.ndarray
    normal_leak: float = 0.0


def weingarten_map(metric: MetricSpec, hyp: HypersurfaceSpec, x) -> WeingartenMap:
    X = np.asarray(x, dtype=float)[None]
    nrm, nrm_x, df = _unit_normals(metric, hyp, X)
    D = nrm_x[0] + _connection(metric, X, nrm)[0]
    B = tangent_basis(df[0])
    leak = float(np.max(np.abs(df[0] @ D @ B)) / np.linalg.norm(df[0]))
    return WeingartenMap(normal=nrm[0], basis=B, operator=-B.T @ D @ B, normal_leak=leak)


# ---------------------------------------------------------------------------
# shape operator


@dataclass(frozen=True)
class ShapeReport:
    point: np.ndarray
    normal: np.ndarray
    tangent_frame: np.ndarray  # rows are e_a
    A: np.ndarray
    principal: np.ndarray
    H_aniso: float
    S_normal: float
    H_mu: float
    asymmetry: float
    normal_leak: float = 0.0

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "normal": self.normal.tolist(),
                "tangent_frame": self.tangent_frame.tolist(), "A": self.A.tolist(),
                "principal": self.principal.tolist(), "H_aniso": self.H_aniso,
                "S_normal": self.S_normal, "H_mu": self.H_mu, "asymmetry": self.asymmetry,
                "normal_leak": self.normal_leak}


def _report(metric, x, nrm, tangents, minus_D, leak=0.0):
    """Shape data from tangent vectors T (n, n-1) and -D_{T_a} n as columns of minus_D."""
    W = np.linalg.lstsq(tangents, minus_D, rcond=None)[0]
    g = _fundamental(metric, x[None], nrm[None])[0]
    gram = tangents.T @ g @ tangents
    R = np.linalg.cholesky(gram).T  # gram = R^T R
    A = R @ W @ np.linalg.inv(R)
    frame = np.linalg.solve(R.T, tangents.T)  # rows e_a = (T R^{-1})^T
    sym = 0.5 * (A + A.T)
    S = s_curvature(metric, x, nrm)
    H = float(np.trace(A))
    return ShapeReport(point=x, normal=nrm, tangent_frame=frame, A=A,
                       principal=np.sort(np.linalg.eigvalsh(sym)), H_aniso=H, S_normal=S,
                       H_mu=H + S, asymmetry=float(np.max(np.abs(A - A.T))), normal_leak=leak)


def shape_operator(metric: MetricSpec, hyp: HypersurfaceSpec, x) -> ShapeReport:
    """Unit normal, shape operator in a g_n-orthonormal tangent frame, and mean curvatures.

    The normal field is L^{-1}(df) / F*(df) (sign set by the orientation); its
    x-Jacobian is exact, obtained by differentiating L(x, V(x)) = df(x).
    """
    x = np.asarray(x, dtype=float)
    wm = weingarten_map(metric, hyp, x)
    B = wm.basis
    return _report(metric, x, wm.normal, B, B @ wm.operator, wm.normal_leak)


# ---------------------------------------------------------------------------
# parallel hypersurfaces


@dataclass(frozen=True)
class TraceDerivativeCheck:
    seed_id: int
    dt: float
    fd_derivative: float
    ricci: float
    sum_mu_squared: float
    expected: float
    relative_error: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ParallelFlowReport:
    t_grid: np.ndarray
    seeds: np.ndarray
    reports: list  # reports[k][s] is the ShapeReport at t_grid[k], seed s
    trace_check: list = field(default_factory=list)
    focal_time: float | None = None

    @property
    def H_aniso(self) -> np.ndarray:
        return np.array([[r.H_aniso for r in row] for row in self.reports])

    @property
    def H_mu(self) -> np.ndarray:
        return np.array([[r.H_mu for r in row] for row in self.reports])

    def constancy(self) -> dict:
        """Per-time spread of the two mean curvatures across seeds."""
        return {"H_aniso": [spread(h)[0] for h in self.H_aniso],
                "H_mu": [spread(h)[0] for h in self.H_mu]}

    def to_csv(self) -> str:
        n = len(self.seeds[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "seed_id"] + [f"x{i + 1}" for i in range(n)] + [f"mu_{a + 1}" for a in range(n - 1)]
                   + ["H_aniso", "S_normal", "H_mu"])
        for t, row in zip(self.t_grid, self.reports):
            for s, r in enumerate(row):
                w.writerow([f"{t:.12e}", s] + [f"{v:.12e}" for v in (*r.point, *r.principal, r.H_aniso,
                                                                        r.S_normal, r.H_mu)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"t_grid": self.t_grid.tolist(), "seeds": self.seeds.tolist(),
                "constancy": self.constancy(), "focal_time": self.focal_time,
                "trace_check": [c.to_dict() for c in self.trace_check],
                "H_aniso": self.H_aniso.tolist(), "H_mu": self.H_mu.tolist()}


def _stencils(metric, hyp, seeds, h):
    """Seed plus +-h along each Euclidean tangent direction, projected back onto M."""
    ls = hyp.as_level_set()
    m, n = seeds.shape
    _, df, _ = _field_derivatives(ls.f, seeds, 1)
    pts = []
    for s in range(m):
        B = tangent_basis(df[s])
        pts.append(seeds[s])
        for a in range(n - 1):
            pts.extend([seeds[s] + h * B[:, a], seeds[s] - h * B[:, a]])
    return project(hyp, np.array(pts)).reshape(m, 2 * n - 1, n)


def parallel_flow(metric: MetricSpec, hyp: HypersurfaceSpec, seeds, t_grid, fd_step: float = 1e-4,
                  tol: float = 1e-11, focal: str = "raise", focal_ratio: float = 1e-3) -> ParallelFlowReport:
    """Shape operators of the parallel hypersurfaces M_t along the normal geodesics from ``seeds``.

    Every seed carries a stencil of neighbours on M.  All stencil points flow
    along their unit normal geodesics together; at time t the flowed stencil
    gives tangent vectors of M_t and the derivative of its normal field by
    central differences.  The t = 0 row is :func:`shape_operator` itself.

    A focal point is flagged when the tangent frame's volume drops below
    ``focal_ratio`` of its initial value or changes orientation.  With
    ``focal="raise"`` this raises :class:`FocalPoint`; with ``"truncate"`` the
    report stops at the last regular time.
    """
    seeds = project(hyp, seeds)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise InvalidParameter("t_grid must start at 0 and increase strictly")
    m, n = seeds.shape
    st = _stencils(metric, hyp, seeds, fd_step)
    flat = st.reshape(-1, n)
    nrm0, _, _ = _unit_normals(metric, hyp, flat)

    rows = [[shape_operator(metric, hyp, x) for x in seeds]]
    focal_time = None
    if len(t_grid) > 1:
        _, X, V = integrate_geodesics(metric, flat, nrm0, float(t_grid[-1]), tol=tol, t_eval=t_grid)
        X = X.reshape(len(t_grid), m, 2 * n - 1, n)
        V = V.reshape(len(t_grid), m, 2 * n - 1, n)
        vol0 = None
        for k in range(1, len(t_grid)):
            T = (X[k, :, 1::2] - X[k, :, 2::2]).transpose(0, 2, 1) / (2 * fd_step)  # (m, n, n-1)
            dV = (V[k, :, 1::2] - V[k, :, 2::2]).transpose(0, 2, 1) / (2 * fd_step)
            centre, nrm = X[k, :, 0], V[k, :, 0]
            vol = np.linalg.det(np.concatenate([T, nrm[:, :, None]], axis=2))
            if vol0 is None:
                T0 = (st[:, 1::2] - st[:, 2::2]).transpose(0, 2, 1) / (2 * fd_step)
                vol0 = np.linalg.det(np.concatenate([T0, nrm0.reshape(m, 2 * n - 1, n)[:, 0, :, None]], axis=2))
            ratio = vol / vol0
            if np.any(ratio < focal_ratio):
                focal_time = float(t_grid[k])
                if focal == "raise":
                    s = int(np.argmin(ratio))
                    raise FocalPoint("parallel hypersurface degenerates", t=focal_time, seed=seeds[s],
                                     volume_ratio=float(ratio[s]))
                break
            N = _connection(metric, centre, nrm)
            minus_D = -(dV + N @ T)
            rows.append([_report(metric, centre[s], nrm[s], T[s], minus_D[s]) for s in range(m)])
    t_used = t_grid[: len(rows)]

    checks = []
    if len(t_used) > 1:
        dt = float(t_used[1])
        for s in range(m):
            r0, r1 = rows[0][s], rows[1][s]
            ric = ricci(metric, seeds[s], r0.normal)
            mu2 = float(np.sum(r0.principal ** 2))
            fd = (r1.H_aniso - r0.H_aniso) / dt
            exp_ = ric + mu2
            checks.append(TraceDerivativeCheck(seed_id=s, dt=dt, fd_derivative=fd, ricci=ric,
                                               sum_mu_squared=mu2, expected=exp_,
                                               relative_error=abs(fd - exp_) / max(abs(exp_), 1e-300)))
    return ParallelFlowReport(t_grid=t_used, seeds=seeds, reports=rows, trace_check=checks,
                              focal_time=focal_time)


# ---------------------------------------------------------------------------
# isoparametric verdict


@dataclass(frozen=True)
class HypersurfaceVerdict:
    is_isoparametric: bool
    is_dmu_isoparametric: bool
    max_spread_aniso: float
    max_spread_mu: float
    evidence: ParallelFlowReport

    def to_dict(self) -> dict:
        return {"is_isoparametric": self.is_isoparametric, "is_dmu_isoparametric": self.is_dmu_isoparametric,
                "max_spread_aniso": self.max_spread_aniso, "max_spread_mu": self.max_spread_mu,
                "evidence": self.evidence.to_dict()}


def sample_hypersurface(hyp: HypersurfaceSpec, region, samples: int, seed: int = 0) -> np.ndarray:
    lo, hi = (np.asarray(r, dtype=float) for r in region)
    rng = np.random.default_rng(seed)
    return project(hyp, lo + (hi - lo) * rng.random((samples, len(lo))))


def isoparametric_verdict(metric: MetricSpec, hyp: HypersurfaceSpec, t_max: float = 0.5, samples: int = 8,
                          seeds=None, region=None, steps: int = 10, threshold: float = 1e-6,
                          atol: float = 1e-8, fd_step: float = 1e-4, seed: int = 0) -> HypersurfaceVerdict:
    """Do M and its parallel hypersurfaces for t in [0, t_max] have constant mean curvature?

    Seeds default to ``samples`` random points of ``region`` (default [-2, 2]^n)
    projected onto M.  The flow is cut at the first focal time, if any.
    """
    n = metric.dim
    if seeds is None:
        region = region or ([-2.0] * n, [2.0] * n)
        seeds = sample_hypersurface(hyp, region, samples, seed)
    rep = parallel_flow(metric, hyp, seeds, np.linspace(0.0, t_max, steps + 1), fd_step=fd_step,
                        focal="truncate")

    def worst(values):
        out, ok = 0.0, True
        for row in values:
            s, relative = spread(row, atol)
            out = max(out, s)
            ok &= s < (threshold if relative else atol)
        return out, ok

    sa, iso = worst(rep.H_aniso)
    sm, iso_mu = worst(rep.H_mu)
    return HypersurfaceVerdict(is_isoparametric=bool(iso), is_dmu_isoparametric=bool(iso_mu),
                               max_spread_aniso=sa, max_spread_mu=sm, evidence=rep)
