"""Geodesic spray, nonlinear connection, curvature, S-curvature and the
conformal-change formulas for sprays and S-curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import jet as J
from .errors import DegenerateFlag, InvalidParameter, MethodMismatch, NotPositiveDefinite, SpecializationMismatch
from .metric import (
    ConformalScale,
    MetricSpec,
    cartan_tensor,
    check_point_vector,
    fundamental_tensor,
    norm_squared,
)
from .randers import alpha_beta_split, vertical_wind_strength
from .volume import log_density_gradient


@dataclass(frozen=True)
class SprayData:
    G: np.ndarray
    N: np.ndarray
    Gamma_b: np.ndarray


@dataclass(frozen=True)
class CurvatureReport:
    R: np.ndarray
    ric: float
    S: float
    flag: list = field(default_factory=list)  # [(u, K)]

    def to_dict(self) -> dict:
        return {"ric": self.ric, "S": self.S,
                "flag": [{"u": list(map(float, u)), "K": k} for u, k in self.flag],
                "R": [float(v) for v in np.ravel(self.R)]}


@dataclass(frozen=True)
class ConformalData:
    rho_k: np.ndarray
    rho_up: np.ndarray
    theta: float
    xi_term: float
    drho_norm2: float


def _cols(a):
    a = np.asarray(a, dtype=float)
    return [a[..., i] for i in range(a.shape[-1])]


def spray_jets(metric: MetricSpec, x, y, order: int):
    """G^i, F^2 and g^{ij} as jets of ``order`` in the 2n variables (x, y).

    G^i = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l}); F^2 is expanded to
    ``order + 2`` so that every quantity is exact to the requested order.
    """
    n = metric.dim
    v = J.variables(_cols(x) + _cols(y), order + 2)
    E = norm_squared(metric, v[:n], v[n:])
    Ey = [E.diff(n + l) for l in range(n)]
    g = J.stack([[0.5 * Ey[i].diff(n + j) for j in range(n)] for i in range(n)])
    g0 = g.c[..., 0]
    if np.any(np.linalg.eigvalsh(g0)[..., 0] <= 0):
        raise NotPositiveDefinite("fundamental tensor is not positive definite")
    yk = [vv.truncate(order) for vv in v[n:]]
    rhs = []
    for l in range(n):
        t = -E.diff(l).truncate(order)
        for k in range(n):
            t = t + Ey[l].diff(k) * yk[k]
        rhs.append(t)
    ginv = J.inverse(g)
    G = J.matvec(ginv, J.stack(rhs)) * 0.25
    return G, E.truncate(order), ginv


def geodesic_acceleration(metric: MetricSpec, x, v) -> np.ndarray:
    """-2 G(x, v); broadcasts over leading axes."""
    G, _, _ = spray_jets(metric, x, v, 0)
    return -2.0 * G.c[..., 0]


def spray(metric: MetricSpec, x, y) -> SprayData:
    """Spray coefficients G^i, connection N^i_j = dG^i/dy^j and Berwald dN^i_j/dy^k."""
    x, y = check_point_vector(metric, x, y)
    n = metric.dim
    G, _, _ = spray_jets(metric, x, y, 2)
    yv = range(n, 2 * n)
    return SprayData(G=G.c[..., 0].copy(), N=J.derivatives(G, yv, 1), Gamma_b=J.derivatives(G, yv, 2))


def _mixed(G: J.Jet, n: int) -> np.ndarray:
    """d^2 G^i / dx^j dy^k as [i, j, k]."""
    out = np.empty(G.c.shape[:-1] + (n, n))
    for j in range(n):
        for k in range(n):
            out[..., j, k] = G.partial(j, n + k)
    return out


def riemann_curvature(metric: MetricSpec, x, y):
    """R^i_k in direction y, plus the g_y tensor and F^2 used for flag curvature."""
    x, y = check_point_vector(metric, x, y)
    n = metric.dim
    G, E, _ = spray_jets(metric, x, y, 2)
    Gv = G.c[..., 0]
    Gx = J.derivatives(G, range(n), 1)
    Gy = J.derivatives(G, range(n, 2 * n), 1)
    Gyy = J.derivatives(G, range(n, 2 * n), 2)
    Gxy = _mixed(G, n)
    R = (2.0 * Gx - np.einsum("j,ijk->ik", y, Gxy) + 2.0 * np.einsum("j,ijk->ik", Gv, Gyy) - Gy @ Gy)
    g = 0.5 * J.derivatives(E, range(n, 2 * n), 2)
    return R, g, float(E.value), float(np.trace(Gy))


def riemann_ricci_flag(metric: MetricSpec, x, y, flags=None, density: str = "auto") -> CurvatureReport:
    """Riemann curvature R^i_k, Ricci scalar R^k_k, S-curvature and flag curvatures K(y, u)."""
    R, g, F2, divG = riemann_curvature(metric, x, y)
    y = np.asarray(y, dtype=float)
    S = divG - float(y @ log_density_gradient(metric, x, density))
    out = []
    for u in ([] if flags is None else flags):
        u = np.asarray(u, dtype=float)
        denom = F2 * (u @ g @ u) - (y @ g @ u) ** 2
        if denom <= 1e-12 * F2 * (u @ g @ u):
            raise DegenerateFlag("flag pole and transverse edge are parallel", u=u)
        out.append((u, float((R @ u) @ g @ u / denom)))
    return CurvatureReport(R=R, ric=float(np.trace(R)), S=S, flag=out)


def ricci(metric: MetricSpec, x, y) -> float:
    return float(np.trace(riemann_curvature(metric, x, y)[0]))


def paper_ricci_normal(n: int, b: float, x) -> float:
    """Closed-form Ricci curvature of the conformal Randers metric at its hyperplane normal.

    Evaluates e^{-2 rho}(1+b) sum_a [pi^2 (1 + 2 cos(pi x^a)) / (2 + cos(pi x^a))^2
    - (n-2) rho_a^2 - (rho^a)^2 (n+2) b / (1+b)^2] with rho^a = (1+b) rho_a.
    """
    if n < 2 or not 0.0 <= b < 1.0:
        raise InvalidParameter("need n >= 2 and 0 <= b < 1", n=n, b=b)
    xa = np.asarray(x, dtype=float)[: n - 1]
    c = np.cos(math.pi * xa)
    rho = float(np.sum(np.log(2.0 + c)))
    rho_a = -math.pi * np.sin(math.pi * xa) / (2.0 + c)
    rho_up = (1.0 + b) * rho_a
    terms = (math.pi ** 2 + 2 * math.pi ** 2 * c) / (2.0 + c) ** 2 \
        - (n - 2) * rho_a ** 2 - rho_up ** 2 * (n + 2) * b / (1.0 + b) ** 2
    return float(math.exp(-2 * rho) * (1.0 + b) * np.sum(terms))


# ---------------------------------------------------------------------------
# conformal change F~ = e^rho F


def _rho_jet(rho: ex.Expr, x, order: int):
    n = len(x)
    val = ex.evaluate(rho, J.variables(list(np.asarray(x, dtype=float)), order))
    if not isinstance(val, J.Jet):
        return float(val), np.zeros(n), np.zeros((n, n))
    hess = J.derivatives(val, range(n), 2) if order >= 2 else None
    return float(val.value), J.derivatives(val, range(n), 1), hess


def conformal_data(base: MetricSpec, rho: ex.Expr, x, y) -> ConformalData:
    x, y = check_point_vector(base, x, y)
    _, rk, rkl = _rho_jet(rho, x, 2)
    ft = fundamental_tensor(base, x, y)
    theta = float(rk @ y)
    return ConformalData(rho_k=rk, rho_up=ft.g_inv @ rk, theta=theta,
                         xi_term=theta ** 2 - float(y @ rkl @ y), drho_norm2=float(rk @ ft.g_inv @ rk))


def _paper_base(base: MetricSpec, rho: ex.Expr) -> float:
    b = vertical_wind_strength(base)
    if b is None:
        raise InvalidParameter("closed forms need Euclidean navigation with wind b d/dx^n")
    if base.dim - 1 in ex.coords_used(rho):
        raise InvalidParameter("closed forms need a conformal factor independent of x^n")
    return b


def _specialized_spray_jets(b: float, rho_k: np.ndarray, y, order: int):
    """Closed-form G~^a and G~^n for the Randers-Minkowski base, as y-jets."""
    n = len(y)
    lam = 1.0 - b * b
    ys = J.variables(list(y), order)
    alpha = J.sqrt(sum(ys[a] * ys[a] for a in range(n - 1)) / lam + ys[-1] * ys[-1] / lam ** 2)
    beta = ys[-1] * (-b / lam)
    F = alpha + beta
    theta = sum(ys[a] * rho_k[a] for a in range(n - 1))
    coef = 1.0 - (alpha * (b * b) + beta) / (2.0 * F)
    G = [coef * theta * ys[a] - 0.5 * lam * rho_k[a] * alpha * F for a in range(n - 1)]
    G.append(coef * theta * ys[-1] - 0.5 * b * lam * alpha * theta)
    return J.stack(G)


def conformal_spray(base: MetricSpec, rho: ex.Expr, x, y, path: str = "general",
                    check: bool = True, tol: float = 1e-9) -> SprayData:
    """Spray of e^rho F from the base spray.

    ``general``: G~ = G + rho_k y^k y^i - 1/2 F^2 rho^i for any base.
    ``specialized``: the expanded closed forms for the Randers-Minkowski base.
    With ``check`` the result is compared against direct differentiation of
    e^rho F and a mismatch raises :class:`SpecializationMismatch`.
    """
    x, y = check_point_vector(base, x, y)
    n = base.dim
    if path == "general":
        G, E, ginv = spray_jets(base, x, y, 2)
        v = J.variables(list(x) + list(y), 3)
        r = ex.evaluate(rho, v[:n])
        if isinstance(r, J.Jet):
            rk = J.stack([r.diff(k) for k in range(n)])
            theta = sum(J.Jet(rk.space, rk.c[k]) * v[n + k].truncate(2) for k in range(n))
            yk = J.stack([vv.truncate(2) for vv in v[n:]])
            Gt = J.Jet(G.space, G.c + (J.stack([theta] * n) * yk).c
                       - 0.5 * (J.stack([E] * n) * J.matvec(ginv, rk)).c)
        else:
            Gt = G
        yv = range(n, 2 * n)
        out = SprayData(G=Gt.c[..., 0].copy(), N=J.derivatives(Gt, yv, 1), Gamma_b=J.derivatives(Gt, yv, 2))
    elif path == "specialized":
        b = _paper_base(base, rho)
        _, rk, _ = _rho_jet(rho, x, 1)
        Gt = _specialized_spray_jets(b, rk, y, 2)
        yv = range(n)
        out = SprayData(G=Gt.c[..., 0].copy(), N=J.derivatives(Gt, yv, 1), Gamma_b=J.derivatives(Gt, yv, 2))
    else:
        raise ValueError(f"unknown conformal spray path {path!r}")
    if check:
        direct = spray(ConformalScale(base, rho), x, y)
        scale = max(1.0, float(np.max(np.abs(direct.G))))
        err = max(float(np.max(np.abs(out.G - direct.G))), float(np.max(np.abs(out.N - direct.N))))
        if err > tol * scale:
            raise SpecializationMismatch("conformal spray disagrees with direct differentiation",
                                         path=path, error=err)
    return out


def conformal_connection(base: MetricSpec, rho: ex.Expr, x, y) -> np.ndarray:
    """N~^i_j = N^i_j + rho_k y^k d^i_j + rho_j y^i - 1/2 (F^2)_{y^j} rho^i + F^2 C^{ik}_j rho_k,
    with C^{ik}_j = -1/2 dg^{ik}/dy^j."""
    x, y = check_point_vector(base, x, y)
    n = base.dim
    N = spray(base, x, y).N
    cd = conformal_data(base, rho, x, y)
    ct = cartan_tensor(base, x, y)
    ft = fundamental_tensor(base, x, y)
    F2 = float(y @ ft.g @ y)
    dF2 = 2.0 * ft.g @ y
    C_up = np.einsum("ia,kb,abj->ikj", ft.g_inv, ft.g_inv, ct.C)
    return (N + cd.theta * np.eye(n) + np.outer(y, cd.rho_k) - 0.5 * np.outer(cd.rho_up, dF2)
            + F2 * np.einsum("ikj,k->ij", C_up, cd.rho_k))


# ---------------------------------------------------------------------------
# S-curvature


def _paper_s_formula(b: float, rho_k: np.ndarray, y) -> float:
    """S~ = -1/2 rho_k [(alpha_{y^i} beta - alpha beta_{y^i}) alpha^{ik}
    - b^i y^k (alpha_{y^i}(beta - alpha) - 2 alpha beta_{y^i}) / F + (n-1) y^k (b^2 alpha + beta) / F]."""
    n = len(y)
    y = np.asarray(y, dtype=float)
    split = alpha_beta_split(b, n)
    alpha = math.sqrt(y @ split.alpha_matrix @ y)
    beta = float(split.beta_covector @ y)
    F = alpha + beta
    alpha_y = split.alpha_matrix @ y / alpha
    beta_y = split.beta_covector
    t1 = (alpha_y * beta - alpha * beta_y) @ split.alpha_inv
    t2 = (split.beta_vector @ (alpha_y * (beta - alpha) - 2 * alpha * beta_y)) * y / F
    t3 = (n - 1) * y * (b * b * alpha + beta) / F
    return float(-0.5 * rho_k @ (t1 - t2 + t3))


def s_curvature(metric: MetricSpec, x, y, method: str = "generic", density: str = "auto") -> float:
    """S(x, y) = dG^i/dy^i - y^i d/dx^i ln sigma_BH(x).

    Methods: ``generic`` (spray divergence plus the density gradient, by
    ``density`` = auto closed forms or quadrature differences),
    ``conformal_shortcut`` (S~ = S + F^2 rho^k I_k for a conformal scale) and
    ``paper_formula`` (expanded closed form for the conformal Randers-Minkowski metric).
    """
    x, y = check_point_vector(metric, x, y)
    if method == "generic":
        G, _, _ = spray_jets(metric, x, y, 1)
        div = float(sum(G.partial(metric.dim + i)[i] for i in range(metric.dim)))
        return div - float(y @ log_density_gradient(metric, x, density))
    if not isinstance(metric, ConformalScale):
        if method == "paper_formula" and vertical_wind_strength(metric) is not None:
            return 0.0
        raise InvalidParameter(f"method {method!r} needs a conformally scaled metric")
    base, rho = metric.inner, metric.rho
    if method == "conformal_shortcut":
        cd = conformal_data(base, rho, x, y)
        ct = cartan_tensor(base, x, y)
        F2 = float(y @ fundamental_tensor(base, x, y).g @ y)
        return s_curvature(base, x, y, "generic", density) + F2 * float(cd.rho_up @ ct.I)
    if method == "paper_formula":
        b = _paper_base(base, rho)
        _, rk, _ = _rho_jet(rho, x, 1)
        return _paper_s_formula(b, rk, y)
    raise ValueError(f"unknown S-curvature method {method!r}")


def s_curvature_checked(metric: MetricSpec, x, y, tol: float = 1e-6) -> dict:
    """Evaluate every applicable method and raise :class:`MethodMismatch` if they disagree."""
    methods = ["generic"]
    if isinstance(metric, ConformalScale):
        methods.append("conformal_shortcut")
        try:
            _paper_base(metric.inner, metric.rho)
            methods.append("paper_formula")
        except InvalidParameter:
            pass
    values = {m: s_curvature(metric, x, y, m, density="quadrature" if m == "generic" else "auto")
              for m in methods}
    spread = max(values.values()) - min(values.values())
    if spread > tol:
        raise MethodMismatch("S-curvature methods disagree", values=values, spread=spread)
    return values
