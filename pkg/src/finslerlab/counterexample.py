"""The conformally flat Randers manifold whose horizontal hyperplanes have
vanishing principal curvatures but are not isoparametric, with a one-shot
check of every quantitative claim made about it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import InvalidParameter
from .geodesics import integrate_geodesic
from .hypersurface import LevelSet, hyperplane, isoparametric_verdict, parallel_flow, shape_operator
from .metric import ConformalScale, MetricSpec
from .randers import minkowski_randers
from .spray import ricci, s_curvature

DEFAULT_TOLERANCES = {
    "closed_form": 1e-6,  # relative, closed form against AD
    "finite_difference": 2e-2,  # relative, derivative claims
    "geodesic": 1e-8,
    "shape": 1e-8,
    "s_curvature": 1e-8,
    "spread": 0.5,  # minimum spread of the mean curvature across M_t
}


def conformal_factor(n: int) -> ex.Expr:
    """rho = sum over a < n of ln(2 + cos(pi x^a))."""
    return ex.add(*[ex.ln(2 + ex.cos(ex.PI * ex.coord(a))) for a in range(n - 1)])


@dataclass(frozen=True)
class PaperInstance:
    n: int
    b: float
    x0n: float
    metric: MetricSpec

    @property
    def hypersurface(self) -> LevelSet:
        return hyperplane(self.n, self.x0n)

    def lattice_point(self, m) -> np.ndarray:
        return np.array([*map(float, m), self.x0n])

    @property
    def u1(self) -> np.ndarray:
        """All lateral entries even: rho = (n-1) ln 3."""
        return self.lattice_point([0] * (self.n - 1))

    @property
    def u2(self) -> np.ndarray:
        """All lateral entries odd: rho = 0."""
        return self.lattice_point([1] * (self.n - 1))

    def rho(self, x) -> float:
        xa = np.asarray(x, dtype=float)[: self.n - 1]
        return float(np.sum(np.log(2.0 + np.cos(math.pi * xa))))

    def normal(self, x) -> np.ndarray:
        """(1 + b) e^{-rho} d/dx^n, the unit normal of the hyperplane at x."""
        out = np.zeros(self.n)
        out[-1] = (1.0 + self.b) * math.exp(-self.rho(x))
        return out

    def ricci_u1(self) -> float:
        return 3.0 ** (-2 * self.n + 1) * (1.0 + self.b) * math.pi ** 2 * (self.n - 1)

    def ricci_u2(self) -> float:
        return -(1.0 + self.b) * math.pi ** 2 * (self.n - 1)


def build_paper_metric(n: int, b: float, x0n: float = 0.0) -> PaperInstance:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidParameter("dimension must be an integer >= 2", n=n)
    if not 0.0 <= b < 1.0:
        raise InvalidParameter("wind strength must satisfy 0 <= b < 1", b=b)
    metric = ConformalScale(minkowski_randers(int(n), float(b)), conformal_factor(int(n)))
    return PaperInstance(n=int(n), b=float(b), x0n=float(x0n), metric=metric)


@dataclass(frozen=True)
class Claim:
    name: str
    expected: object
    computed: object
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "expected": self.expected, "computed": self.computed,
                "tolerance": self.tolerance, "pass": self.passed}


@dataclass(frozen=True)
class ClaimReport:
    n: int
    b: float
    claims: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.claims)

    def to_dict(self) -> dict:
        return {"n": self.n, "b": self.b, "overall": self.overall, "claims": [c.to_dict() for c in self.claims]}


def sample_points(inst: PaperInstance, count: int = 20, seed: int = 0) -> np.ndarray:
    """Both lattice corners, then random points of M with x^a in [-2, 2]."""
    rng = np.random.default_rng(seed)
    rand = rng.uniform(-2.0, 2.0, size=(count - 2, inst.n))
    rand[:, -1] = inst.x0n
    return np.vstack([inst.u1, inst.u2, rand])


def _relative(value, target):
    return abs(value - target) / abs(target)


def verify_paper_claims(inst: PaperInstance, tolerances: dict | None = None) -> ClaimReport:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    unknown = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise InvalidParameter("unknown tolerance keys", keys=sorted(unknown))
    M = inst.hypersurface
    pts = sample_points(inst)
    claims = []

    # normal geodesics through lattice points are straight vertical lines
    worst = 0.0
    for u in (inst.u1, inst.u2):
        tr = integrate_geodesic(inst.metric, u, inst.normal(u), 1.0)
        lateral = float(np.max(np.abs(tr.x[:, :-1] - u[:-1])))
        rise = tr.x[-1, -1] - inst.x0n
        worst = max(worst, lateral, abs(rise - inst.normal(u)[-1]))
    claims.append(Claim("lattice_geodesic", 0.0, worst, tol["geodesic"], worst < tol["geodesic"]))

    shapes = [shape_operator(inst.metric, M, x) for x in pts]
    mu = float(max(max(np.max(np.abs(r.A)), r.normal_leak) for r in shapes))
    claims.append(Claim("vanishing_shape_operator", 0.0, mu, tol["shape"], mu < tol["shape"]))

    for name, point, target in (("ricci_u1", inst.u1, inst.ricci_u1()), ("ricci_u2", inst.u2, inst.ricci_u2())):
        value = ricci(inst.metric, point, inst.normal(point))
        ok = _relative(value, target) < tol["closed_form"] and np.sign(value) == np.sign(target) \
            and abs(value) > 10 * tol["closed_form"]
        claims.append(Claim(name, target, value, tol["closed_form"], bool(ok)))

    s_max = float(max(abs(s_curvature(inst.metric, x, r.normal)) for x, r in zip(pts, shapes)))
    claims.append(Claim("s_curvature_normal_zero", 0.0, s_max, tol["s_curvature"], s_max < tol["s_curvature"]))

    # Riccati trace at t = 0 and the spread of the mean curvature on M_0.1
    flow = parallel_flow(inst.metric, M, [inst.u1, inst.u2], [0.0, 0.01, 0.1], fd_step=1e-3)
    fd = [c.fd_derivative for c in flow.trace_check]
    err = max(c.relative_error for c in flow.trace_check)
    signs = fd[0] > 0 > fd[1]
    spread01 = float(np.ptp(flow.H_aniso[-1]))
    ok = err < tol["finite_difference"] and signs and spread01 > tol["spread"]
    claims.append(Claim("parallel_mean_curvature_not_constant",
                        {"dH_dt": [inst.ricci_u1(), inst.ricci_u2()], "min_spread_t0.1": tol["spread"]},
                        {"dH_dt": fd, "relative_error": err, "spread_t0.1": spread01},
                        tol["finite_difference"], bool(ok)))

    verdict = isoparametric_verdict(inst.metric, M, seeds=pts[:8])
    ok = not verdict.is_isoparametric and not verdict.is_dmu_isoparametric
    claims.append(Claim("not_isoparametric", {"isoparametric": False, "dmu_isoparametric": False},
                        {"isoparametric": verdict.is_isoparametric,
                         "dmu_isoparametric": verdict.is_dmu_isoparametric,
                         "max_spread_aniso": verdict.max_spread_aniso,
                         "max_spread_mu": verdict.max_spread_mu},
                        0.0, bool(ok)))
    return ClaimReport(n=inst.n, b=inst.b, claims=claims)
