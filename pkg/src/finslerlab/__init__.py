"""Numerical Finsler geometry: metrics, sprays, curvature, hypersurfaces and
the conformal Randers counterexample to constant-curvature isoparametricity."""

from .counterexample import PaperInstance, build_paper_metric, verify_paper_claims
from .errors import FinslerError
from .geodesics import field_analysis, integrate_geodesic, isoparametric_function_check
from .hypersurface import Graph, LevelSet, hyperplane, isoparametric_verdict, parallel_flow, shape_operator, sphere
from .metric import (
    ConformalScale,
    EuclideanBase,
    RandersNavigation,
    RiemannianSpec,
    cartan_tensor,
    eval_F,
    fundamental_tensor,
    legendre,
    legendre_inverse,
)
from .randers import closed_form_tensor, minkowski_randers, navigate, normal_and_curvature_shift
from .spray import conformal_spray, paper_ricci_normal, riemann_ricci_flag, s_curvature, spray
from .volume import bh_density

__all__ = [
    "ConformalScale", "EuclideanBase", "FinslerError", "Graph", "LevelSet", "PaperInstance",
    "RandersNavigation", "RiemannianSpec", "bh_density", "build_paper_metric", "cartan_tensor",
    "closed_form_tensor", "conformal_spray", "eval_F", "field_analysis", "fundamental_tensor",
    "hyperplane", "integrate_geodesic", "isoparametric_function_check", "isoparametric_verdict",
    "legendre", "legendre_inverse", "minkowski_randers", "navigate", "normal_and_curvature_shift",
    "paper_ricci_normal", "parallel_flow", "riemann_ricci_flag", "s_curvature", "shape_operator",
    "sphere", "spray", "verify_paper_claims",
]
