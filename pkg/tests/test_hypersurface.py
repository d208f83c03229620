import csv
import io

import numpy as np
import pytest

from finslerlab.errors import CriticalPoint, FocalPoint, InvalidParameter
from finslerlab.geodesics import integrate_geodesic
from finslerlab.hypersurface import (
    Graph,
    LevelSet,
    hyperplane,
    isoparametric_verdict,
    parallel_flow,
    project,
    sample_hypersurface,
    shape_operator,
    sphere,
    tangent_basis,
)
from finslerlab.metric import EuclideanBase, eval_F, fundamental_tensor
from finslerlab.randers import navigate
from finslerlab.spray import s_curvature


def _on_sphere(radius, theta, phi):
    return radius * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def test_hypersurface_descriptions():
    assert hyperplane(3, 0.5).value == 0.5
    with pytest.raises(InvalidParameter):
        Graph("x3 + x1", 3)
    with pytest.raises(InvalidParameter):
        LevelSet("x1", 0.0, 2)
    np.testing.assert_allclose(project(sphere(3, 2.0), [[3.0, 0.0, 0.0]]), [[2.0, 0.0, 0.0]], atol=1e-14)
    B = tangent_basis(np.array([1.0, 2.0, 2.0]))
    np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.array([1.0, 2.0, 2.0]) @ B, 0.0, atol=1e-15)


def test_euclidean_sphere():
    rep = shape_operator(EuclideanBase(3), sphere(3, 2.0), _on_sphere(2.0, 0.8, 2.1))
    np.testing.assert_allclose(rep.principal, [0.5, 0.5], atol=1e-12)
    assert rep.H_aniso == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(rep.normal, -_on_sphere(1.0, 0.8, 2.1), atol=1e-14)
    outward = shape_operator(EuclideanBase(3), sphere(3, 2.0, inward=False), _on_sphere(2.0, 0.8, 2.1))
    np.testing.assert_allclose(outward.principal, [-0.5, -0.5], atol=1e-12)


def test_randers_sphere_has_euclidean_curvatures(randers):
    rep = shape_operator(randers, sphere(3, 2.0), _on_sphere(2.0, 1.1, -0.3))
    np.testing.assert_allclose(rep.principal, [0.5, 0.5], atol=1e-8)


def test_paraboloid_graph():
    rep = shape_operator(EuclideanBase(3), Graph("0.5 * (x1**2 + x2**2)", 3), [0, 0, 0])
    np.testing.assert_allclose(rep.principal, [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(rep.normal, [0, 0, 1], atol=1e-14)


def test_conformal_hyperplane_is_totally_geodesic(conformal, rng):
    for x in np.column_stack([rng.uniform(-2, 2, (6, 2)), np.zeros(6)]):
        rep = shape_operator(conformal.metric, conformal.hypersurface, x)
        assert np.max(np.abs(rep.A)) < 1e-8
        assert rep.normal_leak < 1e-12


def test_frame_is_orthonormal_and_operator_symmetric(conformal, rng):
    hyp = Graph("0.3 * sin(x1) * x2 + 0.1 * x1**2", 3)
    for _ in range(5):
        x = project(hyp, [[*rng.uniform(-1, 1, 2), 0.0]])[0]
        rep = shape_operator(conformal.metric, hyp, x)
        g = fundamental_tensor(conformal.metric, x, rep.normal).g
        E = rep.tangent_frame
        assert eval_F(conformal.metric, x, rep.normal) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(E @ g @ rep.normal, 0.0, atol=1e-12)
        np.testing.assert_allclose(E @ g @ E.T, np.eye(2), atol=1e-12)
        assert rep.asymmetry < 1e-9
        assert rep.H_mu - rep.H_aniso == rep.S_normal
        assert rep.S_normal == pytest.approx(s_curvature(conformal.metric, x, rep.normal), abs=1e-10)


def test_navigation_normal_is_shifted_by_the_wind(rng):
    metric = navigate(3, [0.1, -0.2, 0.3])
    hyp = Graph("0.2 * x1 * x2 - 0.1 * x2**2", 3)
    for _ in range(3):
        x = project(hyp, [[*rng.uniform(-1, 1, 2), 0.0]])[0]
        df = np.array([-0.2 * x[1], -0.2 * x[0] + 0.2 * x[1], 1.0])
        riem = df / np.linalg.norm(df)
        np.testing.assert_allclose(shape_operator(metric, hyp, x).normal, riem + [0.1, -0.2, 0.3], atol=1e-9)


def test_critical_level_set(conformal):
    with pytest.raises(CriticalPoint):
        shape_operator(conformal.metric, LevelSet("x1**2 + x2**2 + x3**2", 0.0), [0, 0, 0])


# ---- parallel flow --------------------------------------------------------

def test_flow_start_is_the_shape_operator(conformal):
    seed = np.array([0.3, 0.7, 0.0])
    rep = parallel_flow(conformal.metric, conformal.hypersurface, [seed], [0.0, 0.05])
    direct = shape_operator(conformal.metric, conformal.hypersurface, seed)
    np.testing.assert_array_equal(rep.reports[0][0].A, direct.A)
    assert rep.reports[0][0].H_mu == direct.H_mu


def test_flowed_points_follow_normal_geodesics(conformal):
    seed = np.array([0.3, 0.7, 0.0])
    t_grid = [0.0, 0.1, 0.2]
    rep = parallel_flow(conformal.metric, conformal.hypersurface, [seed], t_grid)
    tr = integrate_geodesic(conformal.metric, seed, conformal.normal(seed), 0.2)
    for k, t in enumerate(t_grid):
        x, _ = tr.at(t)
        np.testing.assert_allclose(rep.reports[k][0].point, x, atol=1e-9)


def test_minkowski_hyperplanes_stay_flat(randers):
    rep = parallel_flow(randers, hyperplane(3, 0.0), [[0, 0, 0], [1.3, -0.4, 0]], [0.0, 0.5, 1.0])
    assert np.max(np.abs(rep.H_aniso)) < 1e-6
    assert max(rep.constancy()["H_aniso"]) < 1e-6


def test_euclidean_sphere_flow():
    t_grid = np.array([0.0, 0.25, 0.5, 1.0])
    seeds = [_on_sphere(2.0, 0.4, 0.1), _on_sphere(2.0, 2.0, -1.2)]
    rep = parallel_flow(EuclideanBase(3), sphere(3, 2.0), seeds, t_grid)
    for k, t in enumerate(t_grid):
        np.testing.assert_allclose(rep.H_aniso[k], 2.0 / (2.0 - t), rtol=1e-5)


def test_focal_point():
    seeds = [_on_sphere(0.5, 0.7, 0.2)]
    t_grid = np.linspace(0, 0.6, 7)
    with pytest.raises(FocalPoint) as info:
        parallel_flow(EuclideanBase(3), sphere(3, 0.5), seeds, t_grid)
    assert info.value.context["t"] == pytest.approx(0.5)
    rep = parallel_flow(EuclideanBase(3), sphere(3, 0.5), seeds, t_grid, focal="truncate")
    assert rep.focal_time == pytest.approx(0.5)
    np.testing.assert_allclose(rep.t_grid, t_grid[:5])


def test_flow_grid_is_validated(conformal):
    with pytest.raises(InvalidParameter):
        parallel_flow(conformal.metric, conformal.hypersurface, [conformal.u1], [0.1, 0.2])
    with pytest.raises(InvalidParameter):
        parallel_flow(conformal.metric, conformal.hypersurface, [conformal.u1], [0.0, 0.2, 0.1])


def test_trace_riccati_check_on_lattice(conformal):
    rep = parallel_flow(conformal.metric, conformal.hypersurface, [conformal.u1, conformal.u2], [0.0, 0.01], fd_step=1e-3)
    for check in rep.trace_check:
        assert check.sum_mu_squared < 1e-16
        assert check.relative_error < 2e-2
    assert rep.trace_check[0].fd_derivative > 0 > rep.trace_check[1].fd_derivative


def test_principal_curvatures_obey_the_matrix_riccati_equation(conformal):
    # with A(0) = 0 the flag curvatures K(n, e_a) are the initial slopes of mu_a;
    # at the lattice the frame is symmetric so both slopes equal Ric / 2
    dt = 1e-3
    rep = parallel_flow(conformal.metric, conformal.hypersurface, [conformal.u1, conformal.u2], [0.0, dt], fd_step=1e-3)
    for s, ric in enumerate((conformal.ricci_u1(), conformal.ricci_u2())):
        np.testing.assert_allclose(rep.reports[1][s].principal / dt, ric / 2, rtol=2e-2)


def test_flow_csv_and_json(conformal):
    rep = parallel_flow(conformal.metric, conformal.hypersurface, [conformal.u1, conformal.u2], [0.0, 0.1])
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["t", "seed_id", "x1", "x2", "x3", "mu_1", "mu_2", "H_aniso", "S_normal", "H_mu"]
    assert len(rows) == 1 + 2 * 2
    doc = rep.to_dict()
    assert doc["focal_time"] is None and len(doc["trace_check"]) == 2


# ---- verdicts -------------------------------------------------------------

def test_verdicts(conformal, randers):
    assert not isoparametric_verdict(conformal.metric, conformal.hypersurface, samples=6, steps=5).is_isoparametric
    v = isoparametric_verdict(EuclideanBase(3), sphere(3, 1.0), samples=6, steps=5, region=([-1] * 3, [1] * 3))
    assert v.is_isoparametric and v.is_dmu_isoparametric
    v = isoparametric_verdict(randers, hyperplane(3, 0.7), samples=6, steps=5)
    assert v.is_isoparametric and v.is_dmu_isoparametric
    assert set(v.to_dict()) == {"is_isoparametric", "is_dmu_isoparametric", "max_spread_aniso",
                                "max_spread_mu", "evidence"}


def test_sample_hypersurface_lands_on_it():
    pts = sample_hypersurface(sphere(3, 1.5), ([-1] * 3, [1] * 3), 10)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.5, rtol=1e-14)
