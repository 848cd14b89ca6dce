import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nematic_gamma.domain import SurfaceMesh
from nematic_gamma.geometry import DefectGeometry, circle, disk_mesh, square_mesh, uv_sphere
from nematic_gamma.limit_energy import (PRESETS, ConsistencyError, UnsupportedGeometryError,
                                        admissibility_residual, check_convex,
                                        convex_projection_reduce, curvature_diagnostics,
                                        e0_surface_base, e0_total, mean_curvature,
                                        polyline_curvature, preset_geometry, preset_tradeoff,
                                        young_law_residual)


def sphere(radius=1.0, n_lat=65, n_lon=128):
    V, F, N = uv_sphere(radius, n_lat, n_lon)
    return SurfaceMesh(V, F, N)


@pytest.fixture(scope="module")
def unit():
    return sphere()


def test_unit_sphere_base_is_2pi(unit):
    assert abs(e0_surface_base(unit) / (2 * math.pi) - 1) < 1e-3


def test_base_is_symmetric_under_z_reflection(unit):
    flipped = SurfaceMesh(unit.vertices * [1, 1, -1], unit.faces[:, ::-1], unit.normals * [1, 1, -1])
    assert math.isclose(e0_surface_base(flipped), e0_surface_base(unit), rel_tol=1e-12)


def test_radius_two_scales_by_four(unit):
    assert math.isclose(e0_surface_base(sphere(2.0)), 4 * e0_surface_base(unit), rel_tol=1e-12)


def test_equator_example(unit, mat):
    geom = preset_geometry("stuck", unit, n=1024)
    e = e0_total(geom, unit, mat, 1.0)
    sc = mat.s_star * mat.c_star
    assert abs(e.term_line / (0.5 * math.pi * mat.s_star**2 * 2 * math.pi) - 1) < 1e-4
    assert abs(e.total / (2 * sc * 2 * math.pi + e.term_line) - 1) < 1e-3
    assert e.term_G == 0 and e.term_bulkT == 0 and not e.flags


def test_line_term_is_linear_in_beta(unit, mat):
    geom = preset_geometry("stuck", unit)
    lines = [e0_total(geom, unit, mat, b).term_line for b in (0.5, 1.0, 3.0)]
    assert math.isclose(lines[0] * 2, lines[1]) and math.isclose(lines[0] * 6, lines[2])


def test_additivity_without_particle(mat):
    V, F = disk_mesh(1.0, center=(0, 0, 5))
    a = DefectGeometry([circle(1.0, (0, 0, 5))], V, F)
    b = DefectGeometry([circle(0.5, (3, 0, 0))])
    ea, eb = (e0_total(g, None, mat, 0.7).total for g in (a, b))
    assert math.isclose(e0_total(a.union(b), None, mat, 0.7).total, ea + eb, rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_forms_agree_on_random_geometries(seed):
    from nematic_gamma.potentials import MaterialParams
    rng = np.random.default_rng(seed)
    mesh = _SMALL
    G = rng.random(len(mesh.vertices)) < rng.random()
    S = [circle(rng.uniform(0.1, 2), rng.normal(size=3), rng.normal(size=3), n=32)]
    geom = DefectGeometry(S, G=G)
    e = e0_total(geom, mesh, MaterialParams(*rng.uniform(0.5, 2, 3)), rng.uniform(0.1, 5),
                 check_boundary=False)
    assert math.isclose(e.total, e.total_F_form, rel_tol=1e-9)


_SMALL = sphere(1.0, 17, 32)


def test_G_size_mismatch_is_rejected(unit, mat):
    with pytest.raises(ValueError):
        e0_total(DefectGeometry([], G=np.zeros(3, bool)), unit, mat, 1.0)


def test_admissibility(unit, mat):
    assert admissibility_residual(preset_geometry("stuck", unit), unit) < 0.05
    assert admissibility_residual(preset_geometry("glued", unit), unit) < 0.05
    bad = DefectGeometry([circle(0.5, (0, 0, 1.5))])
    assert e0_total(bad, unit, mat, 1.0).flags


@pytest.mark.parametrize("name", PRESETS)
def test_presets_match_closed_form_tradeoff(unit, mat, name):
    beta = 1.3
    stuck = e0_total(preset_geometry("stuck", unit, n=1024), unit, mat, beta, check_boundary=False)
    e = e0_total(preset_geometry(name, unit, n=1024), unit, mat, beta, check_boundary=False)
    saving, added = preset_tradeoff(name, mat, beta)
    # vertex quadrature of G carries an O(h) error along its boundary
    assert abs((stuck.total - e.total) - (saving - added)) < 0.02 * max(added, 1.0)


def test_projection_does_not_increase_energy(unit, mat):
    geom = preset_geometry("detached", unit)
    res = convex_projection_reduce(geom, unit, mat, 2.0)
    assert res.after.total <= res.before.total
    assert res.geometry.mass_T == 0
    with pytest.raises(ValueError):
        preset_geometry("floating", unit)


def test_projection_needs_convex_particle(mat):
    V, F = square_mesh((-1, -1), (1, 1), n=8)
    V = V.copy()
    V[:, 2] = -np.cos(V[:, 0]) * 0.3  # saddle-free but concave upward
    N = np.tile([0, 0, 1.0], (len(V), 1))
    mesh = SurfaceMesh(V, F, N)
    assert not check_convex(mesh)[0]
    with pytest.raises(UnsupportedGeometryError):
        convex_projection_reduce(DefectGeometry([]), mesh, mat, 1.0)


def test_curvature_tools(unit, mat):
    _, H, bad = mean_curvature(unit.vertices, unit.faces)
    assert abs(np.median(H) - 1) < 0.02
    k = polyline_curvature(circle(2.0, n=256))
    assert np.allclose(k, 0.5, rtol=1e-3)
    V, F = disk_mesh(1.0)
    rep = curvature_diagnostics(DefectGeometry([circle(1.0)], V, F), mat, 1.0)
    assert rep.T_max_abs_H < 1e-9
    assert abs(rep.S_mean_kappa - 1) < 1e-3
    assert math.isclose(rep.S_target, 8 / math.pi * mat.c_star / mat.s_star)


def test_young_law_on_stuck_ring_is_vacuous(unit):
    rep = young_law_residual(preset_geometry("stuck", unit), unit)
    assert len(rep.points) == 0 or np.all(np.isfinite(rep.residual))


def test_consistency_error_is_a_runtime_error():
    assert issubclass(ConsistencyError, RuntimeError)
