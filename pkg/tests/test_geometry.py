import math

import numpy as np
from hypothesis import given, settings, strategies as st

from nematic_gamma.geometry import (DefectGeometry, PolylineLocator, TriangleLocator, boundary_edges,
                                    circle, closest_point_on_triangles, disk_mesh, is_closed,
                                    orient_faces, polyline_length, triangle_areas, uv_sphere, weld)


def test_circle_is_closed_with_expected_length():
    c = circle(2.0, center=(1, 0, 0), normal=(0, 1, 1), n=512)
    assert is_closed(c)
    assert abs(polyline_length(c) / (4 * math.pi) - 1) < 1e-4
    assert np.allclose(np.linalg.norm(c - [1, 0, 0], axis=1), 2.0)


def test_disk_boundary_is_the_rim():
    V, F = disk_mesh(1.0, rings=6, sectors=32)
    e = boundary_edges(F)
    assert len(e) == 32
    assert np.allclose(np.linalg.norm(V[e.ravel()], axis=1), 1.0)
    assert abs(triangle_areas(V, F).sum() / math.pi - 1) < 0.01


def test_sphere_is_closed():
    V, F, N = uv_sphere(1.0, 16, 32)
    assert len(boundary_edges(F)) == 0
    assert np.allclose(np.linalg.norm(V, axis=1), 1.0)


def test_weld_merges_duplicates():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1e-12, 0, 0], [1, 1, 0], [1, 0, 1e-12]], float)
    F = np.array([[0, 1, 2], [3, 4, 5]])
    V2, F2 = weld(V, F, 1e-9)
    assert len(V2) == 4 and len(F2) == 2
    assert len(boundary_edges(F2)) == 4


def test_orient_faces_makes_neighbours_consistent():
    V, F = disk_mesh(1.0, rings=3, sectors=12)
    F = F.copy()
    F[::3] = F[::3, ::-1]
    G, comp = orient_faces(F)
    n = np.cross(V[G[:, 1]] - V[G[:, 0]], V[G[:, 2]] - V[G[:, 0]])[:, 2]
    assert np.all(n > 0) or np.all(n < 0)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_closest_point_beats_vertices(p):
    a, b, c = np.array([0, 0, 0.0]), np.array([1, 0, 0.0]), np.array([0, 1, 0.0])
    p = np.array(p)
    q = closest_point_on_triangles(p, a, b, c)
    d = np.linalg.norm(q - p)
    assert all(d <= np.linalg.norm(v - p) + 1e-12 for v in (a, b, c))
    assert q[2] == 0 and q[0] >= -1e-12 and q[1] >= -1e-12 and q[0] + q[1] <= 1 + 1e-12


def test_locators():
    V, F = disk_mesh(1.0, rings=4, sectors=16)
    foot, d, sd, fi = TriangleLocator(V, F).query(np.array([[0.1, 0.2, 0.5], [0.0, 0.0, -0.25]]))
    assert np.allclose(d, [0.5, 0.25])
    assert np.sign(sd[0]) == -np.sign(sd[1])
    foot, d, t = PolylineLocator([circle(1.0)]).query(np.array([[0.0, 0.0, 1.0]]))
    assert abs(d[0] - math.sqrt(2)) < 1e-3


def test_union_adds_masses():
    V, F = disk_mesh(1.0, rings=4, sectors=16)
    a = DefectGeometry([circle(1.0)], V, F)
    b = DefectGeometry([circle(0.5)])
    u = a.union(b)
    assert math.isclose(u.mass_S, a.mass_S + b.mass_S)
    assert math.isclose(u.mass_T, a.mass_T)
