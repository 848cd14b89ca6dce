import math

import numpy as np
import pytest

from nematic_gamma.domain import (GeometryError, ParticleShape, build_box, build_domain,
                                  extend_normal, gamma_curve, gradient_norm_check, read_obj,
                                  read_volume, surface_mesh, write_obj, write_volume)


@pytest.fixture(scope="module")
def sphere_domain():
    shape = ParticleShape.sphere(1.0)
    grid, mesh = build_domain(shape, ([-1.75] * 3, [1.75] * 3), 0.125)
    return shape, grid, mesh


def test_sphere_sdf_and_normal():
    s = ParticleShape.sphere(2.0, (1, 0, 0))
    p = np.array([[4.0, 0, 0], [1, 0, 3]])
    assert np.allclose(s.sdf(p), [1.0, 1.0])
    assert np.allclose(s.normal(p), [[1, 0, 0], [0, 0, 1]], atol=1e-8)
    assert math.isclose(s.r0(), 2.0)


def test_ellipsoid_sdf_is_a_distance():
    e = ParticleShape.ellipsoid((2.0, 1.0, 0.5))
    assert np.allclose(e.sdf(np.array([[3.0, 0, 0], [0, 0, 1.5], [0, 1, 0]])), [1.0, 1.0, 0.0], atol=1e-8)
    # Thomsen's approximation is good to about 1%
    p = 1.6075
    a, b, c = 2.0, 1.0, 0.5
    approx = 4 * math.pi * (((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3) ** (1 / p)
    assert abs(e.area_reference() / approx - 1) < 0.015


def test_mesh_area_and_gamma(sphere_domain):
    _, _, mesh = sphere_domain
    assert abs(mesh.area / (4 * math.pi) - 1) < 0.01
    curves, length = gamma_curve(mesh)
    assert len(curves) == 1
    assert abs(length / (2 * math.pi) - 1) < 0.01
    assert np.allclose(curves[0][0], curves[0][-1])


def test_grid_masks_and_sdf(sphere_domain):
    shape, grid, _ = sphere_domain
    counts = grid.counts()
    assert counts["interior"] > 0 and counts["far"] > 0
    assert gradient_norm_check(shape, grid) < 0.05


def test_domain_rejects_bad_boxes():
    shape = ParticleShape.sphere(1.0)
    with pytest.raises(GeometryError):
        build_domain(shape, ([-0.5] * 3, [2] * 3), 0.1)
    with pytest.raises(GeometryError):
        build_domain(shape, ([-2] * 3, [2] * 3), 0.5)


def test_periodic_box_tiles_exactly():
    g = build_box(([0, 0, 0], [1, 1, 1]), 0.25, periodic=(False, False, True))
    assert g.shape == (5, 5, 4)


def test_normal_extension_blends_to_e1():
    shape = ParticleShape.sphere(1.0)
    pts = np.array([[1.1, 0, 0], [0, 0, 10.0]])
    ext = extend_normal(shape, pts)
    assert np.allclose(ext.v[0], [1, 0, 0])
    assert np.allclose(ext.v[1], [1, 0, 0])


def test_volume_round_trip(tmp_path, rng):
    data = rng.standard_normal((3, 4, 5, 5))
    p = tmp_path / "q.vol"
    write_volume(p, data, 0.5, extra=[1.0, 2.0])
    back, h, extra = read_volume(p, components=5, extra=2)
    assert h == 0.5 and np.array_equal(back, data) and np.array_equal(extra, [1.0, 2.0])


def test_obj_round_trip(tmp_path):
    mesh = surface_mesh(ParticleShape.sphere(1.0), 0.25)
    p = tmp_path / "m.obj"
    write_obj(p, mesh.vertices, mesh.faces, comments=["sphere"])
    V, F = read_obj(p)
    assert np.array_equal(V, mesh.vertices) and np.array_equal(F, mesh.faces)
