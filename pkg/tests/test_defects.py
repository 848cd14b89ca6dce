import math

import numpy as np
import pytest

from nematic_gamma import qtensor as qt
from nematic_gamma.defects import (Thresholds, boundary_residual, extract_S, extract_T,
                                   line_energy_density, region_F, sample_Y, write_S)
from nematic_gamma.domain import SurfaceMesh, build_box
from nematic_gamma.geometry import uv_sphere
from nematic_gamma.io import read_polylines
from nematic_gamma.potentials import regime_from_beta
from nematic_gamma.relax import QField


def tilt_field(h=0.1):
    """Director rotating in the xz plane, horizontal exactly on z = 0."""
    r = regime_from_beta(1.0, 0.3)
    grid = build_box(([-0.5, -0.5, -0.4], [0.5, 0.5, 0.4]), h, centered=True)
    z = grid.points()[..., 2]
    n = np.stack([np.cos(np.pi * z), 0 * z, np.sin(np.pi * z)], -1)
    return QField(qt.uniaxial(n, 1.5), grid, r, np.zeros(grid.shape, bool))


def winding_field(h=0.05, depth=4):
    r = regime_from_beta(0.5, 0.2)
    grid = build_box(([-0.5, -0.5, 0], [0.5, 0.5, depth * h]), h, periodic=(False, False, True),
                     centered=True)
    P = grid.points()
    phi = np.arctan2(P[..., 1], P[..., 0])
    n = np.stack([np.cos(phi / 2), np.sin(phi / 2), 0 * phi], -1)
    return QField(qt.uniaxial(n, 1.5), grid, r, np.zeros(grid.shape, bool))


def test_straight_half_line_is_found():
    f = winding_field()
    lines = extract_S(f)
    assert len(lines.polylines) == 1
    p = lines.polylines[0]
    assert np.max(np.hypot(p[:, 0], p[:, 1])) < 0.5 * 0.05
    # periodic along z: one period of the box
    assert math.isclose(lines.length, 4 * 0.05, rel_tol=1e-6)


def test_uniform_field_has_no_defects():
    r = regime_from_beta(1.0, 0.3)
    grid = build_box(([0, 0, 0], [1, 1, 1]), 0.2)
    f = QField.constant(grid, r)
    assert extract_S(f).length == 0
    assert extract_T(f).area == 0


def test_horizontal_plane_is_T():
    f = tilt_field()
    surf = extract_T(f)
    assert np.max(np.abs(surf.vertices[:, 2])) < 1e-12
    lo, hi = f.grid.extent
    assert math.isclose(surf.area, (hi[0] - lo[0]) * (hi[1] - lo[1]), rel_tol=1e-9)
    assert surf.excluded == 0


def test_small_perturbation_keeps_plane():
    f = tilt_field()
    y = sample_Y(1e-3, seed=3)
    assert math.sqrt(qt.frob(y.Y)) <= 1e-3
    surf = extract_T(f, y)
    assert np.max(np.abs(surf.vertices[:, 2])) < 0.01


def test_sample_Y_rejects_negative():
    with pytest.raises(ValueError):
        sample_Y(-1.0)
    assert sample_Y(0.0).alpha == 0.0


def test_region_F_on_sphere():
    V, F, N = uv_sphere(1.0, 33, 64)  # odd: no vertex on the equator
    mesh = SurfaceMesh(V, F, N)
    R = region_F(mesh)
    assert math.isclose(R.area_F, R.area_Fc, rel_tol=1e-9)
    assert abs(R.boundary_length / (2 * np.pi) - 1) < 0.01
    R2 = region_F(mesh, np.ones(len(V), bool))
    assert np.array_equal(R2.F, ~R.F)


def test_boundary_residual_of_matching_curves():
    t = np.linspace(0, 2 * np.pi, 65)
    c = np.stack([np.cos(t), np.sin(t), 0 * t], -1)
    seg = np.stack([c[:-1], c[1:]], 1)
    assert boundary_residual(seg, [c]).max < 1e-9
    assert boundary_residual(np.zeros((0, 2, 3)), []).max == 0
    assert math.isinf(boundary_residual(seg, []).max)


def test_line_energy_density_is_finite():
    f = winding_field()
    rep = line_energy_density(f, extract_S(f).polylines, radius=0.2)
    assert rep.voxels > 0 and rep.ratio > 0


def test_write_S_round_trip(tmp_path):
    p = [np.random.default_rng(0).random((5, 3)), np.zeros((2, 3))]
    write_S(tmp_path / "S.txt", p)
    back = read_polylines(tmp_path / "S.txt")
    assert all(np.allclose(a, b) for a, b in zip(p, back))
