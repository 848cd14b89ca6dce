import math

import numpy as np
import pytest

from nematic_gamma import qtensor as qt
from nematic_gamma.domain import ParticleShape, build_box, build_domain
from nematic_gamma.potentials import regime_from_beta
from nematic_gamma.relax import (QField, ResolutionError, SolverConfig, StepFailure, clamp_ball,
                                 discrete_energy, discrete_gradient, energy_gradient, energy_terms,
                                 far_from_N_cover, load_checkpoint, minimize, mollify, pin_values,
                                 save_checkpoint)

REG = regime_from_beta(1.0, 0.3)


def random_field(rng, n=6, periodic=(False, False, False)):
    grid = build_box(([0, 0, 0], [1, 1, 1]), 1.0 / (n - 1), periodic=periodic)
    Q = REG.Q_inf + 0.2 * qt.sym0(rng.standard_normal(grid.shape + (3, 3)))
    return QField(Q, grid, REG, np.zeros(grid.shape, bool))


@pytest.mark.parametrize("periodic", [(False, False, False), (True, False, True)])
def test_gradient_matches_finite_differences(rng, periodic):
    f = random_field(rng, periodic=periodic)
    g = f.grid
    G = energy_gradient(f.Q, f.include, g.h, REG, g.periodic)
    D = qt.sym0(rng.standard_normal(f.Q.shape))
    eps = 1e-6
    Ep = energy_terms(f.Q + eps * D, f.include, g.h, REG, g.periodic)["total"]
    Em = energy_terms(f.Q - eps * D, f.include, g.h, REG, g.periodic)["total"]
    fd = (Ep - Em) / (2 * eps)
    assert math.isclose(fd, float(np.sum(G * D)), rel_tol=1e-5)


def test_uniform_far_field_is_critical():
    grid = build_box(([0, 0, 0], [1, 1, 1]), 0.25)
    f = QField.constant(grid, REG)
    assert np.max(np.abs(discrete_gradient(f))) < 1e-9
    # C0 normalizes the far-field density to zero
    assert abs(discrete_energy(f)["total"]) < 1e-9


def test_minimize_decreases_energy_and_keeps_pins(rng):
    f = random_field(rng)
    f.pinned[0] = True
    before = f.Q[f.pinned].copy()
    out, rep = minimize(f, SolverConfig(tol=1e-2, max_iter=2000))
    tr = [t["total"] for t in rep.trace]
    assert all(b <= a + 1e-9 for a, b in zip(tr, tr[1:]))
    assert np.array_equal(out.Q[out.pinned], before)
    assert rep.converged


def test_fixed_step_that_is_too_large_fails(rng):
    f = random_field(rng)
    with pytest.raises(StepFailure):
        minimize(f, SolverConfig(step_rule="fixed", dt=10.0, max_iter=5))


def test_pin_values_use_anchoring_near_surface():
    shape = ParticleShape.sphere(1.0)
    grid, _ = build_domain(shape, ([-1.75] * 3, [1.75] * 3), 0.125)
    f = pin_values(QField.constant(grid, REG), shape)
    assert np.isfinite(f.Q).all()
    i = np.argmin(np.abs(grid.points()[..., 0] - 1.0) + np.abs(grid.points()[..., 1]) + np.abs(grid.points()[..., 2]))
    idx = np.unravel_index(i, grid.shape)
    assert np.allclose(f.Q[idx], qt.uniaxial(np.array([1.0, 0, 0]), 1.5))


def test_clamp_and_mollify(rng):
    Q = qt.sym0(rng.standard_normal((10, 3, 3)))
    C = clamp_ball(Q, 0.5)
    assert np.all(np.sqrt(qt.frob(C)) <= 0.5 + 1e-12)
    f = random_field(rng, n=11)
    with pytest.raises(ResolutionError):
        mollify(f, 20)
    m = mollify(f, 4)
    assert np.allclose(np.trace(m.Q, axis1=-2, axis2=-1), 0)


def test_cover_chain_on_uniform_field():
    grid = build_box(([0, 0, 0], [1, 1, 1]), 0.25)
    rep = far_from_N_cover(QField.constant(grid, REG), 0.5, 4)
    assert rep.count == 0 and rep.chain_ok


def test_checkpoint_round_trip(tmp_path, rng):
    f = random_field(rng)
    save_checkpoint(tmp_path / "c.vol", f)
    Q, h, p = load_checkpoint(tmp_path / "c.vol")
    assert np.allclose(Q, f.Q, atol=1e-15) and h == f.grid.h
    assert p["eta"] == REG.eta and p["beta"] == 1.0
