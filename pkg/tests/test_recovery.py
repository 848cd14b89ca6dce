import math

import numpy as np
import pytest

from nematic_gamma import qtensor as qt
from nematic_gamma.potentials import regime_from_beta
from nematic_gamma.recovery import (BudgetError, RecoveryConfig, cross_section, limsup_trend_ok,
                                    phi_profile, plate_box, plate_geometry, plate_target, qb_core,
                                    sup_norm_bound, validate_limsup)

REG = regime_from_beta(1.0, 0.3)
CFG = RecoveryConfig(REG)


def test_profile_starts_at_theta_and_ends_at_far_field():
    theta = 1.0
    Q0 = phi_profile(0.0, theta, [1.0, 0.0], 1, CFG)
    assert math.isclose(abs(qt.leading_eigenvector(Q0)[2]), math.cos(theta), abs_tol=1e-12)
    Qf = phi_profile(3.5 * CFG.L, theta, [1.0, 0.0], 1, CFG)
    assert np.allclose(Qf, REG.Q_inf)


@pytest.mark.parametrize("piece2", ["geodesic", "linear"])
def test_profile_is_continuous_across_layers(piece2):
    cfg = RecoveryConfig(REG, piece2)
    eps = 1e-9
    for t in (cfg.L, 2 * cfg.L, 3 * cfg.L):
        a = phi_profile(t - eps, 0.7, [0.0, 1.0], -1, cfg)
        b = phi_profile(t + eps, 0.7, [0.0, 1.0], -1, cfg)
        assert np.max(np.abs(a - b)) < 1e-6


def test_profile_rejects_negative_distance():
    with pytest.raises(ValueError):
        phi_profile(-1.0, 0.5, [1.0, 0.0], 1, CFG)
    with pytest.raises(ValueError):
        RecoveryConfig(REG, "spline")


def test_core_vanishes_inside_xi():
    Q = qb_core(np.array([0.5 * REG.xi, 3 * REG.xi]), np.array([0.3, 0.3]), CFG)
    assert np.all(Q[0] == 0)
    assert math.isclose(qt.eigenvalues(Q[1])[0], 1.0)


def test_cross_section_is_bounded():
    a, b = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41))
    Q = cross_section(a, b, qt.E1, CFG)
    nrm, bound = sup_norm_bound(Q, REG)
    assert nrm <= bound + 1e-12


def test_plate_limsup_ratio_close_to_one():
    rows = validate_limsup(plate_geometry(), [REG], plate_target(), box_fn=plate_box())
    assert 1.0 <= rows[0].ratio < 1.1
    ok, ratios = limsup_trend_ok(rows)
    assert ok


def test_budget_is_enforced():
    with pytest.raises(BudgetError):
        validate_limsup(plate_geometry(), [REG], plate_target(), box_fn=plate_box(), budget=10)
