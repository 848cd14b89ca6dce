import math

import numpy as np
import pytest

from nematic_gamma import qtensor as qt
from nematic_gamma.potentials import (MaterialParams, RegimeError, assumption_audit, f_bulk,
                                      f_grad, f_uniaxial, g_uniaxial_residual, regime_from_beta)


def test_bulk_constants(mat):
    assert math.isclose(mat.s_star, 1.5)
    assert math.isclose(mat.c_star, math.sqrt(1.5))


def test_f_vanishes_on_vacuum_and_is_nonnegative(mat, rng):
    n = rng.standard_normal((200, 3))
    assert np.max(np.abs(f_bulk(qt.uniaxial(n, mat.s_star), mat))) < 1e-12
    Q = qt.sym0(rng.standard_normal((2000, 3, 3)))
    assert np.min(f_bulk(Q, mat)) >= -1e-12


@pytest.mark.parametrize("s", [-1.0, 0.0, 0.7, 1.4999, 2.3])
def test_factored_uniaxial_matches_bulk(mat, s):
    Q = qt.uniaxial(np.array([0.0, 0.0, 1.0]), s)
    assert math.isclose(f_uniaxial(s, mat), f_bulk(Q, mat), rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(f_bulk(Q, mat, stable=True), f_bulk(Q, mat), rel_tol=1e-9, abs_tol=1e-12)


def test_f_grad_matches_finite_differences(mat, rng):
    Q = qt.sym0(rng.standard_normal((3, 3)))
    D = qt.sym0(rng.standard_normal((3, 3)))
    eps = 1e-6
    fd = (f_bulk(Q + eps * D, mat) - f_bulk(Q - eps * D, mat)) / (2 * eps)
    assert math.isclose(fd, qt.frob(f_grad(Q, mat), D), rel_tol=1e-6)


def test_g_on_vacuum_is_quadratic_in_n3(mat, rng):
    assert np.max(g_uniaxial_residual(rng.standard_normal((100, 3)), mat)) < 1e-12


def test_regime_far_field_tends_to_vertical(mat):
    r = regime_from_beta(1.0, 0.2)
    assert math.isclose(r.xi, math.exp(-5.0))
    assert np.sqrt(qt.frob(r.Q_inf - r.Q_inf_limit)) < 0.05
    assert r.s_star_t > mat.s_star


def test_regime_rejects_xi_above_eta():
    with pytest.raises(RegimeError):
        regime_from_beta(0.1, 0.5)
    with pytest.raises(RegimeError):
        regime_from_beta(1.0, 0.3, gamma=0.4)


def test_material_rejects_nonpositive():
    with pytest.raises(ValueError):
        MaterialParams(a=0.0)


def test_audit_small_sample(mat):
    rep = assumption_audit(mat, sample_count=5000)
    assert rep.ok, rep.violations
    assert rep.gamma1 > 0
