import math

import numpy as np
import pytest

from nematic_gamma.profile1d import (I_alpha, I_closed_form, ProfileQuery, euler_lagrange_residual,
                                     integrand_along, optimal_n3, solve_bvp)


@pytest.mark.parametrize("theta", [0.3, math.pi / 2, 2.5])
def test_bvp_matches_closed_form(mat, theta):
    sol = solve_bvp(ProfileQuery(0.0, math.inf, math.cos(theta), 1.0, mat))
    assert abs(sol.value / I_closed_form(theta, 1, mat) - 1) < 1e-3


def test_closed_form_profile(mat):
    theta = 1.1
    r = np.linspace(0, 30, 30001)
    n3 = optimal_n3(r, theta, mat)
    assert math.isclose(n3[0], math.cos(theta), abs_tol=1e-12)
    assert abs(n3[-1] - 1) < 1e-12
    assert abs(integrand_along(r, n3, mat) / I_closed_form(theta, 1, mat) - 1) < 1e-4
    assert euler_lagrange_residual(theta, mat) < 1e-3


def test_zero_angle_is_trivial(mat):
    n3, flag = optimal_n3(np.linspace(0, 1, 5), 0.0, mat, return_flag=True)
    assert flag and np.all(n3 == 1)
    assert I_closed_form(0.0, 1, mat) == 0.0


def test_reflection_symmetry(mat):
    a = solve_bvp(ProfileQuery(0.0, 2.0, 0.3, -0.7, mat)).value
    b = solve_bvp(ProfileQuery(0.0, 2.0, -0.3, 0.7, mat)).value
    assert math.isclose(a, b, rel_tol=1e-9)


def test_query_validation(mat):
    with pytest.raises(ValueError):
        ProfileQuery(1.0, 0.0, 0.0, 0.0, mat)
    with pytest.raises(ValueError):
        ProfileQuery(0.0, 1.0, 1.5, 0.0, mat)


def test_I_alpha_decreases_with_alpha(mat):
    q = ProfileQuery(0.0, 3.0, 1.0, 0.0, mat)
    i0 = I_alpha(q, 0.0)
    i1 = I_alpha(q, 0.1, samples=64, check=False)
    assert i1 <= i0 + 1e-12
    with pytest.raises(ValueError):
        I_alpha(q, 0.5)
