"""Bulk and magnetic energy densities and the (eta, xi) regime bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import qtensor as qt

Q_INF_DIRECTOR = qt.E3


class RegimeError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def bulk_s_star(a, b, c):
    return (b + math.sqrt(b * b + 24.0 * a * c)) / (4.0 * c)


def _uniaxial_f_shape(s, a, b, c):
    """-(a/2)tr Q^2 - (b/3)tr Q^3 + (c/4)(tr Q^2)^2 for Q = s(e(x)e - Id/3), without C."""
    tr2 = 2.0 * s * s / 3.0
    tr3 = 2.0 * s**3 / 9.0
    return -0.5 * a * tr2 - b * tr3 / 3.0 + 0.25 * c * tr2 * tr2


@dataclass(frozen=True)
class MaterialParams:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    s_star: float = field(init=False)
    c_star: float = field(init=False)
    C: float = field(init=False)

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("a, b, c must be positive")
        s = bulk_s_star(self.a, self.b, self.c)
        object.__setattr__(self, "s_star", s)
        # g = 2/3 s_* - Q33 restricted to the vacuum manifold is s_*(1 - n3^2)
        object.__setattr__(self, "c_star", math.sqrt(s))
        # f >= 0 with zero set exactly the vacuum manifold
        object.__setattr__(self, "C", -_uniaxial_f_shape(s, self.a, self.b, self.c))


def f_bulk(Q, m: MaterialParams, stable=False):
    """Bulk potential.  stable=True evaluates it from the eigenvalues as
    f_uni(3 l1 / 2) + d^2 (-a + b l1 + 3c l1^2 / 2) + c d^4 with l1 the top
    eigenvalue and d half the gap of the other two; this keeps full relative
    accuracy next to the vacuum manifold."""
    Q = np.asarray(Q, dtype=float)
    if stable:
        lam = np.linalg.eigvalsh(Q)
        l1 = lam[..., 2]
        d2 = (0.5 * (lam[..., 1] - lam[..., 0])) ** 2
        return f_uniaxial(1.5 * l1, m) + d2 * (-m.a + m.b * l1 + 1.5 * m.c * l1 * l1) + m.c * d2 * d2
    Q2 = Q @ Q
    tr2 = np.trace(Q2, axis1=-2, axis2=-1)
    tr3 = np.einsum("...ij,...ji->...", Q2, Q)
    return m.C - 0.5 * m.a * tr2 - m.b * tr3 / 3.0 + 0.25 * m.c * tr2 * tr2


def f_uniaxial(s, m: MaterialParams):
    """f(s(e(x)e - Id/3)) in the factored form (s - s_*)^2 (c/9 s^2 + p s + q).

    Free of the cancellation that f_bulk suffers next to the vacuum manifold,
    which matters once it is divided by xi^2 ~ 1e-18.
    """
    ss = m.s_star
    p = -2.0 * m.b / 27.0 + 2.0 * ss * m.c / 9.0
    q = -m.a / 3.0 + 2.0 * ss * p - ss * ss * m.c / 9.0
    s = np.asarray(s, dtype=float)
    return (s - ss) ** 2 * (m.c / 9.0 * s * s + p * s + q)


def f_grad(Q, m: MaterialParams):
    """Traceless-projected derivative of f: -aQ - b(Q^2 - tr(Q^2)/3 Id) + c tr(Q^2) Q."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    tr2 = np.trace(Q2, axis1=-2, axis2=-1)[..., None, None]
    return -m.a * Q - m.b * (Q2 - tr2 * qt.ID3 / 3.0) + m.c * tr2 * Q


def g_mag(Q, m: MaterialParams):
    Q = np.asarray(Q, dtype=float)
    return 2.0 * m.s_star / 3.0 - Q[..., 2, 2]


_G_GRAD = -(qt.outer(qt.E3) - qt.ID3 / 3.0)


def g_grad(Q, m: MaterialParams):
    Q = np.asarray(Q, dtype=float)
    return np.broadcast_to(_G_GRAD, Q.shape).copy()


def g_uniaxial_residual(n, m: MaterialParams):
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    Q = qt.uniaxial(n, m.s_star)
    return np.abs(g_mag(Q, m) - m.c_star**2 * (1.0 - n[..., 2] ** 2))


# --------------------------------------------------------------------------
# regime

def farfield_minimizer(eta, xi, m: MaterialParams, tol=1e-13):
    """Minimize f/xi^2 + g/eta^2 over s(e3(x)e3 - Id/3).

    Returns (s_{*,t}, Q_inf).  The reduced objective is multiplied by xi^2 so
    the bracket search works at O(1) scale.
    """
    if not xi < eta:
        raise RegimeError(f"need xi < eta, got xi={xi}, eta={eta}")
    t = (xi / eta) ** 2
    e3e3 = qt.outer(qt.E3) - qt.ID3 / 3.0

    def obj(s):
        Q = s * e3e3
        return float(f_bulk(Q, m) + t * g_mag(Q, m))

    hi = 3.0 * m.s_star
    res = minimize_scalar(obj, bounds=(0.0, hi), method="bounded",
                          options={"xatol": tol, "maxiter": 500})
    s = float(res.x)
    # polish with Newton on the derivative of the reduced 1D objective
    for _ in range(50):
        d1 = (-2.0 * m.a * s / 3.0 - 2.0 * m.b * s * s / 9.0 + 4.0 * m.c * s**3 / 9.0) - 2.0 * t / 3.0
        d2 = -2.0 * m.a / 3.0 - 4.0 * m.b * s / 9.0 + 4.0 * m.c * s * s / 3.0
        step = d1 / d2
        s -= step
        if abs(step) < 1e-15 * max(1.0, s):
            break
    if not (0.0 < s < hi) or not res.success:
        raise NumericalFailure(f"far-field minimizer left the bracket [0, {hi}]: s={s}")
    return s, s * e3e3


@dataclass(frozen=True)
class RegimeParams:
    eta: float
    xi: float
    beta: float | None = None
    gamma: float = 0.7
    material: MaterialParams = field(default_factory=MaterialParams)
    s_star_t: float = field(init=False)
    Q_inf: np.ndarray = field(init=False, repr=False, compare=False)
    C0: float = field(init=False)

    def __post_init__(self):
        if not (0.5 < self.gamma < 1.0):
            raise RegimeError("gamma must lie in (1/2, 1)")
        s_t, Qinf = farfield_minimizer(self.eta, self.xi, self.material)
        Qinf.setflags(write=False)
        object.__setattr__(self, "s_star_t", s_t)
        object.__setattr__(self, "Q_inf", Qinf)
        c0 = -(f_uniaxial(s_t, self.material) / self.xi**2 + g_mag(Qinf, self.material) / self.eta**2)
        object.__setattr__(self, "C0", float(c0))

    @property
    def Q_inf_limit(self):
        """s_*(e3(x)e3 - Id/3): the minimizer restricted to the vacuum manifold."""
        return qt.uniaxial(qt.E3, self.material.s_star)

    @property
    def collar(self):
        return self.eta**self.gamma


def regime_from_beta(beta, eta, gamma=0.7, material=None):
    material = material or MaterialParams()
    if beta <= 0 or not (0 < eta < 1):
        raise RegimeError("need beta > 0 and eta in (0, 1)")
    xi = math.exp(-beta / eta)
    if not xi < eta:
        raise RegimeError(f"beta/eta too small: xi = exp(-beta/eta) = {xi:.4g} >= eta = {eta}")
    return RegimeParams(eta=eta, xi=xi, beta=beta, gamma=gamma, material=material)


def schedule(beta, gamma, eta_list, material=None):
    return [regime_from_beta(beta, eta, gamma, material) for eta in eta_list]


def combined_density(Q, gradQ, r: RegimeParams):
    """1/2|grad Q|^2 + f/xi^2 + g/eta^2 + C0.

    gradQ has shape (..., 3, 3, 3) with the spatial derivative index last.
    """
    m = r.material
    grad2 = np.einsum("...ijk,...ijk->...", gradQ, gradQ)
    return 0.5 * grad2 + f_bulk(Q, m) / r.xi**2 + g_mag(Q, m) / r.eta**2 + r.C0


# --------------------------------------------------------------------------
# Monte-Carlo audit of the structural hypotheses on f and g

@dataclass
class AuditReport:
    samples: int
    gamma1: float
    delta0: float
    C1_growth: float
    C1_coercive: float
    C2_coercive: float
    g_quartic_C: float
    g_cubic_C: float
    g_lipschitz_C: float
    combined_gamma2: float
    violations: dict

    @property
    def ok(self):
        return not any(self.violations.values())


def _random_sym0(rng, n, scale):
    A = rng.standard_normal((n, 3, 3))
    Q = qt.sym0(A)
    Q /= np.sqrt(qt.frob(Q))[:, None, None]
    return Q * scale[:, None, None]


def assumption_audit(m: MaterialParams, sample_count=100_000, delta0=0.1, seed=0, regime=None):
    """Fit the existential constants on random samples and report violations.

    Every fitted constant is the extremal ratio over the sample; a violation
    means a sample where the fitted inequality would need a non-positive (or
    unbounded) constant.
    """
    rng = np.random.default_rng(seed)
    s = m.s_star
    radius = np.sqrt(2.0 / 3.0) * s
    Q = _random_sym0(rng, sample_count, rng.uniform(0, 3 * radius, sample_count))
    # samples concentrated close to N for the quadratic lower bound
    n = rng.standard_normal((sample_count, 3))
    P = qt.uniaxial(n, s)
    E = _random_sym0(rng, sample_count, rng.uniform(1e-4, delta0, sample_count))
    Qn = P + E

    viol = {}
    f_near = f_bulk(Qn, m)
    d_near = qt.dist_to_N(Qn, s)
    ok = d_near <= delta0
    ratio = f_near[ok] / d_near[ok] ** 2
    gamma1 = float(ratio.min())
    viol["quadratic_near_N"] = int(np.sum(ratio <= 0))

    fQ = f_bulk(Q, m)
    nrm2 = qt.frob(Q)
    w = (nrm2 - 2.0 * s * s / 3.0) ** 2
    mask = w > 1e-12
    C1_growth = float(np.min(fQ[mask] / w[mask]))
    viol["quartic_growth"] = int(np.sum(fQ[mask] < 0)) + int(C1_growth <= 0)

    DfQ = qt.frob(f_grad(Q, m), Q)
    big = nrm2 > 4 * radius**2
    C1_coer = float(np.min(DfQ[big] / nrm2[big] ** 2))
    C2_coer = float(max(0.0, np.max(C1_coer * nrm2**2 - DfQ)))
    viol["coercivity"] = int(C1_coer <= 0)

    g = g_mag(Q, m)
    gq = float(np.max(np.abs(g) / (1 + nrm2**2)))
    dg = np.sqrt(qt.frob(g_grad(Q, m)))
    gc = float(np.max(dg / (1 + nrm2**1.5)))
    viol["g_growth"] = int(not np.isfinite(gq) or not np.isfinite(gc))

    gap = qt.cone_gap(Qn)
    sel = (gap > 1e-8) & ok & (d_near > 1e-8)
    R = qt.retract_to_N(Qn[sel], s)
    lip = np.abs(g_mag(Qn[sel], m) - g_mag(R, m)) / d_near[sel]
    g_lip = float(lip.max())
    # g is affine with |grad g| = |e3(x)e3 - Id/3| = sqrt(2/3)
    viol["g_lipschitz"] = int(g_lip > np.sqrt(2.0 / 3.0) * (1 + 1e-9))

    gamma2 = float("nan")
    if regime is not None:
        t = (regime.xi / regime.eta) ** 2
        F = f_near + t * g_mag(Qn, m) + regime.xi**2 * regime.C0
        # N_{eta,xi} is within C t of N; use N plus that slack
        d_eff = np.maximum(d_near - t * s, 0.0)
        sel2 = d_eff > 1e-3
        gamma2 = float(np.min(F[sel2] / d_eff[sel2] ** 2))
        viol["combined_bound"] = int(gamma2 <= 0)

    return AuditReport(sample_count, gamma1, delta0, C1_growth, C1_coer, C2_coer,
                       gq, gc, g_lip, gamma2, viol)
