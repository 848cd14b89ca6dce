"""Discrete energy on a voxel grid, its exact gradient, and descent.

Differences live on grid edges: the Dirichlet term is
    1/2 * h * sum_edges |Q_j - Q_i|^2,
counted for every edge with at least one endpoint in the fluid (phi > 0).
Potential terms are midpoint sums over fluid voxels with weight h^3.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import qtensor as qt
from .domain import FAR, Grid, ParticleShape
from .io import write_csv
from .potentials import RegimeParams, f_bulk, f_grad, g_grad, g_mag

TERMS = ("dirichlet", "f", "g", "c0")


class NumericPoison(FloatingPointError):
    pass


class StepFailure(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


# --------------------------------------------------------------------------
# field container


def pinned_mask(grid: Grid):
    """phi <= 0, the first fluid layer next to it, and the far-field shell."""
    solid = grid.phi <= 0
    grown = ndimage.binary_dilation(solid, structure=ndimage.generate_binary_structure(3, 1))
    return solid | grown | (grid.mask == FAR)


@dataclass
class QField:
    Q: np.ndarray
    grid: Grid
    regime: RegimeParams
    pinned: np.ndarray = field(repr=False)

    @property
    def include(self):
        return self.grid.phi > 0

    def copy(self):
        return QField(self.Q.copy(), self.grid, self.regime, self.pinned)

    @classmethod
    def constant(cls, grid: Grid, regime: RegimeParams, Q0=None, pinned=None):
        Q0 = regime.Q_inf if Q0 is None else Q0
        Q = np.broadcast_to(Q0, grid.shape + (3, 3)).copy()
        return cls(Q, grid, regime, pinned_mask(grid) if pinned is None else pinned)


def pin_values(field_: QField, shape: ParticleShape | None):
    """Write anchoring values (extended along grad phi) and Q_inf on pinned voxels."""
    P = field_.pinned
    m = field_.regime.material
    h2 = field_.grid.h * 2
    # deep interior voxels take no part in the energy; the sdf normal may be undefined there
    far = P & (np.abs(field_.grid.phi) > h2)
    field_.Q[far] = field_.regime.Q_inf
    near = P & ~far
    if shape is not None and np.any(near):
        pts = field_.grid.points()[near]
        field_.Q[near] = qt.uniaxial(shape.normal(pts), m.s_star)
    return field_


# --------------------------------------------------------------------------
# energy and gradient


def _check_finite(Q):
    bad = ~np.isfinite(Q).all(axis=(-2, -1))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericPoison(f"non-finite tensor at voxel {idx}")


def _edges(a, ax, periodic):
    """(lower, upper) views of all edges along an axis."""
    if periodic:
        return a, np.roll(a, -1, axis=ax)
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[ax] = slice(None, -1)
    hi[ax] = slice(1, None)
    return a[tuple(lo)], a[tuple(hi)]


# below this xi the round-off of the plain f formula, amplified by 1/xi^2,
# exceeds 1e-6 and the eigenvalue form is used
STABLE_F_XI = 1e-5


def _potential_density(Q, r: RegimeParams):
    m = r.material
    return f_bulk(Q, m, stable=r.xi < STABLE_F_XI) / r.xi**2, g_mag(Q, m) / r.eta**2


def energy_terms(Q, include, h, r: RegimeParams, periodic=(False, False, False), edge_keep=None):
    """Per-term energy of a full array.  edge_keep(ax) -> bool mask or None."""
    _check_finite(Q)
    E = dict.fromkeys(TERMS, 0.0)
    for ax in range(3):
        qa, qb = _edges(Q, ax, periodic[ax])
        ia, ib = _edges(include, ax, periodic[ax])
        use = ia | ib
        if edge_keep is not None:
            k = edge_keep(ax)
            if k is not None:
                use = use & k
        d = qb - qa
        E["dirichlet"] += 0.5 * h * float(np.sum(np.einsum("...ij,...ij->...", d, d)[use]))
    fd, gd = _potential_density(Q[include], r)
    vol = h**3
    E["f"] = vol * float(np.sum(fd))
    E["g"] = vol * float(np.sum(gd))
    E["c0"] = vol * r.C0 * int(np.count_nonzero(include))
    E["total"] = E["dirichlet"] + E["f"] + E["g"] + E["c0"]
    E["eta_total"] = r.eta * E["total"]
    return E


def discrete_energy(field_: QField, edge_keep=None):
    g = field_.grid
    return energy_terms(field_.Q, field_.include, g.h, field_.regime, g.periodic, edge_keep)


def energy_gradient(Q, include, h, r: RegimeParams, periodic=(False, False, False)):
    """d E / d Q_i with respect to the Frobenius pairing (traceless)."""
    G = np.zeros_like(Q)
    for ax in range(3):
        per = periodic[ax]
        qa, qb = _edges(Q, ax, per)
        ia, ib = _edges(include, ax, per)
        d = (qb - qa) * (ia | ib)[..., None, None]
        # edge (i, i+1) contributes h (Q_i - Q_{i+1}) to i and h (Q_{i+1} - Q_i) to i+1
        if per:
            G -= h * d
            G += h * np.roll(d, 1, axis=ax)
        else:
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ax] = slice(None, -1)
            hi[ax] = slice(1, None)
            G[tuple(lo)] -= h * d
            G[tuple(hi)] += h * d
    m = r.material
    Qi = Q[include]
    G[include] += h**3 * (f_grad(Qi, m) / r.xi**2 + g_grad(Qi, m) / r.eta**2)
    return G


def discrete_gradient(field_: QField):
    g = field_.grid
    _check_finite(field_.Q)
    G = energy_gradient(field_.Q, field_.include, g.h, field_.regime, g.periodic)
    G[field_.pinned] = 0.0
    return G


def gradient_norm(G, h):
    """L2 norm of the gradient density G / h^3."""
    return math.sqrt(float(np.sum(G * G)) / h**3)


def voxel_density(Q, include, h, r: RegimeParams, periodic=(False, False, False), edge_keep=None):
    """Energy split onto voxels: potentials at the voxel, half of each incident edge.

    The sum of the returned array equals energy_terms(...)['total'].
    """
    D = np.zeros(Q.shape[:3])
    for ax in range(3):
        per = periodic[ax]
        qa, qb = _edges(Q, ax, per)
        ia, ib = _edges(include, ax, per)
        use = ia | ib
        if edge_keep is not None:
            k = edge_keep(ax)
            if k is not None:
                use = use & k
        d = qb - qa
        e = 0.25 * h * np.einsum("...ij,...ij->...", d, d) * use
        if per:
            D += e
            D += np.roll(e, 1, axis=ax)
        else:
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ax] = slice(None, -1)
            hi[ax] = slice(1, None)
            D[tuple(lo)] += e
            D[tuple(hi)] += e
    fd, gd = _potential_density(Q[include], r)
    D[include] += h**3 * (fd + gd + r.C0)
    return D


# --------------------------------------------------------------------------
# slab-wise evaluation of analytic fields (for grids too large to hold)


def energy_of_sampler(sampler, origin, h, shape, r: RegimeParams, include_fn=None,
                      periodic=(False, False, False), cut_fn=None, region_fn=None, slab=8):
    """Energy of Q = sampler(points) on a virtual grid, evaluated in x-slabs.

    include_fn(points) -> bool marks the fluid; cut_fn(p, q) -> bool marks
    edges to drop (p, q are the endpoint coordinates); region_fn(points) -> bool
    accumulates the voxel-split energy inside a region as well.  Matches
    energy_terms on the materialized grid.
    """
    origin = np.asarray(origin, float)
    nx, ny, nz = shape
    ax1 = origin[1] + h * np.arange(ny)
    ax2 = origin[2] + h * np.arange(nz)
    E = dict.fromkeys(TERMS, 0.0)
    region = 0.0
    L0 = h * nx
    for i0 in range(0, nx, slab):
        i1 = min(i0 + slab, nx)
        halo = i1 < nx or periodic[0]
        xs = origin[0] + h * np.arange(i0, i1 + (1 if halo else 0))
        if i1 == nx and periodic[0]:
            xs[-1] -= L0  # the halo is plane 0
        X, Y, Z = np.meshgrid(xs, ax1, ax2, indexing="ij")
        P = np.stack([X, Y, Z], axis=-1)
        Q = sampler(P)
        _check_finite(Q)
        inc = include_fn(P) if include_fn is not None else np.ones(P.shape[:3], bool)
        k = i1 - i0
        D = np.zeros(P.shape[:3]) if region_fn is not None else None
        for ax in range(3):
            if ax == 0:
                qa, qb, ia, ib, pa, pb = Q[:-1], Q[1:], inc[:-1], inc[1:], P[:-1], P[1:]
            else:
                qa, qb = _edges(Q[:k], ax, periodic[ax])
                ia, ib = _edges(inc[:k], ax, periodic[ax])
                pa, pb = _edges(P[:k], ax, periodic[ax])
            use = ia | ib
            if cut_fn is not None:
                use = use & ~cut_fn(pa, pb)
            d = qb - qa
            e = 0.5 * h * np.einsum("...ij,...ij->...", d, d) * use
            E["dirichlet"] += float(np.sum(e))
            if D is None:
                continue
            half = 0.5 * e
            if ax == 0:
                D[:-1] += half
                D[1:] += half
            elif periodic[ax]:
                D[:k] += half + np.roll(half, 1, axis=ax)
            else:
                lo = [slice(None, k), slice(None), slice(None)]
                hi = [slice(None, k), slice(None), slice(None)]
                lo[ax] = slice(None, -1)
                hi[ax] = slice(1, None)
                D[tuple(lo)] += half
                D[tuple(hi)] += half
        io_ = inc[:k]
        fd, gd = _potential_density(Q[:k][io_], r)
        E["f"] += h**3 * float(np.sum(fd))
        E["g"] += h**3 * float(np.sum(gd))
        E["c0"] += h**3 * r.C0 * int(np.count_nonzero(io_))
        if D is not None:
            pot = np.zeros(io_.shape)
            pot[io_] = h**3 * (fd + gd + r.C0)
            D[:k] += pot
            region += float(np.sum(D[region_fn(P)]))
    E["total"] = E["dirichlet"] + E["f"] + E["g"] + E["c0"]
    E["eta_total"] = r.eta * E["total"]
    if region_fn is not None:
        E["region"] = region
    return E


# --------------------------------------------------------------------------
# descent


@dataclass
class SolverConfig:
    step_rule: str = "armijo"  # or "fixed"
    tol: float = 1e-6
    max_iter: int = 500
    dt: float | None = None
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.step_rule not in ("armijo", "fixed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class SolverReport:
    iterations: int
    converged: bool
    grad_norm: float
    wall_time: float
    trace: list = field(default_factory=list)

    def write_csv(self, path):
        write_csv(path, ["iter", "E_total", "E_dirichlet", "E_f", "E_g", "grad_norm"],
                  [[t["iter"], t["total"], t["dirichlet"], t["f"], t["g"], t["grad_norm"]]
                   for t in self.trace])


def stable_dt(field_: QField, L_f=None):
    """h^2 / (6 + h^2 max(1/xi^2, 1/eta^2) L_f) in the time units of the density gradient."""
    r = field_.regime
    h = field_.grid.h
    if L_f is None:
        # curvature of f near the vacuum manifold bounds the reaction stiffness
        m = r.material
        L_f = m.a + 2 * m.b * m.s_star + 3 * m.c * m.s_star**2
    return h * h / (6.0 + h * h * max(1 / r.xi**2, 1 / r.eta**2) * L_f)


def minimize(field_: QField, cfg: SolverConfig = None, callback=None):
    """Gradient flow on the free voxels; pinned voxels are never written."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    f = field_.copy()
    h = f.grid.h
    free = ~f.pinned
    E = discrete_energy(f)
    G = discrete_gradient(f)
    gn = gradient_norm(G, h)
    trace = [dict(iter=0, grad_norm=gn, **E)]
    if not np.any(free) or gn <= cfg.tol or cfg.max_iter <= 0:
        return f, SolverReport(0, bool(gn <= cfg.tol or not np.any(free)), gn,
                               time.perf_counter() - t0, trace)
    dt = cfg.dt or stable_dt(f)
    it = 0
    converged = False
    for it in range(1, cfg.max_iter + 1):
        # descent direction in density units: dQ/dt = -G / h^3
        D = -G[free] / h**3
        slope = float(np.sum(G[free] * D))
        Q0 = f.Q[free]
        tries = 0
        while True:
            f.Q[free] = qt.sym0(Q0 + dt * D)
            Et = discrete_energy(f)
            if cfg.step_rule == "fixed":
                if Et["total"] > E["total"] + 1e-12 * max(1.0, abs(E["total"])):
                    f.Q[free] = Q0
                    raise StepFailure(f"energy increased at iteration {it} with fixed dt={dt:.3e}: "
                                      f"{E['total']:.12g} -> {Et['total']:.12g}")
                break
            if Et["total"] <= E["total"] + cfg.armijo_c * dt * slope:
                break
            tries += 1
            if tries > cfg.max_backtracks:
                f.Q[free] = Q0
                raise StepFailure(f"no descent after {tries} backtracks at iteration {it}, "
                                  f"dt={dt:.3e}, grad norm {gn:.3e}")
            dt *= cfg.shrink
        E = Et
        G = discrete_gradient(f)
        gn = gradient_norm(G, h)
        trace.append(dict(iter=it, grad_norm=gn, **E))
        if callback is not None:
            callback(it, E, gn)
        if gn <= cfg.tol:
            converged = True
            break
        if cfg.step_rule == "armijo" and tries == 0:
            dt *= cfg.grow
    return f, SolverReport(it, converged, gn, time.perf_counter() - t0, trace)


# --------------------------------------------------------------------------
# mollification


def _bump_kernel(radius, h):
    """Normalized (1 - |x|^2/radius^2)^2 sampled on the grid."""
    k = int(math.floor(radius / h))
    o = np.arange(-k, k + 1) * h
    X, Y, Z = np.meshgrid(o, o, o, indexing="ij")
    r2 = (X**2 + Y**2 + Z**2) / radius**2
    K = np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
    return K / K.sum()


def clamp_ball(Q, R):
    """Orthogonal projection onto {|Q| <= R}."""
    nrm = np.sqrt(qt.frob(Q))
    scale = np.where(nrm > R, R / np.maximum(nrm, 1e-300), 1.0)
    return Q * scale[..., None, None]


def mollify(field_: QField, n):
    """Clamp to |Q| <= sqrt(2/3) s_{*,t}, convolve with a bump of radius 1/n, re-pin."""
    h = field_.grid.h
    if 1.0 / n < 2 * h:
        raise ResolutionError(f"mollification radius 1/n = {1 / n:.4g} below 2h = {2 * h:.4g}")
    R = math.sqrt(2.0 / 3.0) * field_.regime.s_star_t
    Q = clamp_ball(field_.Q, R)
    K = _bump_kernel(1.0 / n, h)
    k = K.shape[0] // 2
    out = np.empty_like(Q)
    comps = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]
    for (i, j) in comps:
        c = Q[..., i, j]
        for ax in range(3):
            mode = "wrap" if field_.grid.periodic[ax] else "edge"
            w = [(0, 0)] * 3
            w[ax] = (k, k)
            c = np.pad(c, w, mode=mode)
        cc = ndimage.convolve(c, K, mode="constant")
        sl = tuple(slice(k, -k) if k > 0 else slice(None) for _ in range(3))
        out[..., i, j] = cc[sl]
        if i != j:
            out[..., j, i] = out[..., i, j]
    out[..., 2, 2] = -out[..., 0, 0] - out[..., 1, 1]
    out[field_.pinned] = field_.Q[field_.pinned]
    return QField(out, field_.grid, field_.regime, field_.pinned)


def lipschitz_estimate(field_: QField, region=None):
    """max |Q_j - Q_i| / h over edges inside the fluid (or a given region)."""
    g = field_.grid
    sel = field_.include if region is None else region
    best = 0.0
    for ax in range(3):
        qa, qb = _edges(field_.Q, ax, g.periodic[ax])
        ia, ib = _edges(sel, ax, g.periodic[ax])
        d = np.sqrt(qt.frob(qb - qa))[ia & ib]
        if d.size:
            best = max(best, float(d.max()) / g.h)
    return best


# --------------------------------------------------------------------------
# covering of the set far from the vacuum manifold


def f_min_far(m, delta, samples=801):
    """min f over {dist(Q, N) >= delta/2}, searched over diagonal tensors.

    f and dist are isotropic, so the eigenvalue plane suffices.
    """
    s = m.s_star
    L = 2.5 * s
    u = np.linspace(-L, L, samples)
    A, B = np.meshgrid(u, u, indexing="ij")
    # orthonormal basis of traceless diagonals
    e_a = np.diag([1, -1, 0]) / math.sqrt(2)
    e_b = np.diag([-1, -1, 2]) / math.sqrt(6)
    Q = A[..., None, None] * e_a + B[..., None, None] * e_b
    d = qt.dist_to_N(Q, s)
    fv = f_bulk(Q, m)
    sel = d >= delta / 2
    return float(fv[sel].min())


@dataclass
class CoverReport:
    centers: np.ndarray
    count: int
    radius: float
    chain_ok: bool
    uncovered: int
    overshoot: int
    bound_unit: float
    f_min: float

    @property
    def C_fit(self):
        return self.count / self.bound_unit if self.bound_unit > 0 else math.nan


def far_from_N_cover(field_: QField, delta, n):
    """Greedy cover of U_delta = {dist(Q, N) > delta} by balls of radius delta/(2n).

    Centers are picked in index order among uncovered voxels of U_delta, so
    they are pairwise at least one radius apart.  The inclusion chain
    U_delta in union(B) in U_{delta/2} is checked voxel by voxel on the fluid.
    """
    g = field_.grid
    r = field_.regime
    m = r.material
    inc = field_.include
    dist = np.where(inc, qt.dist_to_N(field_.Q, m.s_star), 0.0)
    U = dist > delta
    U2 = dist > delta / 2
    rad = delta / (2 * n)
    k = int(math.ceil(rad / g.h))
    o = np.arange(-k, k + 1)
    OX, OY, OZ = np.meshgrid(o, o, o, indexing="ij")
    st = np.stack([OX, OY, OZ], -1)[(OX**2 + OY**2 + OZ**2) * g.h**2 < rad**2]
    covered = np.zeros(g.shape, bool)
    centers = []
    shape = np.asarray(g.shape)
    for idx in np.argwhere(U):
        if covered[tuple(idx)]:
            continue
        centers.append(idx)
        pts = idx + st
        for ax in range(3):
            if g.periodic[ax]:
                pts[:, ax] %= shape[ax]
        ok = np.all((pts >= 0) & (pts < shape), axis=1)
        p = pts[ok]
        covered[p[:, 0], p[:, 1], p[:, 2]] = True
    uncovered = int(np.count_nonzero(U & ~covered))
    overshoot = int(np.count_nonzero(covered & inc & ~U2))
    fmin = f_min_far(m, delta)
    unit = n**3 / (r.eta * fmin * delta**3) * (r.xi**2 + 1.0 / n**2)
    cen = g.origin + g.h * np.asarray(centers, float).reshape(-1, 3)
    return CoverReport(cen, len(centers), rad, uncovered == 0 and overshoot == 0,
                       uncovered, overshoot, unit, fmin)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, field_: QField):
    from .domain import write_volume
    r = field_.regime
    m = r.material
    beta = math.nan if r.beta is None else r.beta
    write_volume(path, qt.to_components(field_.Q), field_.grid.h,
                 extra=[r.eta, r.xi, beta, m.a, m.b, m.c])


def load_checkpoint(path):
    """Returns (Q array (nx, ny, nz, 3, 3), spacing, dict of parameters)."""
    from .domain import read_volume
    data, h, p = read_volume(path, components=5, extra=6)
    keys = ("eta", "xi", "beta", "a", "b", "c")
    return qt.from_components(data), h, dict(zip(keys, (float(x) for x in p)))
