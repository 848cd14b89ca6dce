"""Competitor fields built from a target defect geometry, and the check that
their rescaled energy approaches the limit energy.

Layers, with t the distance to the defect set and L = eta**gamma:
  [0, L]     uniaxial, director following the optimal one-dimensional profile
  (L, 2L]    director rotated along the great circle to +-e3
  (2L, 3L]   linear blend s_*(e3 e3 - Id/3) -> Q_inf(eta, xi)
  beyond     Q_inf(eta, xi)
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import qtensor as qt
from .domain import Grid, ParticleShape, SurfaceMesh
from .geometry import DefectGeometry, PolylineLocator, TriangleLocator
from .io import write_csv
from .potentials import MaterialParams, RegimeParams
from .relax import QField, energy_of_sampler, pinned_mask


class ConstructionError(ValueError):
    pass


class BudgetError(RuntimeError):
    pass


PIECE2_MODES = ("geodesic", "linear")


@dataclass(frozen=True)
class RecoveryConfig:
    regime: RegimeParams
    piece2: str = "geodesic"

    def __post_init__(self):
        if self.piece2 not in PIECE2_MODES:
            raise ValueError(f"piece2 must be one of {PIECE2_MODES}")

    @property
    def eta(self):
        return self.regime.eta

    @property
    def xi(self):
        return self.regime.xi

    @property
    def gamma(self):
        return self.regime.gamma

    @property
    def L(self):
        return self.regime.eta ** self.regime.gamma

    @property
    def width(self):
        return 3.0 * self.L

    @property
    def material(self) -> MaterialParams:
        return self.regime.material

    def check(self, h=None, r0=None):
        """Resolution and geometry warnings; returns the list of messages."""
        msgs = []
        if r0 is not None and not self.width < r0 / 2:
            msgs.append(f"collar 3*eta^gamma = {self.width:.3g} is not below r0/2 = {r0 / 2:.3g}")
        if h is not None:
            if not self.L > 2 * h:
                msgs.append(f"collar eta^gamma = {self.L:.3g} not resolved by h = {h:.3g}")
            if not self.xi > h / 2:
                msgs.append(f"core radius xi = {self.xi:.3g} below h/2; core energy is overestimated")
        for msg in msgs:
            warnings.warn(msg, stacklevel=2)
        return msgs


# --------------------------------------------------------------------------
# profiles


def _n3(r, cos_theta, m: MaterialParams):
    """Closed-form optimal n3 at rescaled distance r, started at cos(theta)."""
    c = np.asarray(cos_theta, float)
    e = np.exp(-2.0 * m.c_star / m.s_star * np.asarray(r, float))
    return ((1 + c) - (1 - c) * e) / ((1 + c) + (1 - c) * e)


def _director(sin_a, cos_a, dir2, sign):
    return np.concatenate([sin_a[..., None] * dir2[..., :2], (sign * cos_a)[..., None]], axis=-1)


def phi_profile(t, theta, dir2, sign, cfg: RecoveryConfig):
    """Collar profile Phi^+ (sign = 1) or Phi^- (sign = -1).

    dir2 is a horizontal unit vector (2 or 3 components, the third ignored).
    All arguments broadcast; returns (..., 3, 3).
    """
    m = cfg.material
    s = m.s_star
    L = cfg.L
    t, theta, sign = np.broadcast_arrays(np.asarray(t, float), np.asarray(theta, float),
                                         np.asarray(sign, float))
    dir2 = np.broadcast_to(np.asarray(dir2, float), t.shape + (np.shape(dir2)[-1],))
    Q = np.broadcast_to(cfg.regime.Q_inf, t.shape + (3, 3)).copy()
    if np.any(t < 0):
        raise ValueError("t must be non-negative")

    p1 = t <= L
    if np.any(p1):
        n3 = _n3(t[p1] / cfg.eta, np.cos(theta[p1]), m)
        n = _director(np.sqrt(np.maximum(1 - n3 * n3, 0)), n3, dir2[p1], sign[p1])
        Q[p1] = qt.uniaxial(n, s)

    p2 = (t > L) & (t <= 2 * L)
    if np.any(p2):
        lam = (t[p2] - L) / L
        n3e = _n3(L / cfg.eta, np.cos(theta[p2]), m)
        if cfg.piece2 == "geodesic":
            a = (1 - lam) * np.arccos(np.clip(n3e, -1, 1))
            Q[p2] = qt.uniaxial(_director(np.sin(a), np.cos(a), dir2[p2], sign[p2]), s)
        else:
            ne = _director(np.sqrt(np.maximum(1 - n3e * n3e, 0)), n3e, dir2[p2], sign[p2])
            Q[p2] = ((1 - lam)[:, None, None] * qt.uniaxial(ne, s)
                     + lam[:, None, None] * cfg.regime.Q_inf_limit)

    p3 = (t > 2 * L) & (t <= 3 * L)
    if np.any(p3):
        lam = ((t[p3] - 2 * L) / L)[:, None, None]
        Q[p3] = (1 - lam) * cfg.regime.Q_inf_limit + lam * cfg.regime.Q_inf
    return Q


def qb_core(r, phi, cfg: RecoveryConfig, w=None):
    """Half-degree core: zero for r < xi, linear amplitude ramp up to 2 xi,
    director sin(phi/2) w + cos(phi/2) e3 (w horizontal, default e1)."""
    r, phi = np.broadcast_arrays(np.asarray(r, float), np.asarray(phi, float))
    w = qt.E1 if w is None else np.asarray(w, float)
    w = np.broadcast_to(w, r.shape + (3,))
    n = np.sin(phi / 2)[..., None] * w + np.cos(phi / 2)[..., None] * qt.E3
    amp = np.clip(r / cfg.xi - 1.0, 0.0, 1.0)
    return amp[..., None, None] * qt.uniaxial(n, cfg.material.s_star)


def cross_section(a, b, w, cfg: RecoveryConfig):
    """Field around a line defect in the disk coordinates (a along the outward
    conormal of T, b along its normal); T occupies {b = 0, a < 0}."""
    eta = cfg.eta
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    w = np.broadcast_to(np.asarray(w, float), a.shape + (3,))
    rho = np.hypot(a, b)
    phi = np.mod(np.arctan2(b, a), 2 * math.pi)
    Q = np.empty(a.shape + (3, 3))

    core = rho < eta
    Q[core] = qb_core(rho[core], phi[core], cfg, w[core])

    t = np.empty(a.shape)
    ang = np.empty(a.shape)  # polar angle of the foot point on the core circle
    rad = ~core & (a >= 0)
    t[rad] = rho[rad] - eta
    ang[rad] = phi[rad]
    upper = b >= 0
    vert = ~core & (a < 0) & (a > -eta)
    foot = np.sqrt(np.maximum(eta * eta - a[vert] ** 2, 0.0))
    t[vert] = np.abs(b[vert]) - foot
    ang[vert] = np.mod(np.arctan2(np.where(upper[vert], foot, -foot), a[vert]), 2 * math.pi)
    flat = ~core & (a <= -eta)
    t[flat] = np.abs(b[flat])
    ang[flat] = math.pi
    out = ~core
    theta = np.where(upper, ang / 2, math.pi - ang / 2)
    sign = np.where(upper, 1.0, -1.0)
    Q[out] = phi_profile(np.maximum(t[out], 0.0), theta[out], w[out], sign[out], cfg)
    return Q


# --------------------------------------------------------------------------
# assembly on a geometry


def _horizontal_unit(v, fallback=qt.E1):
    v = np.array(v, float, copy=True)
    v[..., 2] = 0
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(n > 1e-12, v / np.where(n > 1e-12, n, 1), fallback)


class RecoveryField:
    """Sampler Q(points) for a geometry (S polylines, T soup, particle + G).

    Precedence: line tubes, then the bands around T, then the particle
    collar; a point claimed by a tube or band and by the collar is a
    construction error.
    """

    REGION_FAR, REGION_T, REGION_S, REGION_M, REGION_SOLID = 0, 1, 2, 3, 4

    def __init__(self, geom: DefectGeometry, cfg: RecoveryConfig, shape: ParticleShape | None = None,
                 mesh: SurfaceMesh | None = None, v_field=None, check_boundary_tol=None):
        self.geom = geom
        self.cfg = cfg
        self.shape = shape
        self.mesh = mesh
        self.v_field = v_field
        self.T = None if geom.empty_T else TriangleLocator(geom.T_vertices, geom.T_faces)
        self.S = PolylineLocator(geom.S) if geom.S else None
        self._vtree = None
        if mesh is not None and geom.G is not None:
            from scipy.spatial import cKDTree
            self._vtree = cKDTree(mesh.vertices)
        if check_boundary_tol is not None:
            self.check_boundary(check_boundary_tol)

    # -- helpers
    def check_boundary(self, tol):
        """Reject T whose boundary strays further than tol from S and the particle."""
        segs = self.geom.T_boundary_segments()
        if len(segs) == 0:
            return 0.0
        mids = segs.mean(axis=1)
        d = np.full(len(mids), np.inf)
        if self.S is not None:
            d = np.minimum(d, self.S.query(mids)[1])
        if self.shape is not None:
            d = np.minimum(d, np.abs(self.shape.sdf(mids)))
        worst = float(d.max())
        if worst > tol:
            i = int(np.argmax(d))
            raise ConstructionError(f"boundary of T is {worst:.3g} away from S and the particle near {mids[i]}")
        return worst

    def _w(self, X):
        if self.v_field is None:
            return np.broadcast_to(qt.E1, X.shape).copy()
        return _horizontal_unit(self.v_field(X))

    def in_F(self, foot, nu):
        """F = {nu3 > 0} outside G, {nu3 <= 0} inside G."""
        up = nu[..., 2] > 0
        if self._vtree is None:
            return up
        _, idx = self._vtree.query(foot)
        g = np.asarray(self.geom.G, bool)[idx]
        return np.where(g, ~up, up)

    # -- evaluation
    def evaluate(self, P, return_labels=False):
        cfg = self.cfg
        W = cfg.width
        P = np.asarray(P, float)
        shp = P.shape[:-1]
        X = P.reshape(-1, 3)
        Q = np.broadcast_to(cfg.regime.Q_inf, (len(X), 3, 3)).copy()
        lab = np.zeros(len(X), np.int8)
        side = np.zeros(len(X), np.int8)

        claimed = np.zeros(len(X), bool)
        if self.S is not None:
            foot, dist, tau = self.S.query(X)
            sel = dist < W + cfg.eta
            if np.any(sel):
                Q[sel], lab[sel] = self._line(X[sel], foot[sel], tau[sel]), self.REGION_S
                claimed |= sel
        if self.T is not None:
            foot, dist, sd, f = self.T.query(X)
            sel = ~claimed & (dist < W)
            # beyond the edge of T the band belongs to the line tube or the collar
            inside = np.abs(np.abs(sd) - dist) <= 1e-9 * max(1.0, W)
            sel &= inside
            if np.any(sel):
                sg = np.where(sd[sel] >= 0, 1.0, -1.0)
                Q[sel] = phi_profile(np.abs(sd[sel]), math.pi / 2, self._w(foot[sel]), sg, cfg)
                lab[sel] = self.REGION_T
                claimed |= sel
        if self.shape is not None:
            phi = self.shape.sdf(X)
            sel = phi < W
            clash = sel & claimed & (phi >= 0)
            if np.any(clash):
                i = int(np.flatnonzero(clash)[0])
                raise ConstructionError(f"point {X[i]} is claimed by both a defect band and the particle collar")
            if np.any(sel):
                nu = self.shape.normal(X[sel])
                nu = np.where(np.isfinite(nu), nu, qt.E3)
                foot = X[sel] - np.maximum(phi[sel], 0)[:, None] * nu
                F = self.in_F(foot, nu)
                theta = np.arccos(np.clip(nu[:, 2], -1, 1))
                th = np.where(F, theta, math.pi - theta)
                sg = np.where(F, 1.0, -1.0)
                Q[sel] = phi_profile(np.maximum(phi[sel], 0.0), th, _horizontal_unit(nu), sg, cfg)
                lab[sel] = np.where(phi[sel] <= 0, self.REGION_SOLID, self.REGION_M)
                side[sel] = sg.astype(np.int8)
        Q = Q.reshape(shp + (3, 3))
        if return_labels:
            return Q, lab.reshape(shp), side.reshape(shp)
        return Q

    __call__ = evaluate

    def _line(self, X, foot, tau):
        if self.T is not None:
            tfoot, _, _, f = self.T.query(foot)
            nT = self.T.normals[f]
            toward_T = self.T.tri[f].mean(axis=1) - foot
        else:
            nT = np.cross(tau, qt.E1)
            bad = np.linalg.norm(nT, axis=1) < 1e-6
            nT[bad] = np.cross(tau[bad], qt.E2)
            toward_T = -np.cross(tau, nT)
        nT = nT - np.einsum("ki,ki->k", nT, tau)[:, None] * tau
        nT /= np.linalg.norm(nT, axis=1, keepdims=True)
        nS = np.cross(tau, nT)
        flip = np.einsum("ki,ki->k", nS, toward_T) > 0
        nS[flip] *= -1
        d = X - foot
        a = np.einsum("ki,ki->k", d, nS)
        b = np.einsum("ki,ki->k", d, nT)
        return cross_section(a, b, self._w(foot), self.cfg)

    # -- bookkeeping
    def include(self, P):
        if self.shape is None:
            return np.ones(np.shape(P)[:-1], bool)
        return self.shape.sdf(P) > 0

    def seam_cut(self, P, Qp):
        """Edges joining the F side and the F^c side of the particle collar."""
        _, _, sa = self.evaluate(P, return_labels=True)
        _, _, sb = self.evaluate(Qp, return_labels=True)
        return sa.astype(int) * sb.astype(int) < 0

    def band_region(self, P):
        """Points within 3 eta^gamma of T, S or the particle."""
        _, lab, _ = self.evaluate(P, return_labels=True)
        return lab != self.REGION_FAR

    def materialize(self, grid: Grid, pinned=None):
        Q = self.evaluate(grid.points())
        return QField(Q, grid, self.cfg.regime, pinned_mask(grid) if pinned is None else pinned)

    def seam_length(self):
        """Length of the part of the F/F^c boundary not covered by a line of S."""
        if self.mesh is None:
            return 0.0
        from .domain import gamma_curve
        foot = self.mesh.vertices
        F = self.in_F(foot, self.mesh.normals)
        curves, _ = gamma_curve(self.mesh, np.where(F, 1.0, -1.0))
        total = 0.0
        for c in curves:
            if len(c) < 2:
                continue
            mid = 0.5 * (c[1:] + c[:-1])
            seg = np.linalg.norm(np.diff(c, axis=0), axis=1)
            if self.S is not None:
                far = self.S.query(mid)[1] > self.cfg.width
            else:
                far = np.ones(len(mid), bool)
            total += float(seg[far].sum())
        return total


def build_recovery_field(geom: DefectGeometry, grid: Grid, cfg: RecoveryConfig, shape=None, mesh=None,
                         v_field=None, boundary_tol=None):
    """Materialize the competitor field on a grid."""
    cfg.check(h=grid.h, r0=shape.r0() if shape is not None else None)
    tol = 3 * grid.h if boundary_tol is None else boundary_tol
    rf = RecoveryField(geom, cfg, shape, mesh, v_field, check_boundary_tol=tol)
    return rf.materialize(grid)


def sup_norm_bound(Q, regime: RegimeParams):
    """max |Q| against sqrt(2/3) s_{eta,xi,*}; returns (max, bound)."""
    nrm = float(np.sqrt(np.max(np.einsum("...ij,...ij->...", Q, Q))))
    return nrm, math.sqrt(2.0 / 3.0) * regime.s_star_t


# --------------------------------------------------------------------------
# limsup validation


LIMSUP_HEADER = ["eta", "xi", "h", "eta_E_total", "eta_E_dirichlet", "eta_E_f", "eta_E_g",
                 "eta_E_c0", "band_fraction", "E0_target", "ratio"]


@dataclass
class LimsupRow:
    eta: float
    xi: float
    h: float
    terms: dict
    band_fraction: float
    target: float
    wall_time: float

    @property
    def ratio(self):
        return self.terms["eta_total"] / self.target

    def as_list(self):
        e = self.eta
        t = self.terms
        return [self.eta, self.xi, self.h, t["eta_total"], e * t["dirichlet"], e * t["f"], e * t["g"],
                e * t["c0"], self.band_fraction, self.target, self.ratio]


def default_box(geom: DefectGeometry, cfg: RecoveryConfig, h, shape=None):
    """Bounding box of the geometry padded by the collar width plus two cells."""
    pts = [geom.T_vertices] + [np.asarray(p) for p in geom.S]
    if shape is not None:
        lo, hi = shape.bounds()
        pts.append(np.array([lo, hi]))
    pts = np.concatenate([p for p in pts if len(p)])
    pad = cfg.width + cfg.eta + 2 * h
    lo, hi = pts.min(axis=0) - pad, pts.max(axis=0) + pad
    n = np.ceil((hi - lo) / h).astype(int) + 1
    return lo, tuple(int(k) for k in n), (False, False, False)


def validate_limsup(geom: DefectGeometry, regimes, target, shape=None, mesh=None, h_rule=None,
                    box_fn=None, piece2="geodesic", cut_seam=True, budget=6e7, csv_path=None,
                    v_field=None, multiplicity=1.0):
    """eta * E(recovery field) against the limit energy for each regime.

    target: a number or a callable regime -> number.
    box_fn(cfg, h) -> (origin, shape, periodic) chooses the virtual grid.
    multiplicity scales the energies when the box covers one of several
    mirror-symmetric pieces.
    """
    h_rule = h_rule or (lambda eta: eta / 8)
    rows = []

    def npoints(reg):
        c = RecoveryConfig(reg, piece2)
        h = h_rule(reg.eta)
        _, n, _ = box_fn(c, h) if box_fn else default_box(geom, c, h, shape)
        return float(np.prod(n))

    for reg in regimes:
        if npoints(reg) > budget:
            feasible = [r.eta for r in regimes if npoints(r) <= budget]
            hint = f"; smallest feasible eta in the schedule is {min(feasible)}" if feasible else ""
            raise BudgetError(f"grid for eta = {reg.eta} needs {npoints(reg):.3g} points > budget {budget:.3g}{hint}")

    for reg in regimes:
        t0 = time.perf_counter()
        cfg = RecoveryConfig(reg, piece2)
        h = h_rule(reg.eta)
        origin, n, periodic = box_fn(cfg, h) if box_fn else default_box(geom, cfg, h, shape)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg.check(h=h, r0=shape.r0() if shape is not None else None)
        rf = RecoveryField(geom, cfg, shape, mesh, v_field)
        cut = rf.seam_cut if (cut_seam and shape is not None) else None
        E = energy_of_sampler(rf, origin, h, n, reg, include_fn=rf.include if shape is not None else None,
                              periodic=periodic, cut_fn=cut, region_fn=rf.band_region)
        E = {k: multiplicity * v for k, v in E.items()}
        tgt = target(reg) if callable(target) else float(target)
        frac = E["region"] / E["total"] if E["total"] != 0 else float("nan")
        rows.append(LimsupRow(reg.eta, reg.xi, h, E, frac, tgt, time.perf_counter() - t0))
    if csv_path is not None:
        write_csv(csv_path, LIMSUP_HEADER, [r.as_list() for r in rows])
    return rows


def limsup_trend_ok(rows, slack=0.15):
    """Ratios decrease with eta and the last one is within 1 + slack."""
    ratios = [r.ratio for r in sorted(rows, key=lambda r: -r.eta)]
    mono = all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))
    return mono and ratios[-1] <= 1 + slack, ratios


# --------------------------------------------------------------------------
# presets


def plate_geometry(half=4.0):
    """Horizontal square T through the origin, large enough to cover any periodic cell."""
    from .geometry import square_mesh
    V, F = square_mesh((-half, -half), (half, half), 0.0, n=4)
    return DefectGeometry([], V, F, meta=dict(kind="plate"))


def plate_box(cells=4):
    """box_fn for the plate: periodic cell of `cells` voxels in x and y,
    z spanning the collar plus two cells on each side."""
    def box_fn(cfg, h):
        zmax = cfg.width + 2 * h
        nz = int(math.ceil(2 * zmax / h)) + 1
        # centre the z nodes so the plane z = 0 lies between nodes
        if nz % 2:
            nz += 1
        origin = np.array([0.0, 0.0, -h * (nz - 1) / 2])
        return origin, (cells, cells, nz), (True, True, False)
    return box_fn


def plate_target(cells=4, h_rule=None):
    h_rule = h_rule or (lambda eta: eta / 8)

    def tgt(reg):
        m = reg.material
        A = (cells * h_rule(reg.eta)) ** 2
        return 4 * m.s_star * m.c_star * A
    return tgt


def hemisphere_box(shape: ParticleShape):
    """Upper half box above a particle centred at the origin; the lower half is
    the mirror image and contributes the same energy once the seam is cut."""
    lo, hi = shape.bounds()
    c = 0.5 * (lo + hi)
    R = float(np.max(hi - lo)) / 2

    def box_fn(cfg, h):
        ext = R + cfg.width + 2 * h
        n_xy = 2 * int(math.ceil(ext / h))
        nz = int(math.ceil(ext / h))
        origin = c + np.array([-(n_xy - 1) * h / 2, -(n_xy - 1) * h / 2, h / 2])
        return origin, (n_xy, n_xy, nz), (False, False, False)
    return box_fn
