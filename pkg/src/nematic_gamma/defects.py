"""Defect extraction from a Q field: the line set S (half-integer winding of the
director), the surface T (horizontal-director level set), the region F on the
particle, and diagnostics of the energy they carry."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qtensor as qt
from .domain import ParticleShape, SurfaceMesh, gamma_curve, write_obj
from .geometry import DefectGeometry, PolylineLocator, polyline_length
from .io import write_csv, write_polylines
from .profile1d import _sym0_from_orthonormal
from .relax import QField, voxel_density


class AmbiguityError(RuntimeError):
    pass


class ExtractionResolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Thresholds:
    """Defaults relative to s_*: s_min = 0.2, gap_min = 0.1; dot_min for the
    orientation propagation; max_excluded is the tolerated fraction of cubes
    dropped for failed propagation."""
    s_min: float = 0.2
    gap_min: float = 0.1
    dot_min: float = 0.1
    max_excluded: float = 0.01
    band: float = 1.5

    def absolute(self, s_star):
        return self.s_min * s_star, self.gap_min * s_star


@dataclass(frozen=True)
class PerturbY:
    Y: np.ndarray
    alpha: float
    seed: int | None


def sample_Y(alpha, seed=None):
    """Uniform sample of the ball of radius alpha in Sym0 (5 dimensions)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return PerturbY(np.zeros((3, 3)), 0.0, seed)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(5)
    d /= np.linalg.norm(d)
    radius = alpha * rng.random() ** 0.2
    Y = _sym0_from_orthonormal(d * radius)
    nrm = math.sqrt(float(np.sum(Y * Y)))
    if nrm > alpha:
        Y *= alpha / nrm
    return PerturbY(Y, float(alpha), seed)


def _spectrum(M):
    w, V = np.linalg.eigh(M)
    return w[..., ::-1], V[..., :, 2]


def _pad_periodic(a, periodic):
    """Append one wrapped layer along each periodic axis."""
    for ax in range(3):
        if periodic[ax]:
            first = np.take(a, [0], axis=ax)
            a = np.concatenate([a, first], axis=ax)
    return a


# --------------------------------------------------------------------------
# S: plaquette winding


@dataclass
class LineSet:
    polylines: list
    closed: list
    length: float
    ambiguous_cells: int
    pierced: int


def _face_offsets(ax):
    u, v = [a for a in range(3) if a != ax]
    e = np.eye(3, dtype=int)
    return [np.zeros(3, int), e[u], e[u] + e[v], e[v]], u, v


def _pierced(nvec, ax, node_ok=None):
    """Net sign flip after transporting the director around each plaquette
    normal to `ax` (all plaquettes of the padded array).  Plaquettes with a
    corner outside node_ok never count."""
    offs, u, v = _face_offsets(ax)
    n = nvec.shape
    lim = [n[0], n[1], n[2]]
    lim[u] -= 1
    lim[v] -= 1
    sl = lambda o: nvec[o[0]:o[0] + lim[0], o[1]:o[1] + lim[1], o[2]:o[2] + lim[2]]
    corners = [sl(o) for o in offs]
    cur = corners[0]
    for c in corners[1:] + [corners[0]]:
        d = np.einsum("...i,...i->...", cur, c)
        cur = np.where((d < 0)[..., None], -c, c)
    out = np.einsum("...i,...i->...", cur, corners[0]) < 0
    if node_ok is not None:
        for o in offs:
            out &= _corner_view(node_ok, o, lim)
    return out


def _corner_view(a, o, lim):
    return a[o[0]:o[0] + lim[0], o[1]:o[1] + lim[1], o[2]:o[2] + lim[2]]


def extract_S(field_: QField, y: PerturbY | None = None, thresholds: Thresholds = Thresholds(),
              refine=9):
    """Trace the lines where the director winds by a half turn."""
    grid = field_.grid
    h = grid.h
    per = tuple(grid.periodic)
    M = field_.Q - (0 if y is None else y.Y)
    lam, nvec = _spectrum(M)
    # the solid interior holds placeholder values, not data
    node_ok = _pad_periodic(grid.phi > -grid.h, per)
    nvec_p = _pad_periodic(nvec, per)
    Mp = _pad_periodic(M, per)
    shape_p = nvec_p.shape[:3]
    ncube = [s - 1 for s in shape_p]

    pierced = {}
    for ax in range(3):
        P = _pierced(nvec_p, ax, node_ok)
        # faces on the wrapped layer duplicate those at index 0
        if per[ax]:
            sl = [slice(None)] * 3
            sl[ax] = slice(0, shape_p[ax] - 1)
            P = P[tuple(sl)]
        pierced[ax] = P

    def face_key(ax, idx):
        idx = list(idx)
        if per[ax]:
            idx[ax] %= shape_p[ax] - 1
        return (ax, idx[0], idx[1], idx[2])

    def face_pierced(ax, idx):
        ax_, i, j, k = face_key(ax, idx)
        P = pierced[ax]
        if not (0 <= i < P.shape[0] and 0 <= j < P.shape[1] and 0 <= k < P.shape[2]):
            return False
        return bool(P[i, j, k])

    # sub-face refinement: minimize the gap of the bilinearly interpolated tensor
    tt = np.linspace(0.0, 1.0, refine)
    TU, TV = np.meshgrid(tt, tt, indexing="ij")
    wts = np.stack([(1 - TU) * (1 - TV), TU * (1 - TV), TU * TV, (1 - TU) * TV], -1).reshape(-1, 4)

    refined = {}

    def local_offset(key):
        if key in refined:
            return refined[key]
        ax, i, j, k = key
        offs, u, v = _face_offsets(ax)
        base = np.array([i, j, k])
        Qc = np.stack([Mp[tuple(base + o)] for o in offs])
        Qs = np.einsum("pc,cij->pij", wts, Qc)
        lam_s = np.linalg.eigvalsh(Qs)
        g = lam_s[:, 2] - lam_s[:, 1]
        best = int(np.argmin(g))
        off = np.zeros(3)
        off[u] = TU.ravel()[best]
        off[v] = TV.ravel()[best]
        refined[key] = off
        return off

    # cubes touching at least one pierced face
    cand = np.zeros(ncube, bool)
    for ax in range(3):
        # cube c touches the faces at c[ax] and c[ax] + 1
        src = pierced[ax]
        if per[ax]:
            src = np.concatenate([src, np.take(src, [0], axis=ax)], axis=ax)
        for shift in (0, 1):
            sl = [slice(0, ncube[d]) for d in range(3)]
            sl[ax] = slice(shift, shift + ncube[ax])
            cand |= src[tuple(sl)]
    links = {}
    ambiguous = 0
    for c in map(tuple, np.argwhere(cand)):
        faces = []
        for ax in range(3):
            for shift in (0, 1):
                idx = list(c)
                idx[ax] += shift
                if face_pierced(ax, idx):
                    # position relative to the cube corner, unwrapped
                    faces.append((face_key(ax, idx), np.array(idx) - np.array(c)))
        if len(faces) < 2:
            # a line leaving through the boundary of a non-periodic box
            continue
        if len(faces) % 2:
            raise AmbiguityError(f"odd number of pierced faces in cell {c}")
        if len(faces) > 2:
            ambiguous += 1
        pos = [f[1] + local_offset(f[0]) for f in faces]
        remaining = list(range(len(faces)))
        while remaining:
            a = remaining.pop(0)
            d = [np.linalg.norm(pos[a] - pos[b]) for b in remaining]
            b = remaining.pop(int(np.argmin(d)))
            ka, kb = faces[a][0], faces[b][0]
            disp = (pos[b] - pos[a]) * h
            links.setdefault(ka, []).append((kb, disp))
            links.setdefault(kb, []).append((ka, -disp))

    # walk the chains; endpoints (degree 1) first so open chains start at an end
    origin = np.asarray(grid.origin, float)

    def abs_pos(key):
        ax, i, j, k = key
        return origin + h * (np.array([i, j, k]) + local_offset(key))

    used = set()
    polylines, closed = [], []
    order = sorted(links, key=lambda k: (len(links[k]) != 1, k))
    for start in order:
        if start in used:
            continue
        pts = [abs_pos(start)]
        used.add(start)
        prev, cur, is_closed = None, start, False
        while True:
            nxt = [(k, d) for k, d in links[cur] if k != prev and k not in used]
            back = [(k, d) for k, d in links[cur] if k == start and prev is not None and k != prev]
            if not nxt:
                if back and len(pts) > 2:
                    pts.append(pts[-1] + back[0][1])
                    is_closed = True
                break
            k, d = nxt[0]
            pts.append(pts[-1] + d)
            used.add(k)
            prev, cur = cur, k
        if len(pts) > 1:
            polylines.append(np.array(pts))
            closed.append(is_closed)
    if ambiguous:
        warnings.warn(f"{ambiguous} cells with more than two pierced faces were paired by proximity")
    n_pierced = int(sum(int(p.sum()) for p in pierced.values()))
    return LineSet(polylines, closed, float(sum(polyline_length(p) for p in polylines)), ambiguous, n_pierced)


# --------------------------------------------------------------------------
# T: marching tetrahedra on the oriented n3


@dataclass
class SurfaceSet:
    vertices: np.ndarray
    faces: np.ndarray
    area: float
    G: np.ndarray | None
    mu_G: float
    excluded: int
    valid_cubes: int
    on_particle_area: float = 0.0
    periodic_faces: list = field(default_factory=list)

    @property
    def excluded_fraction(self):
        return self.excluded / self.valid_cubes if self.valid_cubes else 0.0


# corner c = dx + 2 dy + 4 dz; propagation tree over cube edges
_TREE = [(0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 6), (3, 7)]
_CORNER = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])
_TETS = []
for perm in itertools.permutations(range(3)):
    c1 = 1 << perm[0]
    c2 = c1 | (1 << perm[1])
    _TETS.append((0, c1, c2, 7))
_TETS = np.array(_TETS)


def _tet_triangles(vals, pos, keys):
    """Zero-level triangles of linear functions on tetrahedra.

    vals (N, 4), pos (N, 4, 3), keys (N, 4) global node ids.  Returns
    triangle vertex positions (M, 3, 3) and edge keys (M, 3, 2).
    """
    pos_out, key_out = [], []
    positive = vals > 0
    code = positive @ (1 << np.arange(4))

    def crossing(sel, a, b):
        fa, fb = vals[sel, a], vals[sel, b]
        t = fa / (fa - fb)
        p = pos[sel, a] + t[:, None] * (pos[sel, b] - pos[sel, a])
        k = np.sort(np.stack([keys[sel, a], keys[sel, b]], -1), axis=1)
        return p, k

    for cd in range(1, 15):
        sel = code == cd
        if not np.any(sel):
            continue
        pos_set = [i for i in range(4) if cd >> i & 1]
        neg_set = [i for i in range(4) if not cd >> i & 1]
        if len(pos_set) in (1, 3):
            lone, others = (pos_set[0], neg_set) if len(pos_set) == 1 else (neg_set[0], pos_set)
            pts = [crossing(sel, lone, o) for o in others]
            pos_out.append(np.stack([p for p, _ in pts], 1))
            key_out.append(np.stack([k for _, k in pts], 1))
        else:
            a, b = pos_set
            c, d = neg_set
            ac, ad, bd, bc = (crossing(sel, a, c), crossing(sel, a, d), crossing(sel, b, d), crossing(sel, b, c))
            for tri in ((ac, ad, bd), (ac, bd, bc)):
                pos_out.append(np.stack([p for p, _ in tri], 1))
                key_out.append(np.stack([k for _, k in tri], 1))
    if not pos_out:
        return np.zeros((0, 3, 3)), np.zeros((0, 3, 2), np.int64)
    return np.concatenate(pos_out), np.concatenate(key_out)


def extract_T(field_: QField, y: PerturbY | None = None, v=None, thresholds: Thresholds = Thresholds(),
              shape: ParticleShape | None = None, mesh: SurfaceMesh | None = None, strict=True, slab=16):
    """Zero set of the oriented n3 of Q - Y over cubes satisfying s > s_min
    and cone_gap > gap_min.

    v: reference field for the sign of the director (array (..., 3) on the
    grid or one vector; default e1).  Triangles within `band` cells of the
    particle are moved to the surface region G instead of T.
    """
    grid = field_.grid
    h = grid.h
    per = tuple(grid.periodic)
    s_star = field_.regime.material.s_star
    s_min, gap_min = thresholds.absolute(s_star)
    M = field_.Q - (0 if y is None else y.Y)
    lam, nvec = _spectrum(M)
    valid = (lam[..., 0] - lam[..., 2] > s_min) & (lam[..., 0] - lam[..., 1] > gap_min)
    if shape is not None:
        valid &= grid.phi > -grid.h  # solid interior carries no T
    if v is None:
        v = qt.E1
    V = np.broadcast_to(np.asarray(v, float), nvec.shape)
    nvec_p = _pad_periodic(nvec, per)
    valid_p = _pad_periodic(valid, per)
    V_p = _pad_periodic(np.ascontiguousarray(V), per)
    shp = nvec_p.shape[:3]
    nc = [s - 1 for s in shp]
    nodes_per = grid.shape

    tri_pos, tri_key = [], []
    excluded = 0
    valid_cubes = 0
    for i0 in range(0, nc[0], slab):
        i1 = min(i0 + slab, nc[0])
        cn, cv, keys, cpos = [], [], [], []
        for c in range(8):
            dx, dy, dz = _CORNER[c]
            sl = (slice(i0 + dx, i1 + dx), slice(dy, dy + nc[1]), slice(dz, dz + nc[2]))
            cn.append(nvec_p[sl])
            cv.append(valid_p[sl])
            I, J, K = np.meshgrid(np.arange(i0 + dx, i1 + dx), np.arange(dy, dy + nc[1]),
                                  np.arange(dz, dz + nc[2]), indexing="ij")
            cpos.append(np.stack([I, J, K], -1))
            # welding key on wrapped indices for non-periodic axes only; periodic
            # seams stay open so triangles never span the whole box
            keys.append((I * (shp[1] + 1) + J) * (shp[2] + 1) + K)
        allvalid = np.all(np.stack(cv), axis=0)
        valid_cubes += int(allvalid.sum())
        n = [x.copy() for x in cn]
        ref = V_p[i0:i1, :nc[1], :nc[2]]
        s0 = np.where(np.einsum("...i,...i->...", n[0], ref) < 0, -1.0, 1.0)
        n[0] = n[0] * s0[..., None]
        ok = allvalid.copy()
        for a, b in _TREE:
            d = np.einsum("...i,...i->...", n[a], n[b])
            ok &= np.abs(d) >= thresholds.dot_min
            n[b] = n[b] * np.where(d < 0, -1.0, 1.0)[..., None]
        excluded += int(np.sum(allvalid & ~ok))
        sel = np.argwhere(ok)
        if len(sel) == 0:
            continue
        f8 = np.stack([n[c][ok][:, 2] for c in range(8)], 1)
        if not np.any((f8 > 0).any(1) & (f8 <= 0).any(1)):
            continue
        p8 = np.stack([cpos[c][ok] for c in range(8)], 1).astype(float)
        k8 = np.stack([keys[c][ok] for c in range(8)], 1)
        crossing = (f8 > 0).any(1) & (f8 <= 0).any(1)
        f8, p8, k8 = f8[crossing], p8[crossing], k8[crossing]
        vals = f8[:, _TETS].reshape(-1, 4)
        pos = p8[:, _TETS].reshape(-1, 4, 3)
        kk = k8[:, _TETS].reshape(-1, 4)
        tp, tk = _tet_triangles(vals, pos, kk)
        tri_pos.append(tp)
        tri_key.append(tk)

    if valid_cubes and excluded / valid_cubes > thresholds.max_excluded and strict:
        raise ExtractionResolutionError(
            f"orientation propagation failed in {excluded} of {valid_cubes} cubes; refine the grid")

    if tri_pos:
        tp = np.concatenate(tri_pos)
        tk = np.concatenate(tri_key)
    else:
        tp = np.zeros((0, 3, 3))
        tk = np.zeros((0, 3, 2), np.int64)
    tp = np.asarray(grid.origin) + h * tp
    areas = 0.5 * np.linalg.norm(np.cross(tp[:, 1] - tp[:, 0], tp[:, 2] - tp[:, 0]), axis=1)

    G = None
    mu_G = 0.0
    on_particle = 0.0
    if shape is not None and len(tp):
        cen = tp.mean(axis=1)
        near = shape.sdf(cen) < thresholds.band * h
        on_particle = float(areas[near].sum())
        if mesh is not None:
            G = np.zeros(len(mesh.vertices), bool)
            if np.any(near):
                from scipy.spatial import cKDTree
                nu = shape.normal(cen[near])
                proj = cen[near] - shape.sdf(cen[near])[:, None] * nu
                d, _ = cKDTree(proj).query(mesh.vertices)
                G = d < 1.5 * h
                mu_G = float(mesh.area_weights[G].sum())
        tp, tk, areas = tp[~near], tk[~near], areas[~near]
    elif mesh is not None:
        G = np.zeros(len(mesh.vertices), bool)

    # weld on edge keys
    flat = tk.reshape(-1, 2)
    if len(flat):
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        verts = np.zeros((len(uniq), 3))
        verts[inv] = tp.reshape(-1, 3)
        faces = inv.reshape(-1, 3)
    else:
        verts = np.zeros((0, 3))
        faces = np.zeros((0, 3), np.int64)
    return SurfaceSet(verts, faces, float(areas.sum()), G, mu_G, excluded, valid_cubes, on_particle,
                      [ax for ax in range(3) if per[ax]])


def T_boundary_segments(surf: SurfaceSet, grid=None):
    """Boundary edges of the extracted surface, without those on periodic seams."""
    from .geometry import boundary_edges
    e = boundary_edges(surf.faces)
    if len(e) == 0:
        return np.zeros((0, 2, 3))
    seg = surf.vertices[e]
    if grid is not None and surf.periodic_faces:
        keep = np.ones(len(seg), bool)
        lo = np.asarray(grid.origin)
        for ax in surf.periodic_faces:
            hi = lo[ax] + grid.h * (grid.shape[ax] - 0.5)
            on = np.all(seg[:, :, ax] >= hi - 1e-9 * grid.h, axis=1) | \
                np.all(seg[:, :, ax] <= lo[ax] + 0.5 * grid.h + 1e-9 * grid.h, axis=1)
            keep &= ~on
        seg = seg[keep]
    return seg


# --------------------------------------------------------------------------
# F on the particle


@dataclass
class FRegion:
    F: np.ndarray
    area_F: float
    area_Fc: float
    boundary: list
    boundary_length: float


def region_F(mesh: SurfaceMesh, G=None):
    """F = {nu3 > 0} outside G together with {nu3 <= 0} inside G."""
    up = mesh.normals[:, 2] > 0
    G = np.zeros(len(up), bool) if G is None else np.asarray(G, bool)
    F = np.where(G, ~up, up)
    w = mesh.area_weights
    if F.all() or (~F).all():
        curves, length = [], 0.0
    else:
        curves, length = gamma_curve(mesh, np.where(F, 1.0, -1.0))
    return FRegion(F, float(w[F].sum()), float(w[~F].sum()), curves, length)


# --------------------------------------------------------------------------
# consistency and energy diagnostics


@dataclass
class BoundaryResidual:
    T_to_SG: float
    SG_to_T: float

    @property
    def max(self):
        return max(self.T_to_SG, self.SG_to_T)


def _sample_segments(seg, step):
    out = []
    for a, b in seg:
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        t = np.linspace(0, 1, k + 1)[:, None]
        out.append(a + t * (b - a))
    return np.concatenate(out) if out else np.zeros((0, 3))


def boundary_residual(T_boundary, S, Gamma=(), step=None):
    """Directed Hausdorff distances between the boundary of T and S + Gamma.

    T_boundary: segments (k, 2, 3); S, Gamma: lists of polylines.
    """
    target = [np.asarray(p) for p in list(S) + list(Gamma) if len(p) > 1]
    T_boundary = np.asarray(T_boundary).reshape(-1, 2, 3)
    if len(T_boundary) == 0 and not target:
        return BoundaryResidual(0.0, 0.0)
    if len(T_boundary) == 0 or not target:
        return BoundaryResidual(math.inf, math.inf)
    if step is None:
        step = float(np.median(np.linalg.norm(T_boundary[:, 1] - T_boundary[:, 0], axis=1))) or 1.0
    A = _sample_segments(T_boundary, step)
    d1 = PolylineLocator(target).query(A)[1]
    segs = np.concatenate([np.stack([p[:-1], p[1:]], 1) for p in target])
    B = _sample_segments(segs, step)
    d2 = PolylineLocator([s for s in T_boundary]).query(B)[1]
    return BoundaryResidual(float(d1.max()), float(d2.max()))


@dataclass
class LineEnergyReport:
    density: float | None
    reference: float
    ratio: float | None
    tube_radius: float
    length: float
    voxels: int


def line_energy_density(field_: QField, S, radius=None):
    """eta * (energy in the tube of the given radius around S) / length(S),
    against (pi/2) s_*^2 eta |ln xi|.  Default radius sqrt(eta)."""
    r = field_.regime
    m = r.material
    ref = 0.5 * math.pi * m.s_star**2 * r.eta * abs(math.log(r.xi))
    radius = math.sqrt(r.eta) if radius is None else radius
    S = [np.asarray(p) for p in S if len(p) > 1]
    length = float(sum(polyline_length(p) for p in S))
    if length == 0:
        return LineEnergyReport(None, ref, None, radius, 0.0, 0)
    grid = field_.grid
    P = grid.points()
    dists = [PolylineLocator([p]).query(P)[1] for p in S]
    inside = [d <= radius for d in dists]
    tube = np.any(inside, axis=0)
    if len(S) > 1 and np.any(np.sum(inside, axis=0) > 1):
        warnings.warn("tubes around distinct lines overlap; shared voxels are counted once")
    D = voxel_density(field_.Q, field_.include, grid.h, r, tuple(grid.periodic))
    dens = r.eta * float(D[tube].sum()) / length
    return LineEnergyReport(dens, ref, dens / ref, radius, length, int(tube.sum()))


@dataclass
class RayReport:
    rays: list
    exceptional: np.ndarray
    eta_energy: np.ndarray
    C_fit: float
    flagged: np.ndarray


def n3_line_diagnostic(field_: QField, rays, delta, frak_c=1.0, flag_factor=10.0):
    """For grid lines (axis, (i, j)), the measure of {|n3| < 1 - c sqrt(delta)}
    against (K + 1) eta / C with K the eta-scaled energy on the line.

    C_fit is the largest constant for which every unflagged ray satisfies the
    bound.  Rays whose energy exceeds flag_factor times the median are flagged
    (bounded-energy precondition fails) and left out of the fit.
    """
    grid = field_.grid
    r = field_.regime
    h = grid.h
    D = voxel_density(field_.Q, field_.include, h, r, tuple(grid.periodic)) / h**3
    _, nvec = _spectrum(field_.Q)
    thr = 1 - frak_c * math.sqrt(delta)
    exc, K = [], []
    for ax, (i, j) in rays:
        sl = [i, j]
        sl.insert(ax, slice(None))
        n3 = np.abs(nvec[tuple(sl)][:, 2])
        exc.append(h * int(np.sum(n3 < thr)))
        K.append(r.eta * h * float(np.sum(D[tuple(sl)])))
    exc, K = np.array(exc, float), np.array(K)
    med = float(np.median(np.abs(K))) if len(K) else 0.0
    flagged = np.abs(K) > flag_factor * max(med, 1e-300)
    use = ~flagged & (exc > 0)
    C = float(np.min((K[use] + 1) * r.eta / exc[use])) if np.any(use) else math.inf
    return RayReport(list(rays), exc, K, C, flagged)


# --------------------------------------------------------------------------
# assembly and export


def extract_geometry(field_: QField, y=None, v=None, thresholds=Thresholds(), shape=None, mesh=None,
                     strict=True):
    lines = extract_S(field_, y, thresholds)
    surf = extract_T(field_, y, v, thresholds, shape, mesh, strict=strict)
    geom = DefectGeometry(lines.polylines, surf.vertices, surf.faces, surf.G,
                          meta=dict(S_closed=lines.closed, excluded=surf.excluded,
                                    valid_cubes=surf.valid_cubes, ambiguous=lines.ambiguous_cells))
    return geom, lines, surf


def write_S(path, polylines):
    write_polylines(path, polylines)


def write_T(path, surf: SurfaceSet):
    write_obj(path, surf.vertices, surf.faces, comments=[f"area {surf.area:.17g}"])


def write_F(obj_path, csv_path, mesh: SurfaceMesh, F):
    F = np.asarray(F, bool)
    comments = ["F per vertex (1 = in F)"] + [f"F {int(x)}" for x in F]
    write_obj(obj_path, mesh.vertices, mesh.faces, comments=comments)
    write_csv(csv_path, ["vertex", "F"], [[i, int(x)] for i, x in enumerate(F)])
