"""The limit functional E0 on a (T, S, G) geometry around the particle, its
optimality diagnostics and the projection onto a convex particle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .domain import SurfaceMesh, gamma_curve
from .geometry import (DefectGeometry, PolylineLocator, TriangleLocator, boundary_edges,
                       polyline_length, triangle_areas)
from .io import write_csv
from .potentials import MaterialParams


class ConsistencyError(RuntimeError):
    """The two forms of E0 disagree: the F/G bookkeeping is broken."""


class UnsupportedGeometryError(ValueError):
    pass


@dataclass
class E0Breakdown:
    term_surface_base: float
    term_G: float
    term_line: float
    term_bulkT: float
    total: float
    total_F_form: float
    beta: float
    flags: list = field(default_factory=list)

    HEADER = ("term_surface_base", "term_G", "term_line", "term_bulkT", "total",
              "total_F_form", "beta")

    def as_row(self):
        return [getattr(self, k) for k in self.HEADER]

    def write_csv(self, path):
        write_csv(path, self.HEADER, [self.as_row()])


def _G_mask(geom, mesh):
    if geom.G is None:
        return np.zeros(len(mesh.vertices), bool)
    G = np.asarray(geom.G, bool)
    if G.shape != (len(mesh.vertices),):
        raise ValueError(f"G has {G.size} entries for a mesh with {len(mesh.vertices)} vertices")
    return G


def e0_surface_base(mesh: SurfaceMesh):
    """int_{nu3>0} (1 - cos theta) + int_{nu3<=0} (1 + cos theta), vertex-weighted."""
    nu3 = mesh.normals[:, 2]
    return float(np.sum(mesh.area_weights * (1.0 - np.abs(nu3))))


def F_region(mesh: SurfaceMesh, G):
    up = mesh.normals[:, 2] > 0
    return np.where(np.asarray(G, bool), ~up, up)


def e0_total(geom: DefectGeometry, mesh: SurfaceMesh | None, material: MaterialParams, beta,
             rtol=1e-6, check_boundary=True, boundary_tol=None):
    """Both forms of E0.  mesh may be None for a geometry without particle.

    boundary_tol (default 3 mesh edges) is the distance within which dT and
    S + Gamma are taken to coincide; use a few grid cells for extracted data.
    """
    s, c = material.s_star, material.c_star
    sc = s * c
    line = 0.5 * math.pi * s * s * beta * geom.mass_S
    bulk = 4 * sc * geom.mass_T
    flags = []
    if mesh is None:
        base = termG = 0.0
        fform = 0.0
    else:
        G = _G_mask(geom, mesh)
        w = mesh.area_weights
        nu3 = mesh.normals[:, 2]
        base = 2 * sc * e0_surface_base(mesh)
        termG = 4 * sc * float(np.sum(w[G] * np.abs(nu3[G])))
        F = F_region(mesh, G)
        fform = 2 * sc * float(np.sum(w[F] * (1 - nu3[F])) + np.sum(w[~F] * (1 + nu3[~F])))
    total = base + termG + line + bulk
    fform += line + bulk
    if abs(fform - total) > rtol * max(abs(total), 1e-300):
        raise ConsistencyError(f"E0 forms disagree: {total!r} vs {fform!r}")
    if check_boundary and mesh is not None:
        tol = 3 * _edge_scale(mesh) if boundary_tol is None else boundary_tol
        res = admissibility_residual(geom, mesh, match=tol)
        if res > tol:
            flags.append(f"boundary condition dT = S + Gamma violated (residual {res:.3g})")
    return E0Breakdown(base, termG, line, bulk, total, fform, float(beta), flags)


def _edge_scale(mesh):
    F = mesh.faces
    e = mesh.vertices[F[:, [1, 2, 0]]] - mesh.vertices[F]
    L = np.linalg.norm(e, axis=2)
    return float(np.median(L[L > 0])) if np.any(L > 0) else 1.0


def _sample(polys, step):
    out = []
    for p in polys:
        p = np.asarray(p)
        for a, b in zip(p[:-1], p[1:]):
            k = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
            t = (np.arange(k) + 0.5) / k
            out.append(a + t[:, None] * (b - a))
    return np.concatenate(out) if out else np.zeros((0, 3))


def admissibility_residual(geom: DefectGeometry, mesh: SurfaceMesh, match=None):
    """Distance between the bulk boundary of T and S + dF taken mod 2.

    Pieces of S and dF closer than `match` (default 1.5 mesh edges) cancel; the remaining curve
    must coincide with the boundary of T in the bulk.  Returns the larger
    directed Hausdorff distance (0 when both sides are empty).
    """
    h = _edge_scale(mesh)
    match = 1.5 * h if match is None else match
    F = F_region(mesh, _G_mask(geom, mesh))
    dF = [] if (F.all() or not F.any()) else gamma_curve(mesh, np.where(F, 1.0, -1.0))[0]
    S = [np.asarray(p) for p in geom.S if len(p) > 1]
    step = 0.5 * h
    ps, pf = _sample(S, step), _sample(dF, step)
    keep = []
    if len(ps):
        d = PolylineLocator(dF).query(ps)[1] if dF else np.full(len(ps), np.inf)
        keep.append(ps[d > match])
    if len(pf):
        d = PolylineLocator(S).query(pf)[1] if S else np.full(len(pf), np.inf)
        keep.append(pf[d > match])
    U = np.concatenate(keep) if keep else np.zeros((0, 3))
    faces = geom.T_faces
    if geom.T_on_M is not None and len(faces):
        faces = faces[~geom.T_on_M]
    e = boundary_edges(faces)
    if len(e) == 0:
        return 0.0 if len(U) == 0 else math.inf
    segs = geom.T_vertices[e]
    if len(U) == 0:
        return math.inf
    pb = _sample(list(segs), step)
    d1 = cKDTree(U).query(pb)[0]
    d2 = PolylineLocator(list(segs)).query(U)[1]
    # an isolated unmatched sample is quadrature noise, not a curve
    return float(max(np.quantile(d1, 0.99), np.quantile(d2, 0.99)))


# --------------------------------------------------------------------------
# optimality diagnostics


@dataclass
class YoungReport:
    points: np.ndarray
    residual: np.ndarray
    excluded_near_S: int

    @property
    def empty(self):
        return len(self.residual) == 0

    def stats(self):
        if self.empty:
            return dict(count=0, mean=math.nan, max=math.nan)
        return dict(count=int(len(self.residual)), mean=float(self.residual.mean()),
                    max=float(self.residual.max()))


def young_law_residual(geom: DefectGeometry, mesh: SurfaceMesh, contact_tol=None,
                       exclude_S=None):
    """|nu_dT . nu_dF+ - nu_M . e3| at the contact vertices of T with the particle.

    nu_dT is the conormal of T pointing into T, nu_dF+ the conormal of F on the
    particle pointing out of F.  Vertices within exclude_S (default 3 mesh
    edges) of S are left out.
    """
    h = _edge_scale(mesh)
    contact_tol = 0.5 * h if contact_tol is None else contact_tol
    exclude_S = 3 * h if exclude_S is None else exclude_S
    V, Fa = geom.T_vertices, geom.T_faces
    if geom.T_on_M is not None and len(Fa):
        Fa = Fa[~geom.T_on_M]
    empty = YoungReport(np.zeros((0, 3)), np.zeros(0), 0)
    if len(Fa) == 0:
        return empty
    loc = TriangleLocator(mesh.vertices, mesh.faces)
    foot, dist, _, face = loc.query(V)
    on_M = dist <= contact_tol
    e = np.concatenate([Fa[:, [0, 1]], Fa[:, [1, 2]], Fa[:, [2, 0]]])
    opp = np.concatenate([Fa[:, 2], Fa[:, 0], Fa[:, 1]])
    key = np.sort(e, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    bnd = (cnt[inv] == 1) & on_M[e[:, 0]] & on_M[e[:, 1]]
    if not np.any(bnd):
        return empty
    e, opp = e[bnd], opp[bnd]
    a, b, o = V[e[:, 0]], V[e[:, 1]], V[opp]
    tau = b - a
    tau /= np.linalg.norm(tau, axis=1, keepdims=True)
    inward = (o - a) - np.einsum("ki,ki->k", o - a, tau)[:, None] * tau
    inward /= np.linalg.norm(inward, axis=1, keepdims=True)
    # accumulate per contact vertex
    nv = len(V)
    acc_in = np.zeros((nv, 3))
    for k in range(2):
        np.add.at(acc_in, e[:, k], inward)
    verts = np.unique(e)
    nu_T = acc_in[verts]
    nu_T /= np.linalg.norm(nu_T, axis=1, keepdims=True)
    p = foot[verts]
    n_M = _mesh_normal_at(mesh, p)
    t_edge = np.cross(n_M, nu_T)  # tangent of the contact curve, up to sign
    c = np.cross(n_M, t_edge)
    c /= np.maximum(np.linalg.norm(c, axis=1, keepdims=True), 1e-300)
    # orient c out of F using the F indicator in a small neighbourhood
    Freg = F_region(mesh, _G_mask(geom, mesh))
    tree = cKDTree(mesh.vertices)
    nb = tree.query_ball_point(p, 2.5 * h)
    sgn = np.ones(len(p))
    for i, idx in enumerate(nb):
        idx = np.asarray(idx, int)
        if len(idx) == 0:
            continue
        m = np.sum(np.where(Freg[idx], 1.0, -1.0) * ((mesh.vertices[idx] - p[i]) @ c[i]))
        sgn[i] = -1.0 if m > 0 else 1.0
    c *= sgn[:, None]
    res = np.abs(np.einsum("ki,ki->k", nu_T, c) - n_M[:, 2])
    keep = np.ones(len(verts), bool)
    S = [np.asarray(q) for q in geom.S if len(q) > 1]
    if S:
        keep = PolylineLocator(S).query(V[verts])[1] > exclude_S
    return YoungReport(p[keep], res[keep], int(np.sum(~keep)))


def _mesh_normal_at(mesh, p):
    """Vertex normals interpolated at the nearest mesh point."""
    _, idx = cKDTree(mesh.vertices).query(p, k=3)
    w = 1.0 / np.maximum(np.linalg.norm(mesh.vertices[idx] - p[:, None], axis=2), 1e-12)
    n = np.einsum("kj,kji->ki", w, mesh.normals[idx])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass
class CurvatureReport:
    T_mean_H: float
    T_max_abs_H: float
    T_vertices: int
    degenerate_faces: int
    S_mean_kappa: float
    S_max_dev: float
    S_target: float | None
    S_points: int


def _cot(u, v):
    cr = np.linalg.norm(np.cross(u, v), axis=1)
    return np.einsum("ki,ki->k", u, v) / np.maximum(cr, 1e-300)


def mean_curvature(V, F, max_aspect=50.0):
    """Cotangent-Laplacian mean curvature |H| at interior vertices.

    Returns (vertex indices, H, number of degenerate faces dropped).
    """
    V = np.asarray(V, float)
    t = V[F]
    L = np.linalg.norm(t[:, [1, 2, 0]] - t, axis=2)
    A = triangle_areas(V, F)
    # aspect: longest edge over the matching height
    aspect = L.max(1) ** 2 / np.maximum(2 * A, 1e-300)
    bad = aspect > max_aspect
    lap = np.zeros_like(V)
    area = np.zeros(len(V))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        a, b, c = F[:, i], F[:, j], F[:, k]
        ck = _cot(V[a] - V[c], V[b] - V[c])
        ck[bad] = 0.0
        d = (V[b] - V[a]) * ck[:, None]
        np.add.at(lap, a, d)
        np.add.at(lap, b, -d)
        np.add.at(area, a, np.where(bad, 0.0, A / 3))
    skip = np.zeros(len(V), bool)
    skip[boundary_edges(F).ravel()] = True
    skip[F[bad].ravel()] = True
    used = np.zeros(len(V), bool)
    used[F.ravel()] = True
    idx = np.nonzero(used & ~skip & (area > 0))[0]
    H = 0.5 * np.linalg.norm(lap[idx], axis=1) / (2 * area[idx])
    return idx, H, int(bad.sum())


def polyline_curvature(p):
    """Circumradius curvature of consecutive triples (closed polylines wrap)."""
    p = np.asarray(p, float)
    closed = len(p) > 3 and np.allclose(p[0], p[-1])
    if closed:
        q = p[:-1]
        a, b, c = np.roll(q, 1, 0), q, np.roll(q, -1, 0)
    else:
        a, b, c = p[:-2], p[1:-1], p[2:]
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    area2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    return 2 * area2 / np.maximum(ab * bc * ca, 1e-300)


def s_curvature_target(material: MaterialParams, beta):
    return 8 / math.pi * material.c_star / material.s_star / beta


def curvature_diagnostics(geom: DefectGeometry, material: MaterialParams | None = None,
                          beta=None, max_aspect=50.0):
    Fa = geom.T_faces
    if geom.T_on_M is not None and len(Fa):
        Fa = Fa[~geom.T_on_M]
    if len(Fa):
        _, H, bad = mean_curvature(geom.T_vertices, Fa, max_aspect)
    else:
        H, bad = np.zeros(0), 0
    target = s_curvature_target(material, beta) if material is not None and beta else None
    k = [polyline_curvature(p) for p in geom.S if len(p) >= 3]
    k = np.concatenate(k) if k else np.zeros(0)
    ref = target if target is not None else (float(k.mean()) if len(k) else math.nan)
    return CurvatureReport(
        float(H.mean()) if len(H) else math.nan, float(H.max()) if len(H) else math.nan,
        int(len(H)), bad,
        float(k.mean()) if len(k) else math.nan,
        float(np.max(np.abs(k - ref))) if len(k) else math.nan, target, int(len(k)))


# --------------------------------------------------------------------------
# projection onto a convex particle


def check_convex(mesh: SurfaceMesh, tol=None):
    """Every mesh neighbour lies below the tangent plane of a vertex, up to tol
    (default 1e-3 mesh edges).  Returns (ok, worst excess)."""
    V, F = mesh.vertices, mesh.faces
    tol = 1e-3 * _edge_scale(mesh) if tol is None else tol
    e = np.unique(np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1), axis=0)
    i, j = e[:, 0], e[:, 1]
    d = np.concatenate([np.einsum("ki,ki->k", V[j] - V[i], mesh.normals[i]),
                        np.einsum("ki,ki->k", V[i] - V[j], mesh.normals[j])])
    worst = float(d.max(initial=0.0))
    return worst <= tol, worst


def _ray_hits(origins, dirs, tri, pairs):
    """Moller-Trumbore for (origin index, triangle index) pairs, rays t > 0."""
    o, d = origins[pairs[:, 0]], dirs[pairs[:, 0]]
    t = tri[pairs[:, 1]]
    e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
    pv = np.cross(d, e2)
    det = np.einsum("ki,ki->k", e1, pv)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tv = o - t[:, 0]
    u = np.einsum("ki,ki->k", tv, pv) * inv
    qv = np.cross(tv, e1)
    v = np.einsum("ki,ki->k", d, qv) * inv
    s = np.einsum("ki,ki->k", e2, qv) * inv
    return ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (s > 0)


def _project(P, mesh, shape):
    if shape is None:
        return TriangleLocator(mesh.vertices, mesh.faces).query(P)[0]
    for _ in range(3):
        P = P - shape.sdf(P)[:, None] * shape.normal(P)
    return P


@dataclass
class ProjectionResult:
    geometry: DefectGeometry
    before: E0Breakdown
    after: E0Breakdown
    covered: np.ndarray

    @property
    def decreased(self):
        return self.after.total <= self.before.total


def convex_projection_reduce(geom: DefectGeometry, mesh: SurfaceMesh, material: MaterialParams,
                             beta, slack=1e-9, convex_tol=None, shape=None):
    """Project T and S onto the particle along the nearest-point map.

    With the analytic shape given, S is projected onto the smooth surface;
    otherwise onto the faceted mesh, where curves snapping to edges come out
    slightly long.

    The bulk part of T lands on the particle and is added to G mod 2; S is
    replaced by its projection.  Raises ConsistencyError if the energy grows.
    """
    ok, worst = check_convex(mesh, convex_tol)
    if not ok:
        raise UnsupportedGeometryError(f"particle mesh is not convex (worst dihedral excess {worst:.3g})")
    before = e0_total(geom, mesh, material, beta, check_boundary=False)
    G = _G_mask(geom, mesh).copy()
    Fa = geom.T_faces
    if geom.T_on_M is not None and len(Fa):
        Fa = Fa[~geom.T_on_M]
    covered = np.zeros(len(mesh.vertices), bool)
    if len(Fa):
        # a particle vertex x is covered when its outward normal ray meets T
        tri = geom.T_vertices[Fa]
        loc = TriangleLocator(mesh.vertices, mesh.faces)
        ptri = loc.query(tri.reshape(-1, 3))[0].reshape(-1, 3, 3)
        cen = ptri.mean(1)
        rad = float(np.max(np.linalg.norm(ptri - cen[:, None], axis=2))) + 2 * _edge_scale(mesh)
        near = cKDTree(cen).query_ball_point(mesh.vertices, rad)
        pairs = np.array([(i, j) for i, lst in enumerate(near) for j in lst], np.int64).reshape(-1, 2)
        if len(pairs):
            hit = _ray_hits(mesh.vertices, mesh.normals, tri, pairs)
            cnt = np.bincount(pairs[hit, 0], minlength=len(mesh.vertices))
            covered = cnt % 2 == 1
    S = [_project(np.asarray(p, float), mesh, shape) for p in geom.S]
    red = DefectGeometry(S, np.zeros((0, 3)), np.zeros((0, 3), np.int64), G ^ covered,
                         meta=dict(geom.meta, projected=True))
    after = e0_total(red, mesh, material, beta, check_boundary=False)
    if after.total > before.total + slack * max(abs(before.total), 1.0):
        raise ConsistencyError(f"projection increased E0: {before.total!r} -> {after.total!r}")
    return ProjectionResult(red, before, after, covered)


# --------------------------------------------------------------------------
# candidate geometries on the unit sphere centred at the origin

PRESETS = ("stuck", "glued", "detached")


def preset_geometry(name, mesh: SurfaceMesh, z0=0.8, rho_s=0.5, z_s=1.2, n=256):
    """stuck: S on the equator, no T.  glued: no S, T glued to the upper
    hemisphere.  detached: S a circle of radius rho_s at height z_s joined by
    a conical T to the latitude z0, with the band 0 < z < z0 in G."""
    from .geometry import circle, revolution_mesh
    nz = mesh.normals[:, 2]
    none = np.zeros(len(mesh.vertices), bool)
    if name == "stuck":
        return DefectGeometry([circle(1.0, n=n)], G=none, meta=dict(kind=name))
    if name == "glued":
        return DefectGeometry([], G=nz > 0, meta=dict(kind=name))
    if name == "detached":
        a = math.sqrt(1 - z0 * z0)
        k = np.linspace(0, 1, 17)
        V, F = revolution_mesh(a + k * (rho_s - a), z0 + k * (z_s - z0), n)
        G = (nz > 0) & (mesh.vertices[:, 2] < z0)
        return DefectGeometry([circle(rho_s, (0, 0, z_s), n=n)], V, F, G, meta=dict(kind=name))
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


def preset_tradeoff(name, material: MaterialParams, beta, z0=0.8, rho_s=0.5, z_s=1.2):
    """Closed-form (line saving, added surface cost) against the stuck ring."""
    s, c = material.s_star, material.c_star
    per_len = 0.5 * math.pi * s * s * beta
    if name == "stuck":
        return 0.0, 0.0
    if name == "glued":
        return per_len * 2 * math.pi, 4 * s * c * math.pi
    if name == "detached":
        a = math.sqrt(1 - z0 * z0)
        cone = math.pi * (a + rho_s) * math.hypot(a - rho_s, z_s - z0)
        return per_len * 2 * math.pi * (1 - rho_s), 4 * s * c * (cone + math.pi * z0 * z0)
    raise ValueError(f"unknown preset {name!r}")
