"""Defect geometry containers (line S, surface T, region G on the particle) and
synthetic test geometries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qtensor as qt


def polyline_length(p):
    p = np.asarray(p, float)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1))) if len(p) > 1 else 0.0


def is_closed(p, tol=1e-9):
    p = np.asarray(p)
    return len(p) > 2 and np.linalg.norm(p[0] - p[-1]) <= tol


def triangle_areas(V, F):
    if len(F) == 0:
        return np.zeros(0)
    v = V[F]
    return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


def boundary_edges(F):
    """Edges used by exactly one triangle (mod-2 boundary of the soup)."""
    if len(F) == 0:
        return np.zeros((0, 2), np.int64)
    e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, cnt = np.unique(e, axis=0, return_counts=True)
    return uniq[cnt % 2 == 1]


def weld(V, F, tol):
    """Merge vertices closer than tol (grid-snapped hashing)."""
    if len(V) == 0:
        return V, F
    key = np.round(V / tol).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    V2 = V[first]
    F2 = inv[F]
    ok = (F2[:, 0] != F2[:, 1]) & (F2[:, 1] != F2[:, 2]) & (F2[:, 0] != F2[:, 2])
    return V2, F2[ok]


@dataclass
class DefectGeometry:
    """S as polylines, T as a triangle soup, G as a vertex subset of the particle mesh.

    `T_on_M` marks T triangles that lie on the particle surface; they are
    accounted through G rather than in the bulk mass.
    """
    S: list = field(default_factory=list)
    T_vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    T_faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.int64))
    G: np.ndarray | None = None
    T_on_M: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mass_S(self):
        return float(sum(polyline_length(p) for p in self.S))

    @property
    def mass_T(self):
        a = triangle_areas(self.T_vertices, self.T_faces)
        if self.T_on_M is not None and len(a):
            a = a[~self.T_on_M]
        return float(a.sum())

    @property
    def empty_T(self):
        return len(self.T_faces) == 0

    def T_boundary_segments(self):
        e = boundary_edges(self.T_faces)
        return self.T_vertices[e] if len(e) else np.zeros((0, 2, 3))

    def S_segments(self):
        segs = [np.stack([p[:-1], p[1:]], axis=1) for p in self.S if len(p) > 1]
        return np.concatenate(segs) if segs else np.zeros((0, 2, 3))

    def union(self, other: "DefectGeometry"):
        nv = len(self.T_vertices)
        G = None
        if self.G is not None or other.G is not None:
            a = self.G if self.G is not None else np.zeros_like(other.G)
            b = other.G if other.G is not None else np.zeros_like(self.G)
            G = a ^ b  # Z2 coefficients
        return DefectGeometry(self.S + other.S,
                              np.concatenate([self.T_vertices, other.T_vertices]),
                              np.concatenate([self.T_faces, other.T_faces + nv]), G)


# --------------------------------------------------------------------------
# synthetic geometries


def circle(radius, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0), n=256):
    """Closed polyline (first point repeated at the end)."""
    nrm = np.asarray(normal, float)
    nrm /= np.linalg.norm(nrm)
    a = np.cross(nrm, qt.E1 if abs(nrm[0]) < 0.9 else qt.E2)
    a /= np.linalg.norm(a)
    b = np.cross(nrm, a)
    t = np.linspace(0, 2 * math.pi, n + 1)
    t[-1] = 0.0
    return np.asarray(center) + radius * (np.cos(t)[:, None] * a + np.sin(t)[:, None] * b)


def disk_mesh(radius, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0), rings=24, sectors=96):
    nrm = np.asarray(normal, float)
    nrm /= np.linalg.norm(nrm)
    a = np.cross(nrm, qt.E1 if abs(nrm[0]) < 0.9 else qt.E2)
    a /= np.linalg.norm(a)
    b = np.cross(nrm, a)
    V = [np.asarray(center, float)]
    for i in range(1, rings + 1):
        r = radius * i / rings
        t = 2 * math.pi * np.arange(sectors) / sectors
        V += list(np.asarray(center) + r * (np.cos(t)[:, None] * a + np.sin(t)[:, None] * b))
    V = np.array(V)
    F = []
    for j in range(sectors):
        F.append([0, 1 + j, 1 + (j + 1) % sectors])
    for i in range(1, rings):
        o0 = 1 + (i - 1) * sectors
        o1 = 1 + i * sectors
        for j in range(sectors):
            j1 = (j + 1) % sectors
            F.append([o0 + j, o1 + j, o1 + j1])
            F.append([o0 + j, o1 + j1, o0 + j1])
    return V, np.array(F, np.int64)


def annulus_mesh(r_in, r_out, z=0.0, rings=8, sectors=128):
    V, F = [], []
    t = 2 * math.pi * np.arange(sectors) / sectors
    for i in range(rings + 1):
        r = r_in + (r_out - r_in) * i / rings
        V += list(np.stack([r * np.cos(t), r * np.sin(t), np.full_like(t, z)], -1))
    for i in range(rings):
        o0, o1 = i * sectors, (i + 1) * sectors
        for j in range(sectors):
            j1 = (j + 1) % sectors
            F.append([o0 + j, o1 + j, o1 + j1])
            F.append([o0 + j, o1 + j1, o0 + j1])
    return np.array(V), np.array(F, np.int64)


def revolution_mesh(r, z, sectors=128, center=(0.0, 0.0, 0.0)):
    """Surface of revolution about the z axis through the profile points (r[k], z[k])."""
    r = np.asarray(r, float)
    z = np.asarray(z, float)
    t = 2 * math.pi * np.arange(sectors) / sectors
    V = np.concatenate([np.stack([ri * np.cos(t), ri * np.sin(t), np.full_like(t, zi)], -1)
                        for ri, zi in zip(r, z)]) + np.asarray(center, float)
    F = []
    for i in range(len(r) - 1):
        o0, o1 = i * sectors, (i + 1) * sectors
        for j in range(sectors):
            j1 = (j + 1) % sectors
            F.append([o0 + j, o1 + j, o1 + j1])
            F.append([o0 + j, o1 + j1, o0 + j1])
    return V, np.array(F, np.int64)


def uv_sphere(radius=1.0, n_lat=64, n_lon=128, center=(0.0, 0.0, 0.0)):
    """Latitude-longitude sphere (poles as single vertices).  Returns (V, F, normals)."""
    th = math.pi * np.arange(1, n_lat) / n_lat
    V, F = revolution_mesh(np.sin(th), np.cos(th), n_lon)
    n = len(V)
    V = np.concatenate([V, [[0, 0, 1.0], [0, 0, -1.0]]])
    cap = []
    last = (n_lat - 2) * n_lon
    for j in range(n_lon):
        j1 = (j + 1) % n_lon
        cap.append([n, j1, j])
        cap.append([n + 1, last + j, last + j1])
    F = np.concatenate([F, np.array(cap, np.int64)])
    N = V.copy()
    return radius * V + np.asarray(center, float), F, N


def square_mesh(lo, hi, z=0.0, n=8):
    """Axis-aligned square in the plane z = const."""
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], -1)
    F = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + (n + 1)
            F += [[a, b, b + 1], [a, b + 1, a + 1]]
    return V, np.array(F, np.int64)


def disk_with_ring(rho=1.0, center=(0.0, 0.0, 0.0), n=256):
    V, F = disk_mesh(rho, center)
    return DefectGeometry([circle(rho, center, n=n)], V, F, meta=dict(kind="disk", rho=rho))


# --------------------------------------------------------------------------
# nearest-point queries


def closest_point_on_triangles(p, a, b, c):
    """Closest points on triangles (a, b, c) to p; all arrays (..., 3)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...i,...i->...", ab, ap)
    d2 = np.einsum("...i,...i->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...i,...i->...", ab, bp)
    d4 = np.einsum("...i,...i->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...i,...i->...", ab, cp)
    d6 = np.einsum("...i,...i->...", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        out = a + ab * v[..., None] + ac * w[..., None]
        # edge regions, checked from the most generic to the most specific
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        out = np.where(m[..., None], b + (c - b) * t_bc[..., None], out)
        t_ac = d2 / (d2 - d6)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        out = np.where(m[..., None], a + ac * t_ac[..., None], out)
        t_ab = d1 / (d1 - d3)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        out = np.where(m[..., None], a + ab * t_ab[..., None], out)
    out = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, out)
    out = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, out)
    out = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, out)
    return out


def orient_faces(F):
    """Flip triangles so that neighbours induce opposite orders on shared edges.

    Returns the re-oriented faces and a component label per face.  Non-orientable
    components keep the last consistent assignment (mod-2 chains do not care).
    """
    F = np.array(F, np.int64, copy=True)
    nf = len(F)
    comp = -np.ones(nf, np.int64)
    edge_faces = {}
    for f, tri in enumerate(F):
        for k in range(3):
            e = tuple(sorted((tri[k], tri[(k + 1) % 3])))
            edge_faces.setdefault(e, []).append(f)

    def directed(tri, e):
        for k in range(3):
            if (tri[k], tri[(k + 1) % 3]) == e:
                return True
        return False

    label = 0
    for seed in range(nf):
        if comp[seed] >= 0:
            continue
        comp[seed] = label
        stack = [seed]
        while stack:
            f = stack.pop()
            tri = F[f]
            for k in range(3):
                e = (tri[k], tri[(k + 1) % 3])
                for g in edge_faces[tuple(sorted(e))]:
                    if g == f or comp[g] >= 0:
                        continue
                    if directed(F[g], e):
                        F[g] = F[g][::-1]
                    comp[g] = label
                    stack.append(g)
        label += 1
    return F, comp


class TriangleLocator:
    """Signed distance to an oriented triangle soup (KD-tree on centroids, exact
    distance to the k nearest candidates)."""

    def __init__(self, V, F, k=12):
        from scipy.spatial import cKDTree
        self.V = np.asarray(V, float)
        self.F, self.comp = orient_faces(F)
        # per component, orient the normals to point to +e3 on average
        tri = self.V[self.F]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        for c in np.unique(self.comp):
            sel = self.comp == c
            if np.sum(n[sel, 2]) < 0:
                self.F[sel] = self.F[sel][:, ::-1]
                n[sel] *= -1
        self.normals = n / np.linalg.norm(n, axis=1, keepdims=True)
        self.tri = self.V[self.F]
        self.k = min(k, len(self.F))
        self.tree = cKDTree(self.tri.mean(axis=1))

    def query(self, P):
        """Returns (foot point, unsigned distance, signed distance, face index)."""
        P = np.asarray(P, float)
        shp = P.shape[:-1]
        X = P.reshape(-1, 3)
        _, idx = self.tree.query(X, k=self.k)
        idx = idx.reshape(len(X), -1)
        best_d = np.full(len(X), np.inf)
        best_p = np.zeros_like(X)
        best_f = np.zeros(len(X), np.int64)
        for j in range(idx.shape[1]):
            f = idx[:, j]
            t = self.tri[f]
            q = closest_point_on_triangles(X, t[:, 0], t[:, 1], t[:, 2])
            d = np.linalg.norm(X - q, axis=1)
            better = d < best_d
            best_d[better] = d[better]
            best_p[better] = q[better]
            best_f[better] = f[better]
        sd = np.einsum("ki,ki->k", X - best_p, self.normals[best_f])
        return (best_p.reshape(shp + (3,)), best_d.reshape(shp),
                sd.reshape(shp), best_f.reshape(shp))


class PolylineLocator:
    """Nearest point on a set of polylines, with the segment tangent."""

    def __init__(self, polylines, k=8):
        from scipy.spatial import cKDTree
        segs = [np.stack([p[:-1], p[1:]], axis=1) for p in polylines if len(p) > 1]
        self.seg = np.concatenate(segs) if segs else np.zeros((0, 2, 3))
        self.k = min(k, len(self.seg))
        self.tree = cKDTree(self.seg.mean(axis=1)) if len(self.seg) else None

    def query(self, P):
        """Returns (foot point, distance, unit tangent)."""
        P = np.asarray(P, float)
        shp = P.shape[:-1]
        X = P.reshape(-1, 3)
        _, idx = self.tree.query(X, k=self.k)
        idx = idx.reshape(len(X), -1)
        best_d = np.full(len(X), np.inf)
        best_p = np.zeros_like(X)
        best_s = np.zeros(len(X), np.int64)
        for j in range(idx.shape[1]):
            s = idx[:, j]
            a, b = self.seg[s, 0], self.seg[s, 1]
            ab = b - a
            L2 = np.maximum(np.einsum("ki,ki->k", ab, ab), 1e-300)
            t = np.clip(np.einsum("ki,ki->k", X - a, ab) / L2, 0, 1)
            q = a + ab * t[:, None]
            d = np.linalg.norm(X - q, axis=1)
            better = d < best_d
            best_d[better] = d[better]
            best_p[better] = q[better]
            best_s[better] = s[better]
        tau = self.seg[best_s, 1] - self.seg[best_s, 0]
        tau /= np.maximum(np.linalg.norm(tau, axis=1, keepdims=True), 1e-300)
        return best_p.reshape(shp + (3,)), best_d.reshape(shp), tau.reshape(shp + (3,))
