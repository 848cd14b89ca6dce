"""Voxel domain around a single particle: signed distance, masks, surface mesh."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates
from skimage.measure import marching_cubes

from . import qtensor as qt
from .potentials import MaterialParams

INTERIOR, BAND, FLUID, FAR = 0, 1, 2, 3
MASK_NAMES = {INTERIOR: "interior", BAND: "band", FLUID: "fluid", FAR: "far"}


class GeometryError(ValueError):
    pass


class ExtensionError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# particle shapes


def _ellipsoid_sdf(p, axes):
    """Exact signed distance to an axis-aligned ellipsoid.

    The closest point is x_i = a_i^2 p_i / (a_i^2 + t); t solves
    sum a_i^2 p_i^2 / (a_i^2 + t)^2 = 1 and is found by safeguarded Newton.
    """
    a2 = np.asarray(axes, float) ** 2
    p = np.asarray(p, float)
    inside = np.sum(p**2 / a2, axis=-1) < 1.0
    # work in the positive octant; t > -min(a^2) keeps all denominators positive
    q = np.abs(p)
    lo = np.where(inside, -a2.min(), 0.0)
    hi = np.where(inside, 0.0, np.linalg.norm(q, axis=-1) * math.sqrt(a2.max()))
    t = 0.5 * (lo + hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(200):
            d = a2 + t[..., None]
            num = a2 * q**2
            F = np.sum(np.where(num > 0, num / d**2, 0.0), axis=-1) - 1.0
            dF = -2.0 * np.sum(np.where(num > 0, num / d**3, 0.0), axis=-1)
            # F is decreasing in t
            hi = np.where(F < 0, t, hi)
            lo = np.where(F > 0, t, lo)
            tn = t - F / dF
            bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            done = np.max(np.abs(tn - t)) < 1e-15 * (1 + np.max(np.abs(t)))
            t = tn
            if done:
                break
        x = np.where(q > 0, a2 * q / (a2 + t[..., None]), 0.0)
    # degenerate inside case: the root sits at t = -a_min^2 and the closest
    # point leaves the coordinate plane q_min = 0
    k = int(np.argmin(a2))
    rest = 1.0 - np.sum(np.delete(x, k, axis=-1) ** 2 / np.delete(a2, k), axis=-1)
    degen = inside & (q[..., k] == 0) & (rest > 1e-14)
    if np.any(degen):
        xd = x[degen]
        j = [i for i in range(3) if i != k]
        xd[:, j] = a2[j] * q[degen][:, j] / (a2[j] - a2[k])
        xd[:, k] = np.sqrt(a2[k] * np.maximum(1.0 - np.sum(xd[:, j] ** 2 / a2[j], axis=1), 0.0))
        x[degen] = xd
    dist = np.linalg.norm(q - x, axis=-1)
    return np.where(inside, -dist, dist)


@dataclass(frozen=True)
class ParticleShape:
    """sphere(center, radius), ellipsoid(center, semi_axes) or levelset(volume)."""
    kind: str = "sphere"
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    semi_axes: tuple = (1.0, 1.0, 1.0)
    volume: np.ndarray | None = field(default=None, repr=False, compare=False)
    origin: tuple = (0.0, 0.0, 0.0)
    spacing: float = 1.0
    inner_radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("sphere", "ellipsoid", "levelset"):
            raise GeometryError(f"unknown particle kind {self.kind!r}")
        if self.kind == "levelset" and self.volume is None:
            raise GeometryError("levelset particle needs a volume")

    @classmethod
    def sphere(cls, radius=1.0, center=(0.0, 0.0, 0.0)):
        return cls("sphere", tuple(center), float(radius))

    @classmethod
    def ellipsoid(cls, semi_axes, center=(0.0, 0.0, 0.0)):
        return cls("ellipsoid", tuple(center), semi_axes=tuple(float(a) for a in semi_axes))

    @classmethod
    def levelset(cls, volume, spacing, origin=(0.0, 0.0, 0.0), inner_radius=None):
        return cls("levelset", volume=np.asarray(volume, float), spacing=float(spacing),
                   origin=tuple(origin), inner_radius=inner_radius)

    def sdf(self, x):
        x = np.asarray(x, float) - np.asarray(self.center)
        if self.kind == "sphere":
            return np.linalg.norm(x, axis=-1) - self.radius
        if self.kind == "ellipsoid":
            return _ellipsoid_sdf(x, self.semi_axes)
        idx = (x + np.asarray(self.center) - np.asarray(self.origin)) / self.spacing
        flat = idx.reshape(-1, 3).T
        vals = map_coordinates(self.volume, flat, order=1, mode="nearest")
        return vals.reshape(x.shape[:-1])

    def normal(self, x, eps=1e-5):
        """Unit gradient of the signed distance (analytic for the sphere)."""
        x = np.asarray(x, float)
        if self.kind == "sphere":
            d = x - np.asarray(self.center)
            return d / np.linalg.norm(d, axis=-1, keepdims=True)
        if self.kind == "levelset":
            eps = max(eps, 0.5 * self.spacing)
        g = np.stack([(self.sdf(x + eps * e) - self.sdf(x - eps * e)) / (2 * eps)
                      for e in (qt.E1, qt.E2, qt.E3)], axis=-1)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def r0(self):
        """Inner-ball radius: the smallest principal radius of curvature."""
        if self.inner_radius is not None:
            return float(self.inner_radius)
        if self.kind == "sphere":
            return self.radius
        if self.kind == "ellipsoid":
            a = sorted(self.semi_axes)
            return a[0] ** 2 / a[2]
        raise GeometryError("levelset particles need an explicit inner_radius")

    def bounds(self):
        c = np.asarray(self.center)
        if self.kind == "sphere":
            return c - self.radius, c + self.radius
        if self.kind == "ellipsoid":
            a = np.asarray(self.semi_axes)
            return c - a, c + a
        inside = np.argwhere(self.volume <= 0)
        if inside.size == 0:
            raise GeometryError("level set has no interior")
        o = np.asarray(self.origin)
        return o + inside.min(0) * self.spacing, o + inside.max(0) * self.spacing

    def area_reference(self):
        """Analytic area where known (sphere, spheroid by quadrature)."""
        if self.kind == "sphere":
            return 4 * math.pi * self.radius**2
        if self.kind == "ellipsoid":
            from scipy.integrate import dblquad
            a, b, c = self.semi_axes

            def dA(v, u):
                su, cu, sv, cv = math.sin(u), math.cos(u), math.sin(v), math.cos(v)
                n = np.array([b * c * su * su * cv, a * c * su * su * sv, a * b * su * cu])
                return float(np.linalg.norm(n))
            return dblquad(dA, 0, math.pi, 0, 2 * math.pi, epsabs=1e-10)[0]
        return None


# --------------------------------------------------------------------------
# grid and mesh


@dataclass
class Grid:
    origin: np.ndarray
    h: float
    shape: tuple
    phi: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    band_width: float = 1.5
    periodic: tuple = (False, False, False)

    def axes(self):
        return [self.origin[i] + self.h * np.arange(self.shape[i]) for i in range(3)]

    def points(self, sl=None):
        ax = self.axes()
        if sl is not None:
            ax = [a[s] for a, s in zip(ax, sl)]
        X, Y, Z = np.meshgrid(*ax, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @property
    def extent(self):
        return self.origin, self.origin + self.h * (np.asarray(self.shape) - 1)

    def counts(self):
        return {MASK_NAMES[k]: int(np.sum(self.mask == k)) for k in MASK_NAMES}


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    area_weights: np.ndarray = field(init=False)
    theta: np.ndarray = field(init=False)

    def __post_init__(self):
        self.normals = self.normals / np.linalg.norm(self.normals, axis=1, keepdims=True)
        fa = self.face_areas()
        w = np.zeros(len(self.vertices))
        for k in range(3):
            np.add.at(w, self.faces[:, k], fa / 3.0)
        self.area_weights = w
        self.theta = np.arccos(np.clip(self.normals[:, 2], -1, 1))

    def face_areas(self):
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    @property
    def area(self):
        return float(self.face_areas().sum())

    def translated(self, d):
        return SurfaceMesh(self.vertices + np.asarray(d), self.faces.copy(), self.normals.copy())


def _mask(phi, h, band_width, periodic):
    m = np.full(phi.shape, FLUID, dtype=np.int8)
    m[phi < -band_width * h] = INTERIOR
    far = np.zeros(phi.shape, bool)
    for ax in range(3):
        if periodic[ax]:
            continue
        sl = [slice(None)] * 3
        sl[ax] = 0
        far[tuple(sl)] = True
        sl[ax] = -1
        far[tuple(sl)] = True
    m[far & (phi > band_width * h)] = FAR
    m[np.abs(phi) <= band_width * h] = BAND
    return m


def surface_mesh(shape: ParticleShape, h, pad=3):
    """Marching cubes on a local box around the particle (normals from the sdf)."""
    lo, hi = shape.bounds()
    lo = lo - pad * h
    n = np.ceil((hi + pad * h - lo) / h).astype(int) + 1
    ax = [lo[i] + h * np.arange(n[i]) for i in range(3)]
    P = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
    phi = shape.sdf(P)
    verts, faces, _, _ = marching_cubes(phi, level=0.0, spacing=(h, h, h))
    verts = verts + lo
    # project vertices onto the zero level set (one Newton step along the normal)
    nrm = shape.normal(verts)
    verts = verts - shape.sdf(verts)[:, None] * nrm
    nrm = shape.normal(verts)
    # zero-area faces are kept: they carry connectivity for level curves
    return SurfaceMesh(verts, faces.astype(np.int64), nrm)


def build_domain(shape: ParticleShape, box, h, band_width=1.5, periodic=(False, False, False),
                 mesh_h=None, check_resolution=True):
    """box = (lo, hi) as 3-vectors.  Returns (Grid, SurfaceMesh)."""
    lo, hi = (np.asarray(b, float) for b in box)
    plo, phi_ = shape.bounds()
    if np.any(plo <= lo) or np.any(phi_ >= hi):
        raise GeometryError("particle intersects or lies outside the box")
    if check_resolution and np.min(phi_ - plo) / h < 16 - 1e-9:
        raise GeometryError(f"particle spans fewer than 16 voxels at h={h}")
    n = tuple(int(round((hi[i] - lo[i]) / h)) + 1 for i in range(3))
    ax = [lo[i] + h * np.arange(n[i]) for i in range(3)]
    P = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
    phi = shape.sdf(P)
    grid = Grid(lo, h, n, phi, _mask(phi, h, band_width, periodic), band_width, tuple(periodic))
    mesh = surface_mesh(shape, mesh_h or h)
    return grid, mesh


def box_margin_ok(shape: ParticleShape, box):
    lo, hi = (np.asarray(b, float) for b in box)
    plo, phi_ = shape.bounds()
    diam = np.max(phi_ - plo)
    return bool(np.all(plo - lo >= 2 * diam) and np.all(hi - phi_ >= 2 * diam))


def gradient_norm_check(shape: ParticleShape, grid: Grid):
    """max | |grad phi| - 1 | on -r0/2 < phi < 2 r0 (central differences).

    Inside, the distance function is only smooth up to depth r0 (medial axis).
    """
    g = np.gradient(grid.phi, grid.h)
    gn = np.sqrt(sum(gi**2 for gi in g))
    r0 = shape.r0()
    sel = (grid.phi > -0.5 * r0) & (grid.phi < 2 * r0)
    # one-voxel erosion avoids the one-sided stencil at the box faces
    sel[[0, -1], :, :] = sel[:, [0, -1], :] = sel[:, :, [0, -1]] = False
    return float(np.max(np.abs(gn[sel] - 1.0))) if sel.any() else 0.0


def boundary_Q(mesh: SurfaceMesh, m: MaterialParams):
    """Homeotropic anchoring s_*(nu (x) nu - Id/3) at the mesh vertices."""
    return qt.uniaxial(mesh.normals, m.s_star)


def anchoring_Q(shape: ParticleShape, points, m: MaterialParams):
    """Anchoring value extended off the surface along the sdf gradient."""
    return qt.uniaxial(shape.normal(points), m.s_star)


# --------------------------------------------------------------------------
# extension of the normal


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


@dataclass
class NormalExtension:
    v: np.ndarray
    lipschitz: float
    min_norm_used: float
    min_norm: float


def extend_normal(shape: ParticleShape, points, band=None, use_mask=None, min_norm=0.2):
    """nu-extension blended to the constant e1 outside |phi| < band.

    v = (1 - w) grad(phi) + w e1 with w a smoothstep in phi over [band/2, band].
    A nonvanishing extension of the outward normal to the exterior of a closed
    surface cannot exist (degree argument), so |v| >= min_norm is enforced only
    on `use_mask`, the voxels where v is consulted.
    """
    points = np.asarray(points, float)
    band = band if band is not None else 2 * shape.r0()
    phi = shape.sdf(points)
    nu = shape.normal(points)
    w = _smoothstep((np.abs(phi) - 0.5 * band) / (0.5 * band))[..., None]
    v = (1 - w) * nu + w * qt.E1
    vn = np.linalg.norm(v, axis=-1)
    sel = np.ones(vn.shape, bool) if use_mask is None else use_mask
    used = float(vn[sel].min()) if np.any(sel) else 1.0
    if used < min_norm:
        raise ExtensionError(f"|v| drops to {used:.3g} where the extension is used")
    # Lipschitz bound: |d nu| <= 1/r0 in the band, blend adds 2 * 1.5/(band/2)
    lip = 1.0 / max(shape.r0() - band / 2, 1e-12) + 3.0 / band * 2.0
    return NormalExtension(v, lip, used, float(vn.min()))


def gamma_curve(mesh: SurfaceMesh, values=None):
    """Polylines of {nu3 = 0} by linear interpolation along mesh edges.

    Returns (list of (k, 3) arrays, each closed with first == last, total length).
    """
    f = mesh.normals[:, 2] if values is None else np.asarray(values)
    F = mesh.faces
    fv = f[F]
    if np.any(np.all(np.abs(fv) < 1e-14, axis=1) & (mesh.face_areas() > 0)):
        raise GeometryError("nu3 vanishes identically on a face")
    # nudge near-zeros to one side so every crossing is on an edge interior
    f = np.where(np.abs(f) < 1e-14, 1e-14, f)
    fv = f[F]
    edges_of_face = [(0, 1), (1, 2), (2, 0)]
    seg = {}
    point = {}
    for (i, j) in edges_of_face:
        a, b = F[:, i], F[:, j]
        cross = (fv[:, i] > 0) != (fv[:, j] > 0)
        for fidx in np.nonzero(cross)[0]:
            key = (min(a[fidx], b[fidx]), max(a[fidx], b[fidx]))
            if key not in point:
                fa, fb = f[key[0]], f[key[1]]
                t = fa / (fa - fb)
                point[key] = (1 - t) * mesh.vertices[key[0]] + t * mesh.vertices[key[1]]
            seg.setdefault(fidx, []).append(key)
    adj = {}
    for fidx, keys in seg.items():
        if len(keys) != 2:
            continue
        k1, k2 = keys
        adj.setdefault(k1, []).append(k2)
        adj.setdefault(k2, []).append(k1)
    curves = []
    seen = set()
    for start in adj:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [k for k in adj[cur] if k != prev and (k not in seen or (k == start and len(chain) > 2))]
            if not nxt:
                break
            k = nxt[0]
            if k == start:
                chain.append(start)
                break
            chain.append(k)
            seen.add(k)
            prev, cur = cur, k
        curves.append(np.array([point[k] for k in chain]))
    length = float(sum(np.sum(np.linalg.norm(np.diff(c, axis=0), axis=1)) for c in curves))
    return curves, length


# --------------------------------------------------------------------------
# file formats


_HEADER = struct.Struct("<3id")


def write_volume(path, data, spacing, extra=None):
    """Header: three int32 dims + float64 spacing; body: float64, x fastest.

    `data` may carry trailing components (e.g. 5 per voxel); they are stored
    innermost.  `extra` is an optional float64 parameter block appended after
    the header.
    """
    data = np.asarray(data, dtype="<f8")
    nx, ny, nz = data.shape[:3]
    from .io import atomic_write_bytes
    payload = _HEADER.pack(nx, ny, nz, float(spacing))
    if extra is not None:
        payload += np.asarray(extra, dtype="<f8").tobytes()
    # x fastest: transpose so that the first axis varies fastest in memory
    body = np.ascontiguousarray(np.moveaxis(data, (0, 1, 2), (2, 1, 0)))
    atomic_write_bytes(path, payload + body.tobytes())


def read_volume(path, components=1, extra=0):
    raw = open(path, "rb").read()
    nx, ny, nz, spacing = _HEADER.unpack_from(raw, 0)
    off = _HEADER.size
    params = np.frombuffer(raw, dtype="<f8", count=extra, offset=off).copy() if extra else None
    off += 8 * extra
    shape = (nz, ny, nx) + ((components,) if components > 1 else ())
    body = np.frombuffer(raw, dtype="<f8", offset=off).reshape(shape)
    data = np.moveaxis(body, (0, 1, 2), (2, 1, 0)).copy()
    return data, spacing, params


def write_obj(path, vertices, faces, comments=()):
    from .io import atomic_write_text
    lines = [f"# {c}" for c in comments]
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_obj(path):
    verts, faces = [], []
    for line in open(path):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts, float).reshape(-1, 3), np.array(faces, np.int64).reshape(-1, 3)


def build_box(box, h, periodic=(False, False, False), centered=False):
    """Particle-free grid (phi = +inf).  centered=True offsets nodes by h/2 so
    no node lies on a coordinate plane through the origin."""
    lo, hi = (np.asarray(b, float) for b in box)
    n = []
    for i in range(3):
        L = hi[i] - lo[i]
        # periodic axes: nodes tile [lo, hi) exactly
        n.append(int(round(L / h)) if periodic[i] else int(round(L / h)) + 1)
    origin = lo + (0.5 * h if centered else 0.0)
    phi = np.full(tuple(n), np.inf)
    return Grid(origin, h, tuple(n), phi, _mask(phi, h, 1.5, periodic), 1.5, tuple(periodic))
