"""Linear algebra for traceless symmetric 3x3 order tensors.

All functions accept single tensors of shape (3, 3) or stacks of shape
(..., 3, 3) and broadcast over the leading axes.  Eigen-decompositions go
through ``numpy.linalg.eigh`` (batched LAPACK), which is exact to machine
precision and robust at repeated eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ID3 = np.eye(3)
E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# five independent components, q33 = -q11 - q22
COMPONENTS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2))

CONE_TOL = 1e-10
ORTHO_TOL = 1e-8


class InvalidInput(ValueError):
    pass


class ConeDegeneracy(ValueError):
    """Raised when an operation needs a well-defined director but Q is on the cone."""

    def __init__(self, gap):
        self.gap = gap
        super().__init__(f"tensor lies on the biaxial cone (lambda1 - lambda2 = {np.min(gap):.3e})")


@dataclass(frozen=True)
class SpectralData:
    values: np.ndarray   # (..., 3) descending
    vectors: np.ndarray  # (..., 3, 3), column k belongs to values[..., k]

    @property
    def n(self):
        return self.vectors[..., :, 0]

    @property
    def m(self):
        return self.vectors[..., :, 1]

    @property
    def p(self):
        return self.vectors[..., :, 2]


@dataclass(frozen=True)
class DecompParams:
    s: np.ndarray
    r: np.ndarray
    n: np.ndarray
    m: np.ndarray
    degenerate: np.ndarray  # True where the frame is not unique (Q on the cone)


# --------------------------------------------------------------------------
# representation helpers

def from_components(q):
    """Materialize (q11, q12, q13, q22, q23) into symmetric traceless matrices."""
    q = np.asarray(q, dtype=float)
    out = np.empty(q.shape[:-1] + (3, 3))
    q11, q12, q13, q22, q23 = (q[..., k] for k in range(5))
    out[..., 0, 0] = q11
    out[..., 1, 1] = q22
    out[..., 2, 2] = -q11 - q22
    out[..., 0, 1] = out[..., 1, 0] = q12
    out[..., 0, 2] = out[..., 2, 0] = q13
    out[..., 1, 2] = out[..., 2, 1] = q23
    return out


def to_components(Q):
    Q = np.asarray(Q, dtype=float)
    return np.stack([Q[..., i, j] for i, j in COMPONENTS], axis=-1)


def norm2_components(q):
    """|Q|^2 from the five independent components."""
    q = np.asarray(q, dtype=float)
    q11, q12, q13, q22, q23 = (q[..., k] for k in range(5))
    return 2.0 * (q11**2 + q22**2 + q11 * q22) + 2.0 * (q12**2 + q13**2 + q23**2)


def sym0(A):
    """Orthogonal projection of a 3x3 matrix onto traceless symmetric matrices."""
    A = np.asarray(A, dtype=float)
    S = 0.5 * (A + np.swapaxes(A, -1, -2))
    tr = np.trace(S, axis1=-2, axis2=-1)
    return S - tr[..., None, None] * ID3 / 3.0


def frob(A, B=None):
    if B is None:
        B = A
    return np.einsum("...ij,...ij->...", A, B)


def outer(a, b=None):
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    return a[..., :, None] * b[..., None, :]


def uniaxial(n, s=1.0):
    """s (n (x) n - Id/3); n need not be normalized (it is normalized here)."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    s = np.asarray(s, dtype=float)
    return s[..., None, None] * (outer(n) - ID3 / 3.0)


def random_rotation(rng, size=None):
    """Uniformly distributed rotation matrices via QR of Gaussian matrices."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    A = rng.standard_normal(shape + (3, 3))
    Qm, R = np.linalg.qr(A)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    Qm = Qm * d[..., None, :]
    det = np.linalg.det(Qm)
    Qm[..., :, 0] *= np.sign(det)[..., None]
    return Qm


def rotation_axis_angle(u, theta):
    """Rotation matrix about unit axis u by angle theta (Rodrigues form)."""
    u = np.asarray(u, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    C = 1.0 - c
    R = np.empty(np.broadcast(u1, np.asarray(theta)).shape + (3, 3))
    R[..., 0, 0] = c + u1 * u1 * C
    R[..., 0, 1] = u1 * u2 * C - u3 * s
    R[..., 0, 2] = u1 * u3 * C + u2 * s
    R[..., 1, 0] = u1 * u2 * C + u3 * s
    R[..., 1, 1] = c + u2 * u2 * C
    R[..., 1, 2] = u2 * u3 * C - u1 * s
    R[..., 2, 0] = u1 * u3 * C - u2 * s
    R[..., 2, 1] = u2 * u3 * C + u1 * s
    R[..., 2, 2] = c + u3 * u3 * C
    return R


# --------------------------------------------------------------------------
# spectral data and (s, r, n, m) decomposition

def spectral(Q):
    Q = np.asarray(Q, dtype=float)
    w, V = np.linalg.eigh(Q)
    return SpectralData(values=w[..., ::-1], vectors=V[..., :, ::-1])


def eigenvalues(Q):
    return np.linalg.eigvalsh(np.asarray(Q, dtype=float))[..., ::-1]


def compose(s, r, n, m):
    """s((n (x) n - Id/3) + r(m (x) m - Id/3)) for an orthonormal pair (n, m)."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(np.einsum("...i,...i->...", n, m)) > ORTHO_TOL):
        raise InvalidInput("n and m must be orthogonal")
    if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > ORTHO_TOL) or \
            np.any(np.abs(np.linalg.norm(m, axis=-1) - 1.0) > ORTHO_TOL):
        raise InvalidInput("n and m must be unit vectors")
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(s < 0) or np.any((r < 0) | (r > 1)):
        raise InvalidInput("need s >= 0 and 0 <= r <= 1")
    return s[..., None, None] * ((outer(n) - ID3 / 3.0) + r[..., None, None] * (outer(m) - ID3 / 3.0))


def decompose(Q, tol=CONE_TOL):
    """Invert ``compose``.

    The eigenvalues of compose(s, r, n, m) are s(2-r)/3, s(2r-1)/3, -s(1+r)/3,
    so s = lambda1 - lambda3 and r = (lambda2 - lambda3)/s.  On the cone the
    frame is arbitrary; r = 1 is returned and ``degenerate`` is set.
    """
    sd = spectral(Q)
    lam = sd.values
    s = lam[..., 0] - lam[..., 2]
    scale = np.maximum(1.0, np.abs(lam).max(axis=-1))
    zero = s <= tol * scale
    safe = np.where(zero, 1.0, s)
    r = np.where(zero, 0.0, np.clip((lam[..., 1] - lam[..., 2]) / safe, 0.0, 1.0))
    on_cone = (lam[..., 0] - lam[..., 1]) <= tol * scale
    r = np.where(on_cone & ~zero, 1.0, r)
    s = np.where(zero, 0.0, s)
    return DecompParams(s=s, r=r, n=sd.n, m=sd.m, degenerate=on_cone | zero)


def cone_gap(Q):
    """lambda1 - lambda2 >= 0; zero exactly on the biaxial cone."""
    lam = eigenvalues(Q)
    return np.maximum(lam[..., 0] - lam[..., 1], 0.0)


def leading_eigenvector(Q):
    return spectral(Q).n


# --------------------------------------------------------------------------
# vacuum manifold

def retract_to_N(Q, s_star, tol=CONE_TOL):
    """Nearest-point projection onto {s_*(n (x) n - Id/3)}."""
    sd = spectral(Q)
    gap = sd.values[..., 0] - sd.values[..., 1]
    if np.any(gap <= tol):
        raise ConeDegeneracy(gap)
    return uniaxial(sd.n, s_star)


def dist_to_N(Q, s_star):
    """Frobenius distance to the vacuum manifold.

    |Q - s_*(n(x)n - Id/3)|^2 = |Q|^2 - 2 s_* n.Qn + 2 s_*^2/3, minimized by the
    leading eigenvector, so dist^2 = |Q|^2 - 2 s_* lambda1 + 2 s_*^2/3.  This
    form stays valid on the cone.
    """
    Q = np.asarray(Q, dtype=float)
    lam1 = eigenvalues(Q)[..., 0]
    d2 = frob(Q) - 2.0 * s_star * lam1 + 2.0 * s_star**2 / 3.0
    return np.sqrt(np.maximum(d2, 0.0))


def oriented_n3(Q, ref, tol=CONE_TOL, return_flag=False):
    """Third component of the leading eigenvector, signed so that n.ref >= 0."""
    sd = spectral(Q)
    gap = sd.values[..., 0] - sd.values[..., 1]
    if np.any(gap <= tol):
        raise ConeDegeneracy(gap)
    n = sd.n
    ref = np.broadcast_to(np.asarray(ref, dtype=float), n.shape)
    dot = np.einsum("...i,...i->...", n, ref)
    sign = np.where(dot < 0, -1.0, 1.0)
    n3 = sign * n[..., 2]
    if return_flag:
        return n3, np.abs(dot) < ORTHO_TOL
    return n3


# --------------------------------------------------------------------------
# the complex of tensors with horizontal director

def rotation_to_e3(n):
    """Rotation about n x e3 taking a horizontal unit vector n to e3.

    For n perpendicular to e3 the angle is pi/2 and the Rodrigues matrix
    reduces to [u]_x + u u^T with u = n x e3.
    """
    n = np.asarray(n, dtype=float)
    u = np.cross(n, E3)
    return rotation_axis_angle(u, np.pi / 2)


def _embed2(Mp):
    Mp = np.asarray(Mp, dtype=float)
    M = np.zeros(Mp.shape[:-2] + (3, 3))
    M[..., :2, :2] = Mp
    return M


def calT_compose(lam, n, Mp):
    """lambda (n (x) n - R_n^T M R_n) with M the 3x3 embedding of the 2x2 block M'."""
    n = np.asarray(n, dtype=float)
    Mp = np.asarray(Mp, dtype=float)
    if np.any(np.abs(n[..., 2]) > ORTHO_TOL) or np.any(np.abs(np.linalg.norm(n, axis=-1) - 1) > ORTHO_TOL):
        raise InvalidInput("n must be a horizontal unit vector")
    if np.any(np.abs(np.trace(Mp, axis1=-2, axis2=-1) - 1.0) > 1e-10):
        raise InvalidInput("trace(M') must be 1")
    if np.any(np.linalg.eigvalsh(Mp)[..., 0] <= -1.0):
        raise InvalidInput("M' must have eigenvalues > -1")
    R = rotation_to_e3(n)
    M = _embed2(Mp)
    RtMR = np.swapaxes(R, -1, -2) @ M @ R
    lam = np.asarray(lam, dtype=float)
    return lam[..., None, None] * (outer(n) - RtMR)


def _uniaxial_calT_point(Q, tol=1e-8):
    sd = spectral(Q)
    lam = sd.values
    if np.any(lam[..., 0] - lam[..., 1] <= tol):
        raise InvalidInput("tensor is on the cone")
    if np.any(np.abs(lam[..., 1] - lam[..., 2]) > tol * np.maximum(1.0, np.abs(lam[..., 0]))):
        raise InvalidInput("tensor is not uniaxial")
    n = sd.n
    if np.any(np.abs(n[..., 2]) > tol):
        raise InvalidInput("leading eigenvector is not horizontal")
    n = n.copy()
    n[..., 2] = 0.0
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    # Q = (3/2) lambda (n(x)n - Id/3) with lambda the leading eigenvalue of Q/(...)
    lam_param = lam[..., 0]  # leading eigenvalue equals the parameter lambda
    return lam_param, n


def calT_normal(Q):
    """Normal to the complex at a uniaxial point with horizontal director.

    N_13 = N_31 = (3/2) lambda n1, N_23 = N_32 = (3/2) lambda n2, zero elsewhere.
    """
    lam, n = _uniaxial_calT_point(Q)
    return 1.5 * lam[..., None, None] * (outer(n, E3) + outer(E3, n))


def calT_tangent_basis(Q):
    """The four tangent vectors obtained by varying lambda, n, m11, m12.

    The n-variation uses the horizontal unit direction t = e3 x n; R_n is
    differentiated exactly through u = n x e3 (R_n = [u]_x + u u^T).
    """
    lam, n = _uniaxial_calT_point(Q)
    Mp = np.broadcast_to(0.5 * np.eye(2), lam.shape + (2, 2))
    M = _embed2(Mp)
    R = rotation_to_e3(n)
    Rt = np.swapaxes(R, -1, -2)
    L = lam[..., None, None]

    T1 = outer(n) - Rt @ M @ R

    t = np.cross(E3, n)
    u = np.cross(n, E3)
    du = np.cross(t, E3)
    dR = _skew(du) + outer(du, u) + outer(u, du)
    T2 = L * (outer(t, n) + outer(n, t) - np.swapaxes(dR, -1, -2) @ M @ R - Rt @ M @ dR)

    D11 = np.zeros((3, 3))
    D11[0, 0], D11[1, 1] = 1.0, -1.0
    D12 = np.zeros((3, 3))
    D12[0, 1] = D12[1, 0] = 1.0
    T3 = L * (Rt @ D11 @ R)
    T4 = L * (Rt @ D12 @ R)
    return T1 * np.ones_like(L), T2, T3, T4


def _skew(w):
    w = np.asarray(w, dtype=float)
    K = np.zeros(w.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -w[..., 2], w[..., 1]
    K[..., 1, 0], K[..., 1, 2] = w[..., 2], -w[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -w[..., 1], w[..., 0]
    return K
