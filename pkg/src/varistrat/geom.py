"""Exact linear/affine subspace arithmetic.

Subspace distances (largest principal angle), projector gaps, Hausdorff
distance of finite sets, and quantitative independence / effective-spanning
tests for point collections.
"""

from dataclasses import dataclass

import numpy as np

FRAME_TOL = 1e-12


def as_point(x, dim=None):
    """Validate and return a point as a float vector (all coordinates finite)."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("a point must be a 1-d coordinate vector")
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def orthonormalize(vectors, tol=1e-10):
    """Orthonormal basis of span(vectors) by modified Gram-Schmidt.

    A second re-orthogonalization pass keeps the Gram defect at roundoff even
    for badly conditioned inputs.  Near-dependent vectors (residual below tol
    relative to the original norm) are dropped.
    """
    vs = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    out = []
    for v in vs:
        scale = np.linalg.norm(v)
        if scale == 0.0:
            continue
        u = v.copy()
        for _ in range(2):
            for e in out:
                u = u - (u @ e) * e
        norm = np.linalg.norm(u)
        if norm > tol * scale:
            out.append(u / norm)
    return np.array(out) if out else np.zeros((0, vs.shape[1]))


@dataclass(frozen=True)
class LinearSubspace:
    """A k-dimensional linear subspace given by k orthonormal row vectors."""

    frame: np.ndarray

    def __post_init__(self):
        frame = np.atleast_2d(np.asarray(self.frame, dtype=np.float64))
        object.__setattr__(self, "frame", frame)
        if frame.shape[0] > 0:
            gram = frame @ frame.T
            if np.max(np.abs(gram - np.eye(frame.shape[0]))) > FRAME_TOL:
                raise ValueError("frame is not orthonormal to 1e-12")

    @classmethod
    def from_spanning(cls, vectors):
        return cls(orthonormalize(vectors))

    @classmethod
    def trivial(cls, ambient_dim):
        return cls(np.zeros((0, ambient_dim)))

    @property
    def dim(self):
        return self.frame.shape[0]

    @property
    def ambient_dim(self):
        return self.frame.shape[1]

    def projector(self):
        return self.frame.T @ self.frame

    def project(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (x @ self.frame.T) @ self.frame

    def orthogonal_complement(self):
        n = self.ambient_dim
        basis = orthonormalize(np.vstack([self.frame, np.eye(n)]))
        return LinearSubspace(basis[self.dim:])


@dataclass(frozen=True)
class AffineSubspace:
    """base point + direction subspace; hosts best-fit planes everywhere."""

    base: np.ndarray
    direction: LinearSubspace

    def __post_init__(self):
        base = as_point(self.base, self.direction.ambient_dim)
        object.__setattr__(self, "base", base)

    @classmethod
    def through(cls, base, spanning):
        return cls(np.asarray(base, float), LinearSubspace.from_spanning(spanning))

    @property
    def dim(self):
        return self.direction.dim

    @property
    def ambient_dim(self):
        return self.direction.ambient_dim

    def project(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.base + self.direction.project(x - self.base)

    def distance(self, x):
        x = np.asarray(x, dtype=np.float64)
        d = x - self.base
        return float(np.linalg.norm(d - self.direction.project(d)))

    def distances(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        d = pts - self.base
        resid = d - d @ self.direction.frame.T @ self.direction.frame
        return np.sqrt((resid * resid).sum(axis=1))


def project(subspace: AffineSubspace, x):
    """Orthogonal projection of a point onto an affine subspace."""
    x = as_point(x, subspace.ambient_dim)
    return subspace.project(x)


def grassmann_distance(v: LinearSubspace, w: LinearSubspace):
    """Sine of the largest principal angle between equal-dimensional subspaces.

    Computed from the singular values of the cross-Gram matrix of the frames.
    Subspaces of different dimension are at distance 1 by convention; two
    zero-dimensional subspaces are at distance 0.
    """
    if v.ambient_dim != w.ambient_dim:
        raise ValueError("ambient dimensions differ")
    if v.dim != w.dim:
        return 1.0
    if v.dim == 0:
        return 0.0
    sv = np.linalg.svd(v.frame @ w.frame.T, compute_uv=False)
    smin = float(np.clip(sv.min(), -1.0, 1.0))
    return float(np.sqrt(max(0.0, 1.0 - smin * smin)))


def projector_gap(v: LinearSubspace, w: LinearSubspace):
    """Operator norm of the difference of the two orthogonal projectors."""
    if v.ambient_dim != w.ambient_dim:
        raise ValueError("ambient dimensions differ")
    gap = v.projector() - w.projector()
    return float(np.linalg.svd(gap, compute_uv=False)[0]) if gap.size else 0.0


def hausdorff_distance(a, b):
    """Hausdorff distance between two nonempty finite point sets."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("hausdorff_distance requires nonempty sets")
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    forward = np.sqrt(d2.min(axis=1)).max()
    backward = np.sqrt(d2.min(axis=0)).max()
    return float(max(forward, backward))


def effectively_spans(points, alpha):
    """Whether p_0..p_k quantitatively span a k-dimensional affine subspace.

    Requires |p_i - p_0| <= 1/alpha and each p_i to sit farther than alpha
    from the affine span of its predecessors.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    p0 = pts[0]
    for i in range(1, pts.shape[0]):
        if np.linalg.norm(pts[i] - p0) > 1.0 / alpha:
            return False
        span = LinearSubspace.from_spanning(pts[1:i] - p0)
        resid = (pts[i] - p0) - span.project(pts[i] - p0)
        if np.linalg.norm(resid) <= alpha:
            return False
    return True


def tau_independent(points, tau):
    """Quantitative linear independence: d(p_{i+1}, span{p_1..p_i}) > tau."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    for i in range(pts.shape[0]):
        span = LinearSubspace.from_spanning(pts[:i]) if i else \
            LinearSubspace.trivial(pts.shape[1])
        resid = pts[i] - span.project(pts[i])
        if np.linalg.norm(resid) <= tau:
            return False
    return True


def sample_ball_intersection(subspace: AffineSubspace, radius=1.0, center=None,
                             count=256, seed=0):
    """Points of subspace ∩ B_radius(center), quasi-uniform; test oracle helper."""
    n = subspace.ambient_dim
    k = subspace.dim
    center = np.zeros(n) if center is None else np.asarray(center, float)
    base_in_ball = subspace.project(center)
    offset = base_in_ball - center
    rho2 = radius * radius - float(offset @ offset)
    if rho2 <= 0.0:
        return np.zeros((0, n))
    if k == 0:
        return base_in_ball[None, :]
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(count, k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=count) ** (1.0 / k)
    disk = u * radii[:, None] * np.sqrt(rho2)
    return base_in_ball + disk @ subspace.direction.frame


def random_subspace(ambient_dim, dim, rng):
    """Haar-uniform linear subspace (via QR of a Gaussian matrix)."""
    g = rng.normal(size=(ambient_dim, dim))
    q, _ = np.linalg.qr(g)
    return LinearSubspace(orthonormalize(q.T))
