"""Discretized varifolds: simplicial complexes with integer multiplicities,
mass/density/monotonicity quadrature, symmetry scores, and the analytic
testbed generators (planes, plane unions, half-plane fans, graphs, snowflake
curves; the codimension-one cone in R^8 lives in the ``simons`` module)."""

import math

import numpy as np

from . import _kernels
from .geom import LinearSubspace, orthonormalize
from .measure import WeightedPointMeasure, unit_ball_volume

SNOWFLAKE_ETA_MAX = math.sqrt(3.0) / 2.0


class SimplicialVarifold:
    """An m-dimensional simplicial complex in R^n with integer multiplicities.

    Quadrature refines simplices by longest-edge bisection until their
    diameter drops below ``quadrature_h`` and then applies the centroid rule;
    pieces entirely inside/outside the queried ball are resolved exactly.
    """

    def __init__(self, vertices, simplices, multiplicities=None, quadrature_h=0.01):
        self.vertices = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
        self.simplices = np.atleast_2d(np.asarray(simplices, dtype=np.int64))
        ns = self.simplices.shape[0]
        if multiplicities is None:
            multiplicities = np.ones(ns, dtype=np.int64)
        self.multiplicities = np.asarray(multiplicities, dtype=np.int64)
        if np.any(self.multiplicities < 1):
            raise ValueError("multiplicities must be positive integers")
        if self.multiplicities.shape != (ns,):
            raise ValueError("one multiplicity per simplex required")
        self.quadrature_h = float(quadrature_h)
        self.m = self.simplices.shape[1] - 1
        self._corners = self.vertices[self.simplices]  # (S, m+1, n)
        self._vols = self._volumes(self._corners)
        if np.any(self._vols <= 0.0):
            raise ValueError("degenerate simplex (zero m-volume)")
        self._centroids = self._corners.mean(axis=1)
        self._radii = np.sqrt(
            ((self._corners - self._centroids[:, None, :]) ** 2).sum(axis=2)).max(axis=1)
        self._normal_projs = None

    # -- basic structure ---------------------------------------------------

    @property
    def ambient_dim(self):
        return self.vertices.shape[1]

    @property
    def n_simplices(self):
        return self.simplices.shape[0]

    @staticmethod
    def _volumes(corners):
        edges = corners[:, 1:, :] - corners[:, :1, :]
        gram = edges @ edges.transpose(0, 2, 1)
        m = corners.shape[1] - 1
        det = np.linalg.det(gram)
        return np.sqrt(np.maximum(det, 0.0)) / math.factorial(m)

    def normal_projectors(self):
        """Per-simplex orthogonal projector onto the (n-m)-dim normal space."""
        if self._normal_projs is None:
            n = self.ambient_dim
            projs = np.empty((self.n_simplices, n, n))
            eye = np.eye(n)
            for s in range(self.n_simplices):
                edges = self._corners[s, 1:, :] - self._corners[s, 0, :]
                frame = orthonormalize(edges)
                if frame.shape[0] != self.m:
                    raise ValueError("tangent plane ill-defined on a simplex")
                projs[s] = eye - frame.T @ frame
            self._normal_projs = projs
        return self._normal_projs

    def total_mass(self):
        return float((self.multiplicities * self._vols).sum())

    def validate(self):
        """Re-check structural invariants; raises on violation."""
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("non-finite vertex")
        if self.simplices.min(initial=0) < 0 or \
                self.simplices.max(initial=-1) >= len(self.vertices):
            raise ValueError("simplex index out of range")
        if np.any(self._vols <= 0.0):
            raise ValueError("degenerate simplex")
        self.normal_projectors()
        return True

    # -- quadrature --------------------------------------------------------

    def _candidates(self, x, rlo, rhi):
        if self.m > 3:
            # bisection refinement needs (diam/h)^m leaf pieces; past m=3 use
            # a structure-aware representation (see the simons module)
            raise ValueError("generic clipping quadrature is limited to m <= 3")
        d = np.sqrt(((self._centroids - x) ** 2).sum(axis=1))
        mask = d <= rhi + self._radii
        if rlo > 0.0:
            mask &= d >= rlo - self._radii
        return np.nonzero(mask)[0]

    def mass(self, x, r, h=None):
        """mu(B_r(x)): multiplicity-weighted clipped m-volume."""
        if r <= 0:
            raise ValueError("radius must be positive")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        idx = self._candidates(x, 0.0, r)
        if idx.size == 0:
            return 0.0
        return _kernels.simplex_ball_mass(
            self._corners[idx], self._vols[idx],
            self.multiplicities[idx].astype(np.float64), x, r, h)

    def density(self, x, r, h=None):
        """theta_r(x) = r**-m mu(B_r(x))."""
        return self.mass(x, r, h) / r**self.m

    def density_curve(self, x, radii, h=None):
        radii = np.asarray(radii, dtype=np.float64)
        return DensityCurve(np.asarray(x, float), radii,
                            np.array([self.density(x, r, h) for r in radii]))

    def mass_drop(self, x, s, r, h=None):
        """theta_r(x) - theta_s(x) >= 0 on stationary testbeds."""
        if not 0 < s <= r:
            raise ValueError("need 0 < s <= r")
        return self.density(x, r, h) - self.density(x, s, h)

    def monotonicity_defect(self, x, s, r, h=None):
        """Annulus quadrature of |x-y|^-m <N_y, n_x>^2; matches the mass drop
        on stationary testbeds up to quadrature tolerance."""
        if not 0 < s < r:
            raise ValueError("need 0 < s < r")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        idx = self._candidates(x, s, r)
        if idx.size == 0:
            return 0.0
        return _kernels.annulus_normal_defect(
            self._corners[idx], self._vols[idx],
            self.multiplicities[idx].astype(np.float64),
            self.normal_projectors()[idx], x, s, r, h, self.m)

    def spine_score(self, x, r, k, h=None):
        """Least normalized normal-mass of a (k+1)-subspace on A_{3r/8,r/2}(x).

        Assembles Q = average over the annulus of the normal-space projector
        and returns (sum of the k+1 smallest eigenvalues, argmin subspace).
        Zero iff mass concentrates flatly along some (k+1)-plane of
        translation invariance.
        """
        if not 0 <= k <= self.m - 1:
            raise ValueError("need 0 <= k <= m-1")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        rlo, rhi = 3.0 * r / 8.0, r / 2.0
        idx = self._candidates(x, rlo, rhi)
        if idx.size == 0:
            raise ValueError("empty annulus")
        q, mass = _kernels.annulus_normal_moment(
            self._corners[idx], self._vols[idx],
            self.multiplicities[idx].astype(np.float64),
            self.normal_projectors()[idx], x, rlo, rhi, h)
        if mass <= 0.0:
            raise ValueError("empty annulus")
        evals, evecs = _kernels.jacobi_eigh(q / mass)
        score = float(np.maximum(evals, 0.0)[self.ambient_dim - (k + 1):].sum())
        subspace = LinearSubspace(evecs[self.ambient_dim - (k + 1):])
        return score, subspace

    def symmetry_score(self, x, r, k, h=None):
        """Pinch and spine components of the (k, eps)-symmetry proxy."""
        pinch = abs(self.density(x, r, h) - self.density(x, r / 8.0, h))
        spine = None
        if k >= 1 and pinch < np.inf:
            spine, _ = self.spine_score(x, r, k - 1, h)
        return SymmetryScore(np.asarray(x, float), r, k, pinch, spine)

    def symmetry_test(self, x, r, k, eps, h=None):
        """Computable proxy for a (k, eps)-symmetric ball: small density pinch
        between r and r/8, plus (for k >= 1) a small k-1 spine score."""
        pinch = abs(self.density(x, r, h) - self.density(x, r / 8.0, h))
        if pinch >= eps:
            return False
        if k == 0:
            return True
        score, _ = self.spine_score(x, r, k - 1, h)
        return score < eps

    # -- conversion and I/O --------------------------------------------------

    def refined_pieces(self, h=None):
        """(centroids, weights) of the bisection refinement at diameter < h."""
        h = self.quadrature_h if h is None else h
        cents = []
        weights = []
        for s in range(self.n_simplices):
            stack = [(self._corners[s], self._vols[s])]
            while stack:
                v, vol = stack.pop()
                nv = v.shape[0]
                best, ei, ej = -1.0, 0, 1
                for i in range(nv - 1):
                    d2 = ((v[i + 1:] - v[i]) ** 2).sum(axis=1)
                    j = int(np.argmax(d2))
                    if d2[j] > best:
                        best, ei, ej = float(d2[j]), i, i + 1 + j
                if math.sqrt(best) <= h:
                    cents.append(v.mean(axis=0))
                    weights.append(self.multiplicities[s] * vol)
                    continue
                mid = 0.5 * (v[ei] + v[ej])
                a = v.copy()
                a[ej] = mid
                b = v.copy()
                b[ei] = mid
                stack.append((a, 0.5 * vol))
                stack.append((b, 0.5 * vol))
        return np.array(cents), np.array(weights)

    def to_measure(self, h=None):
        """Atomic quadrature measure; total weight equals total mass exactly."""
        if self.n_simplices == 0:
            return WeightedPointMeasure(np.zeros((0, self.ambient_dim)), np.zeros(0))
        cents, weights = self.refined_pieces(h)
        return WeightedPointMeasure(cents, weights)

    def write_off(self, path):
        """Counts header, vertex lines, then simplex lines with multiplicity."""
        with open(path, "w") as fh:
            fh.write(f"VOFF {self.m} {self.ambient_dim}\n")
            fh.write(f"{len(self.vertices)} {self.n_simplices}\n")
            for v in self.vertices:
                fh.write(" ".join(f"{c:.17g}" for c in v) + "\n")
            for simp, mult in zip(self.simplices, self.multiplicities):
                fh.write(" ".join(str(i) for i in simp) + f" {mult}\n")

    @classmethod
    def read_off(cls, path, quadrature_h=0.01):
        with open(path) as fh:
            head = fh.readline().split()
            if len(head) != 3 or head[0] != "VOFF":
                raise ValueError(f"{path}: not a VOFF mesh file")
            m, n = int(head[1]), int(head[2])
            counts = fh.readline().split()
            nv, ns = int(counts[0]), int(counts[1])
            verts = np.zeros((nv, n))
            for i in range(nv):
                vals = fh.readline().split()
                if len(vals) != n:
                    raise ValueError(f"{path}: vertex line {i} malformed")
                verts[i] = [float(v) for v in vals]
            simps = np.zeros((ns, m + 1), dtype=np.int64)
            mults = np.zeros(ns, dtype=np.int64)
            for i in range(ns):
                vals = fh.readline().split()
                if len(vals) != m + 2:
                    raise ValueError(f"{path}: simplex line {i} malformed")
                simps[i] = [int(v) for v in vals[:-1]]
                mults[i] = int(vals[-1])
        return cls(verts, simps, mults, quadrature_h)


class SymmetryScore:
    """Components of the symmetry proxy at one ball: the density pinch
    |theta_r - theta_{r/8}| and (for k >= 1) the k-1 spine score."""

    def __init__(self, center, radius, k, pinch, spine):
        self.center = center
        self.radius = radius
        self.k = k
        self.pinch = pinch
        self.spine = spine

    def passes(self, eps):
        if self.pinch >= eps:
            return False
        return self.k == 0 or self.spine < eps


class DensityCurve:
    """theta_r(x) over a radius ladder."""

    def __init__(self, center, radii, values):
        self.center = center
        self.radii = radii
        self.values = values

    def max_decrease(self):
        """Largest violation of monotonicity along increasing radius."""
        order = np.argsort(self.radii)
        vals = self.values[order]
        return float(np.maximum(vals[:-1] - vals[1:], 0.0).max(initial=0.0))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _grid_triangles(extent, resolution):
    """Kuhn triangulation of [-extent, extent]^2: vertices and triangles."""
    s = int(resolution)
    axis = np.linspace(-extent, extent, s + 1)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    verts2 = np.column_stack([xx.ravel(), yy.ravel()])
    tris = []
    for i in range(s):
        for j in range(s):
            a = i * (s + 1) + j
            b = (i + 1) * (s + 1) + j
            tris.append([a, b, a + 1])
            tris.append([a + 1, b, b + 1])
    return verts2, np.array(tris, dtype=np.int64)


def plane(m=2, n=3, extent=2.0, resolution=16, base=None, frame=None,
          multiplicity=1, quadrature_h=0.01):
    """Flat m-patch (m in {1, 2}) embedded in R^n."""
    if frame is None:
        frame = np.eye(n)[:m]
    frame = orthonormalize(frame)
    base = np.zeros(n) if base is None else np.asarray(base, float)
    if m == 1:
        s = int(resolution)
        t = np.linspace(-extent, extent, s + 1)
        verts = base + t[:, None] * frame[0]
        simps = np.column_stack([np.arange(s), np.arange(1, s + 1)])
    elif m == 2:
        verts2, simps = _grid_triangles(extent, resolution)
        verts = base + verts2 @ frame
    else:
        raise ValueError("plane generator supports m in {1, 2}")
    mults = np.full(len(simps), multiplicity, dtype=np.int64)
    return SimplicialVarifold(verts, simps, mults, quadrature_h)


def union_of_planes(n=3, extent=2.0, resolution=16, quadrature_h=0.01,
                    frames=None):
    """Two (or more) transverse flat patches; crease = pairwise intersection."""
    if frames is None:
        frames = [np.eye(n)[:2], np.vstack([np.eye(n)[0], np.eye(n)[2]])]
    parts = [plane(2, n, extent, resolution, frame=f, quadrature_h=quadrature_h)
             for f in frames]
    return merge(parts, quadrature_h)


def merge(parts, quadrature_h=0.01):
    """Disjoint union of simplicial varifolds of equal dimension."""
    offset = 0
    verts, simps, mults = [], [], []
    for p in parts:
        verts.append(p.vertices)
        simps.append(p.simplices + offset)
        mults.append(p.multiplicities)
        offset += len(p.vertices)
    return SimplicialVarifold(np.vstack(verts), np.vstack(simps),
                              np.concatenate(mults), quadrature_h)


def cone_over_link(n_sheets=3, extent=2.0, resolution=16, quadrature_h=0.01):
    """Stationary 2-cone in R^3: n_sheets half-planes meeting along the z-axis
    at equal angles (the classical triple-junction cone for n_sheets=3)."""
    if n_sheets < 2:
        raise ValueError("need at least 2 sheets")
    parts = []
    s = int(resolution)
    for j in range(n_sheets):
        ang = 2.0 * math.pi * j / n_sheets
        u = np.array([math.cos(ang), math.sin(ang), 0.0])
        rr = np.linspace(0.0, extent, s + 1)
        zz = np.linspace(-extent, extent, 2 * s + 1)
        verts = (rr[:, None, None] * u[None, None, :]
                 + zz[None, :, None] * np.array([0.0, 0.0, 1.0])[None, None, :])
        verts = verts.reshape(-1, 3)
        tris = []
        w = 2 * s + 1
        for i in range(s):
            for jj in range(2 * s):
                a = i * w + jj
                b = (i + 1) * w + jj
                tris.append([a, b, a + 1])
                tris.append([a + 1, b, b + 1])
        parts.append(SimplicialVarifold(verts, np.array(tris, dtype=np.int64),
                                        quadrature_h=quadrature_h))
    return merge(parts, quadrature_h)


def graph_surface(height, extent=1.0, resolution=24, n=3, quadrature_h=0.01):
    """Graph patch {(a, b, g(a, b))}; ``height`` maps (A, B) arrays to values."""
    verts2, tris = _grid_triangles(extent, resolution)
    g = np.asarray(height(verts2[:, 0], verts2[:, 1]), dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != (len(verts2), n - 2):
        raise ValueError("height must produce n-2 graph coordinates")
    verts = np.column_stack([verts2, g])
    return SimplicialVarifold(verts, tris, quadrature_h=quadrature_h)


def snowflake_factor(eta):
    """Per-step length multiplier of the middle-third tent replacement."""
    return 2.0 / 3.0 + math.sqrt(1.0 + 4.0 * eta * eta) / 3.0


def snowflake_length(etas):
    """Closed-recursion length of the unit-segment snowflake (oracle)."""
    length = 1.0
    for eta in etas:
        length *= snowflake_factor(eta)
    return length


def snowflake_points(etas, allow_unembedded=False):
    """Vertices of the variable-parameter snowflake polyline over [0, 1].

    Each step replaces the middle third of every segment with the two upper
    edges of an isosceles tent of relative height eta/3.  Parameters must
    stay below sqrt(3)/2, the classical value, to keep the curve embedded.
    """
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for i, eta in enumerate(etas):
        if not allow_unembedded and not 0.0 <= eta < SNOWFLAKE_ETA_MAX:
            raise ValueError(
                f"step {i}: eta={eta} outside [0, sqrt(3)/2); segments collide")
        a = pts[:-1]
        b = pts[1:]
        d = b - a
        perp = np.column_stack([-d[:, 1], d[:, 0]])
        p1 = a + d / 3.0
        apex = a + d / 2.0 + perp * (eta / 3.0)
        p2 = a + 2.0 * d / 3.0
        out = np.empty((4 * len(a) + 1, 2))
        out[0:-1:4] = a
        out[1::4] = p1
        out[2::4] = apex
        out[3::4] = p2
        out[-1] = pts[-1]
        pts = out
    return pts


def snowflake(etas, quadrature_h=None, allow_unembedded=False):
    """Polyline 1-varifold built by the middle-third tent replacement."""
    pts = snowflake_points(etas, allow_unembedded)
    nseg = len(pts) - 1
    simps = np.column_stack([np.arange(nseg), np.arange(1, nseg + 1)])
    if quadrature_h is None:
        quadrature_h = max(float(np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1)).max()),
                           1e-12)
    return SimplicialVarifold(pts, simps, quadrature_h=quadrature_h)


def polyline_length(varifold):
    if varifold.m != 1:
        raise ValueError("polyline length needs a 1-varifold")
    return varifold.total_mass()


def parse_eta_sequence(pattern, depth, start=1):
    """Eta sequences from a string: "1/i", "1/sqrt(i)", or a constant."""
    idx = range(start, start + depth)
    if pattern == "1/i":
        return [1.0 / i for i in idx]
    if pattern in ("1/sqrt(i)", "i^-1/2"):
        return [1.0 / math.sqrt(i) for i in idx]
    try:
        val = float(pattern)
    except ValueError:
        raise ValueError(f"unknown eta sequence {pattern!r}") from None
    return [val] * depth


def generate(kind, **params):
    """Named testbed generators; see the individual functions for parameters."""
    builders = {
        "plane": plane,
        "union_of_planes": union_of_planes,
        "cone_over_link": cone_over_link,
        "graph_surface": graph_surface,
        "snowflake": snowflake,
    }
    if kind == "simons_cone":
        from .simons import simons_cone_mesh
        return simons_cone_mesh(**params)
    if kind not in builders:
        raise ValueError(f"unknown generator kind {kind!r}")
    return builders[kind](**params)


def plane_density(m):
    """Density of a flat multiplicity-1 m-plane: the unit m-ball volume."""
    return unit_ball_volume(m)
