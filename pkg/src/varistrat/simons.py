"""The area-minimizing 7-cone in R^8 over S^3(1/sqrt2) x S^3(1/sqrt2).

Three representations, by accuracy/cost trade-off:

* closed forms: |A|, the regularity scale, radial curvature integrals,
  vertex-ball masses (link area = pi^4 / 2);
* ``SimonsCone``: the rotation-reduced quadrature.  Every ball/annulus
  integral of the cone is invariant under the stabilizer of the center, so
  it collapses exactly to a 2-3 dimensional integral (radius x two polar
  angles) evaluated with an analytic radial part; this is what makes
  7-dimensional ball quadrature tractable at small h;
* ``SimonsConeMesh``: a chordal product-cone mesh whose apex-ray integrals
  reduce to moments of a base-radius histogram (compiled kernel), plus a
  small materialized simplicial mesh for file export and validity checks.

Direct bisection quadrature of a 7-dimensional simplicial mesh at small h is
not tractable ((diam/h)^7 pieces); the reduced forms above are exact
reformulations, not approximations, of the same integrals.
"""

import itertools
import math
from functools import lru_cache

import numpy as np

from . import _kernels
from .geom import LinearSubspace
from .varifold import SimplicialVarifold

SQRT6 = math.sqrt(6.0)
LINK_AREA = math.pi ** 4 / 2.0          # 6-volume of S^3(1/sqrt2) x S^3(1/sqrt2)
VERTEX_DENSITY = LINK_AREA / 7.0        # theta_r(0), independent of r
REG_SCALE_FACTOR = 1.0 / (1.0 + SQRT6)  # r_I(x) = |x| / (1 + sqrt6)


def second_fundamental_norm(x):
    """|A| at a point of the cone: sqrt(6) / |x|."""
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ValueError("|A| is singular at the vertex")
    return SQRT6 / nrm


def regularity_scale(x):
    """Largest r with sup_{B_r(x)} |A| <= 1/r: solves sqrt6/(|x|-r) = 1/r."""
    return float(np.linalg.norm(x)) * REG_SCALE_FACTOR


def curvature_integral(p, cutoff, outer=1.0):
    """Closed form of the |A|^p mass over the annulus B_outer minus B_cutoff.

    Equals link_area * 6^(p/2) * int_cutoff^outer rho^(6-p) drho; diverges
    logarithmically in the cutoff exactly at p = 7.
    """
    if not 0.0 < cutoff < outer:
        raise ValueError("need 0 < cutoff < outer")
    if p <= 0:
        raise ValueError("p must be positive")
    if abs(p - 7.0) < 1e-12:
        radial = math.log(outer / cutoff)
    else:
        radial = (outer ** (7.0 - p) - cutoff ** (7.0 - p)) / (7.0 - p)
    return LINK_AREA * 6.0 ** (p / 2.0) * radial


def vertex_ball_mass(r):
    """mu(B_r(0)) = link_area * r^7 / 7, exactly."""
    return LINK_AREA * r ** 7 / 7.0


def small_regularity_mass(rho, outer=1.0):
    """Mass of {x in B_outer : r_I(x) < rho}; a ball at the vertex."""
    return vertex_ball_mass(min(outer, rho / REG_SCALE_FACTOR))


def smooth_point(norm):
    """A smooth cone point of the requested norm (canonical orbit choice)."""
    a = norm / math.sqrt(2.0)
    x = np.zeros(8)
    x[0] = a
    x[4] = a
    return x


def _split_factors(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (8,):
        raise ValueError("points of the cone live in R^8")
    return x[:4], x[4:]


def on_cone(x, tol=1e-9):
    u, v = _split_factors(x)
    return abs(np.linalg.norm(u) - np.linalg.norm(v)) <= tol * max(1.0, np.linalg.norm(x))


class SimonsCone:
    """Rotation-reduced quadrature for the cone {|u| = |v|} in R^4 x R^4.

    For a center x = (xu, xv), every integrand appearing in the density,
    monotonicity and spine computations depends only on the radius rho and
    the polar angles of the two factors relative to xu, xv.  The radial
    integral is done analytically (mass) or by Gauss-Legendre on the exact
    interval (defect), the angles by a midpoint tensor grid whose arc
    resolution is the ``h`` parameter.
    """

    m = 7
    ambient_dim = 8

    def __init__(self, quadrature_h=0.01, rho_nodes=24):
        self.quadrature_h = float(quadrature_h)
        nodes, weights = np.polynomial.legendre.leggauss(rho_nodes)
        self._gl = (0.5 * (nodes + 1.0), 0.5 * weights)

    # Zonal reduction: for a center (xu, xv) every integrand depends on the
    # polar cosines (cu, cv) only through b = a_u cu + a_v cv, and the zonal
    # measure on each S^3 factor is 4 pi sqrt(1-c^2) dc.  The radial part has
    # square-root kinks exactly where a sphere |y - x| = t becomes tangent to
    # a cone ray, i.e. at b = sqrt(2 (c0 - t^2)); splitting the c-intervals
    # there and substituting c = p + (q - p) sin^2(psi) makes every piece
    # analytic, so few Gauss nodes give near-exact values.

    @staticmethod
    @lru_cache(maxsize=32)
    def _leggauss(n):
        return np.polynomial.legendre.leggauss(n)

    def _ngl(self, h):
        return max(5, math.ceil(0.6 / math.sqrt(max(h, 1e-12))))

    def _piece_nodes(self, p, q, ngl):
        """Gauss nodes/weights on [p, q] under c = p + (q-p) sin^2(psi)."""
        t, w = self._leggauss(ngl)
        psi = 0.25 * math.pi * (t + 1.0)
        c = p + (q - p) * np.sin(psi) ** 2
        jac = (q - p) * 2.0 * np.sin(psi) * np.cos(psi) * 0.25 * math.pi * w
        return c, jac

    def _split_edges(self, lo, hi, cuts):
        edges = [lo] + sorted(c for c in cuts if lo + 1e-13 < c < hi - 1e-13) + [hi]
        return list(zip(edges[:-1], edges[1:]))

    def _reduce2(self, a_u, a_v, bkinks, func, h):
        """Integral of func(b, cu, cv) * zonal weights over both polar angles."""
        ngl = self._ngl(h)
        cv_cuts = []
        cu_cuts_of = None
        if a_u > 1e-14:
            def cu_cuts_of(cv):
                return [(bk - a_v * cv) / a_u for bk in bkinks]
            if a_v > 1e-14:
                for bk in bkinks:
                    cv_cuts.extend([(bk - a_u) / a_v, (bk + a_u) / a_v])
        elif a_v > 1e-14:
            cv_cuts.extend([bk / a_v for bk in bkinks])
        cu_all, cv_all, wt_all = [], [], []
        for pv, qv in self._split_edges(-1.0, 1.0, cv_cuts):
            cvn, jv = self._piece_nodes(pv, qv, ngl)
            zv = np.sqrt(np.maximum(1.0 - cvn * cvn, 0.0)) * jv
            for cvi, wvi in zip(cvn, zv):
                cuts = cu_cuts_of(cvi) if cu_cuts_of else []
                for pu, qu in self._split_edges(-1.0, 1.0, cuts):
                    cun, ju = self._piece_nodes(pu, qu, ngl)
                    zu = np.sqrt(np.maximum(1.0 - cun * cun, 0.0)) * ju
                    cu_all.append(cun)
                    cv_all.append(np.full_like(cun, cvi))
                    wt_all.append(zu * wvi)
        cu = np.concatenate(cu_all)
        cv = np.concatenate(cv_all)
        wt = np.concatenate(wt_all)
        b = a_u * cu + a_v * cv
        c0 = a_u * a_u + a_v * a_v
        vals = func(b, c0, cu, cv)
        scale = math.sqrt(2.0) * 16.0 * math.pi ** 2
        if vals.ndim == 1:
            return scale * float(vals @ wt)
        return scale * (vals.T @ wt)

    def _reduced(self, x, radii, func, h):
        """Kink-aware reduction for a center x and the sphere radii involved."""
        xu, xv = _split_factors(np.asarray(x, dtype=np.float64))
        a_u = float(np.linalg.norm(xu))
        a_v = float(np.linalg.norm(xv))
        c0 = a_u * a_u + a_v * a_v
        bkinks = tuple(math.sqrt(2.0 * (c0 - t * t)) for t in radii if t * t < c0)
        return self._reduce2(a_u, a_v, bkinks, func, h)

    @staticmethod
    def _rho_interval(b, c0, r):
        """Interval of rho with w(rho) <= r (clipped to rho >= 0)."""
        disc = b * b - 2.0 * (c0 - r * r)
        ok = disc > 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        lo = np.clip(0.5 * (b - sq), 0.0, None)
        hi = np.clip(0.5 * (b + sq), 0.0, None)
        return np.where(ok, lo, 0.0), np.where(ok, hi, 0.0)

    def mass(self, x, r, h=None):
        """mu(B_r(x)); exact radial integration, kink-split angular Gauss rule."""
        if r <= 0:
            raise ValueError("radius must be positive")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        if np.linalg.norm(x) <= 1e-14:
            return vertex_ball_mass(r)

        def radial(b, c0, cu, cv):
            lo, hi = self._rho_interval(b, c0, r)
            return (hi ** 7 - lo ** 7) / 7.0

        return self._reduced(x, (r,), radial, h)

    def density(self, x, r, h=None):
        return self.mass(x, r, h) / r ** self.m

    def density_curve(self, x, radii, h=None):
        from .varifold import DensityCurve
        radii = np.asarray(radii, dtype=np.float64)
        return DensityCurve(np.asarray(x, float), radii,
                            np.array([self.density(x, r, h) for r in radii]))

    def mass_drop(self, x, s, r, h=None):
        if not 0 < s <= r:
            raise ValueError("need 0 < s <= r")
        return self.density(x, r, h) - self.density(x, s, h)

    def monotonicity_defect(self, x, s, r, h=None):
        """Annulus integral of <N_y, n_x>^2 |y-x|^-7; for this codimension-one
        cone <N_y, y-x> = -(a_u cu - a_v cv)/sqrt2 along each reduced ray."""
        if not 0 < s < r:
            raise ValueError("need 0 < s < r")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        if np.linalg.norm(x) <= 1e-14:
            return 0.0
        xu, xv = _split_factors(x)
        a_u = float(np.linalg.norm(xu))
        a_v = float(np.linalg.norm(xv))
        tnode, tweight = self._gl

        def radial(b, c0, cu, cv):
            lo_r, hi_r = self._rho_interval(b, c0, r)
            lo_s, hi_s = self._rho_interval(b, c0, s)
            amp = 0.5 * (a_u * cu - a_v * cv) ** 2
            out = np.zeros(b.shape)
            # {s < w <= r} splits into at most two rho intervals
            for lo, hi in ((lo_r, np.minimum(lo_s, hi_r)),
                           (np.maximum(hi_s, lo_r), hi_r)):
                length = np.maximum(hi - lo, 0.0)
                if not np.any(length > 0.0):
                    continue
                rho = lo[..., None] + length[..., None] * tnode
                w2 = 2.0 * rho * rho - 2.0 * b[..., None] * rho + c0
                w2 = np.maximum(w2, 1e-300)
                integ = rho ** 6 * w2 ** -4.5
                out = out + length * (integ * tweight).sum(axis=-1)
            return amp * out

        return self._reduced(x, (s, r), radial, h)

    def spine_score(self, x, r, k, h=None):
        """Annulus-averaged normal projector, assembled from zonal moments.

        N = (theta_u, -theta_v)/sqrt2, so Q has factor blocks governed by the
        five scalar annulus integrals of cu^2, sin^2/3 (both factors) and
        cu*cv.  Returns (sum of k+1 smallest eigenvalues, argmin subspace).
        """
        if not 0 <= k <= self.m - 1:
            raise ValueError("need 0 <= k <= m-1")
        h = self.quadrature_h if h is None else h
        x = np.asarray(x, dtype=np.float64)
        rlo, rhi = 3.0 * r / 8.0, r / 2.0
        xu, xv = _split_factors(x)
        a_u = float(np.linalg.norm(xu))
        a_v = float(np.linalg.norm(xv))
        u0 = xu / a_u if a_u > 1e-14 else np.array([1.0, 0.0, 0.0, 0.0])
        v0 = xv / a_v if a_v > 1e-14 else np.array([1.0, 0.0, 0.0, 0.0])
        keys = ("mass", "cu2", "cv2", "cucv", "su2", "sv2")

        def radial(b, c0, cu, cv):
            lo_o, hi_o = self._rho_interval(b, c0, rhi)
            lo_i, hi_i = self._rho_interval(b, c0, rlo)
            base = np.zeros(b.shape)
            for lo, hi in ((lo_o, np.minimum(lo_i, hi_o)),
                           (np.maximum(hi_i, lo_o), hi_o)):
                seg = (hi ** 7 - lo ** 7) / 7.0
                base = base + np.where(hi > lo, seg, 0.0)
            return np.stack([base, base * cu ** 2, base * cv ** 2,
                             base * cu * cv, base * (1.0 - cu ** 2),
                             base * (1.0 - cv ** 2)], axis=-1)

        totals = self._reduced(x, (rlo, rhi), radial, h)
        vals = dict(zip(keys, totals))
        mass = vals["mass"]
        if mass <= 0.0:
            raise ValueError("empty annulus")
        eye4 = np.eye(4)
        upper = vals["cu2"] * np.outer(u0, u0) + vals["su2"] / 3.0 * (eye4 - np.outer(u0, u0))
        lower = vals["cv2"] * np.outer(v0, v0) + vals["sv2"] / 3.0 * (eye4 - np.outer(v0, v0))
        cross = -vals["cucv"] * np.outer(u0, v0)
        q = np.zeros((8, 8))
        q[:4, :4] = upper
        q[4:, 4:] = lower
        q[:4, 4:] = cross
        q[4:, :4] = cross.T
        q = q / (2.0 * mass)
        evals, evecs = _kernels.jacobi_eigh(q)
        score = float(np.maximum(evals, 0.0)[8 - (k + 1):].sum())
        return score, LinearSubspace(evecs[8 - (k + 1):])

    def symmetry_score(self, x, r, k, h=None):
        from .varifold import SymmetryScore
        pinch = abs(self.density(x, r, h) - self.density(x, r / 8.0, h))
        spine = None
        if k >= 1:
            spine, _ = self.spine_score(x, r, k - 1, h)
        return SymmetryScore(np.asarray(x, float), r, k, pinch, spine)

    def symmetry_test(self, x, r, k, eps, h=None):
        pinch = abs(self.density(x, r, h) - self.density(x, r / 8.0, h))
        if pinch >= eps:
            return False
        if k == 0:
            return True
        score, _ = self.spine_score(x, r, k - 1, h)
        return score < eps

    def curvature_mass(self, p, cutoff, outer=1.0, h=None):
        """Numerical annulus quadrature of |A|^p (radial Gauss nodes x zonal
        angular rule); an independent check of the closed form."""
        if not 0.0 < cutoff < outer:
            raise ValueError("need 0 < cutoff < outer")
        h = self.quadrature_h if h is None else h
        nrad = 4 * self._ngl(h)
        t, w = self._leggauss(nrad)
        # integrate in log-radius: the integrand spans decades near the
        # critical power, where it is exactly constant in u = log rho
        ulo, uhi = math.log(cutoff / math.sqrt(2.0)), math.log(outer / math.sqrt(2.0))
        u = 0.5 * (uhi - ulo) * t + 0.5 * (uhi + ulo)
        wu = 0.5 * (uhi - ulo) * w
        rho = np.exp(u)
        radial = float((rho ** 7 * (SQRT6 / (rho * math.sqrt(2.0))) ** p) @ wu)

        def func(b, c0, cu, cv):
            return np.full(b.shape, radial)

        return self._reduce2(0.0, 0.0, (), func, h)


# ---------------------------------------------------------------------------
# chordal product-cone meshes
# ---------------------------------------------------------------------------


def _cross_polytope_factor():
    """16-cell triangulation of S^3: 8 vertices, 16 tetrahedra."""
    verts = np.vstack([np.eye(4), -np.eye(4)])
    tets = []
    for signs in itertools.product((0, 4), repeat=4):
        tets.append([0 + signs[0], 1 + signs[1], 2 + signs[2], 3 + signs[3]])
    return verts, np.array(tets, dtype=np.int64)


def _hexacosichoron_factor():
    """600-cell triangulation of S^3 via the convex hull of its vertices."""
    from scipy.spatial import ConvexHull
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    pts = []
    for signs in itertools.product((0.5, -0.5), repeat=4):
        pts.append(signs)
    for i in range(4):
        for s in (1.0, -1.0):
            v = [0.0] * 4
            v[i] = s
            pts.append(tuple(v))
    even_perms = [p for p in itertools.permutations(range(4))
                  if _perm_parity(p) == 0]
    base = (phi / 2.0, 0.5, 1.0 / (2.0 * phi), 0.0)
    seen = set()
    for perm in even_perms:
        for signs in itertools.product((1.0, -1.0), repeat=3):
            v = [0.0] * 4
            vals = (signs[0] * base[0], signs[1] * base[1], signs[2] * base[2], 0.0)
            for slot, val in zip(perm, vals):
                v[slot] = val
            key = tuple(round(c, 9) for c in v)
            if key not in seen:
                seen.add(key)
                pts.append(tuple(v))
    verts = np.array(pts)
    hull = ConvexHull(verts)
    return verts, np.array(hull.simplices, dtype=np.int64)


def _perm_parity(perm):
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return inv % 2


def _subdivide_tets(verts, tets):
    """1:8 edgewise tetrahedral refinement (fixed octahedron diagonal)."""
    verts = np.asarray(verts, dtype=np.float64)
    tets = np.asarray(tets, dtype=np.int64)
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    edges = np.concatenate([np.sort(tets[:, p], axis=1) for p in pairs])
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    mid_ids = len(verts) + inverse.reshape(6, -1)   # (6, T) per-pair midpoint ids
    new_verts = np.vstack([verts, 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])])
    v0, v1, v2, v3 = tets.T
    m01, m02, m03, m12, m13, m23 = mid_ids
    children = [
        (v0, m01, m02, m03), (v1, m01, m12, m13),
        (v2, m02, m12, m23), (v3, m03, m13, m23),
        (m02, m13, m01, m03), (m02, m13, m03, m23),
        (m02, m13, m23, m12), (m02, m13, m12, m01),
    ]
    out = np.concatenate([np.column_stack(ch) for ch in children])
    return new_verts, out.astype(np.int64)


@lru_cache(maxsize=16)
def _factor_data(base, level):
    """Per-tet (hull distance, 3-volume, |centroid|^2) for one sphere factor."""
    if base == "16cell":
        verts, tets = _cross_polytope_factor()
    elif base == "600cell":
        verts, tets = _hexacosichoron_factor()
    else:
        raise ValueError("base must be '16cell' or '600cell'")
    for _ in range(level):
        verts, tets = _subdivide_tets(verts, tets)
        verts = verts / np.linalg.norm(verts, axis=1, keepdims=True)
    verts = verts / (np.linalg.norm(verts, axis=1, keepdims=True) * math.sqrt(2.0))
    corners = verts[tets]                      # (T, 4, 4)
    edges = corners[:, 1:, :] - corners[:, :1, :]
    gram = edges @ edges.transpose(0, 2, 1)
    vols = np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / 6.0
    # distance from the origin to the affine hull of each tet: component of a
    # corner orthogonal to the edge span (batched least squares)
    rhs = edges @ corners[:, 0, :, None]
    sol = np.linalg.solve(gram, rhs)
    tangential = (rhs * sol).sum(axis=(1, 2))
    w2 = (corners[:, 0] ** 2).sum(axis=1)
    dists = np.sqrt(np.maximum(w2 - tangential, 0.0))
    cents = corners.mean(axis=1)
    return dists, vols, (cents * cents).sum(axis=1), verts, tets


def _aggregated_factor(base, level, bins=192, max_raw=8192):
    """Factor data compressed on a (hull distance, centroid radius) grid.

    Pair reductions over the product of two factors cost len(u) * len(v);
    volume-weighted binning keeps that tractable at deep refinement levels
    while preserving the integrals to first order in the bin width.
    """
    dists, vols, csq, _, _ = _factor_data(base, level)
    if len(dists) <= max_raw:
        return dists, vols, csq
    di = np.clip(((dists - dists.min()) / max(np.ptp(dists), 1e-300) * bins)
                 .astype(np.int64), 0, bins - 1)
    ci = np.clip(((csq - csq.min()) / max(np.ptp(csq), 1e-300) * bins)
                 .astype(np.int64), 0, bins - 1)
    key = di * bins + ci
    order = np.argsort(key, kind="stable")
    key = key[order]
    starts = np.flatnonzero(np.concatenate([[True], key[1:] != key[:-1]]))
    vol_s = np.add.reduceat(vols[order], starts)
    d_s = np.add.reduceat((vols * dists)[order], starts) / vol_s
    c_s = np.add.reduceat((vols * csq)[order], starts) / vol_s
    return d_s, vol_s, c_s


class SimonsConeMesh:
    """Product-cone mesh: the exact cone over the radial projection of a
    chordal triangulation of the link onto the unit sphere.

    Every ray of the cone runs the full radius, so radial integrals are in
    closed form and the only discretization error is angular: the projected
    link area is estimated per product cell by the centroid rule, reduced
    over all cell pairs through a radius histogram (compiled kernel).  The
    object is exactly conical: vertex densities are constant and vertex-ball
    masses scale as r^7 identically.
    """

    m = 7
    ambient_dim = 8

    def __init__(self, base="600cell", level=3, nbins=4096):
        self.base = base
        self.level = level
        du, vu, cu = _aggregated_factor(base, level)
        smin = math.sqrt(2.0 * cu.min()) * 0.999
        smax = math.sqrt(2.0 * cu.max()) * 1.001
        hist = _kernels.cone_pair_histogram(du, vu, cu, du, vu, cu,
                                            smin, smax, nbins)
        centers = smin + (np.arange(nbins) + 0.5) * (smax - smin) / nbins
        keep = hist > 0.0
        self._s = centers[keep]           # chordal base-cell radii
        self._w = hist[keep]              # sum of dist * vol_u * vol_v per bin
        self.link_area = float((self._w * self._s ** -7.0).sum())

    def total_mass(self, outer=1.0):
        return self.link_area * outer ** 7 / 7.0

    def mass(self, x, r, h=None):
        """Vertex-centered ball mass (exactly proportional to r^7)."""
        x = np.asarray(x, dtype=np.float64)
        if np.linalg.norm(x) > 1e-12:
            raise ValueError("the product-cone mesh integrates vertex balls "
                             "only; use SimonsCone for off-vertex centers")
        return self.link_area * r ** 7 / 7.0

    def density(self, x, r, h=None):
        return self.mass(x, r) / r ** self.m

    def density_curve(self, x, radii, h=None):
        from .varifold import DensityCurve
        radii = np.asarray(radii, dtype=np.float64)
        return DensityCurve(np.asarray(x, float), radii,
                            np.array([self.density(x, r) for r in radii]))

    def radial_integral(self, power, lo, hi):
        """Integral of |y|^power over the cone between radii lo and hi."""
        p = float(power)
        if abs(p + 7.0) < 1e-12:
            rad = math.log(hi / lo)
        else:
            rad = (hi ** (7.0 + p) - lo ** (7.0 + p)) / (7.0 + p)
        return self.link_area * rad

    def curvature_mass(self, p, cutoff, outer=1.0):
        """Quadrature of |A|^p over B_outer minus B_cutoff."""
        return 6.0 ** (p / 2.0) * self.radial_integral(-p, cutoff, outer)

    def regularity_sublevel_mass(self, rho, outer=1.0):
        """Mass of {r_I < rho} within B_outer: a vertex ball of radius
        rho (1 + sqrt6), clipped."""
        return self.mass(np.zeros(8), min(outer, rho / REG_SCALE_FACTOR))


def mass_extrapolation(base="600cell", levels=(1, 2, 3)):
    """Total masses along the angular refinement ladder and their Richardson
    extrapolation (leading angular error is quadratic in the cell size)."""
    masses = [SimonsConeMesh(base, lv).total_mass() for lv in levels]
    extrap = masses[-1] + (masses[-1] - masses[-2]) / 3.0
    return masses, extrap


def simons_cone_mesh(base="16cell", level=0, radius=1.0, quadrature_h=0.05):
    """Materialized simplicial cone (apex simplices over the staircase
    triangulation of the product link); small bases only, for export and
    structural checks."""
    _, _, _, verts, tets = _factor_data(base, level)
    if len(tets) ** 2 * 20 > 400_000:
        raise ValueError("materialized product mesh would be too large; "
                         "use SimonsConeMesh for quantitative work")
    paths = []
    for umoves in itertools.combinations(range(6), 3):
        path = [(0, 0)]
        i = j = 0
        for step in range(6):
            if step in umoves:
                i += 1
            else:
                j += 1
            path.append((i, j))
        paths.append(path)
    nfac = len(verts)
    vertices = [np.zeros(8)]
    index = {}

    def vid(iu, iv):
        # factor vertices sit on S^3(1/sqrt2), so the pair has norm 1
        key = iu * nfac + iv
        if key not in index:
            index[key] = len(vertices)
            vertices.append(np.concatenate([verts[iu], verts[iv]]) * radius)
        return index[key]

    simplices = []
    for tu in tets:
        for tv in tets:
            for path in paths:
                simplices.append([0] + [vid(tu[i], tv[j]) for i, j in path])
    return SimplicialVarifold(np.array(vertices), np.array(simplices, dtype=np.int64),
                              quadrature_h=quadrature_h)
