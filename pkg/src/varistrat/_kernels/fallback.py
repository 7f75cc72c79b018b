"""Pure numpy implementations of the hot kernels.

Mirrors the compiled extension in ``_impl.pyx``; selected at import time when
the extension is unavailable (or when VARISTRAT_NO_EXT is set).  These are the
reference implementations: the compiled module must agree with them to
roundoff on every input.
"""

import numpy as np

IS_COMPILED = False

_JACOBI_SWEEPS = 64
_JACOBI_TOL = 1e-14


def jacobi_eigh(mat):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues descending, eigenvectors as rows) with a fixed sign
    convention (first nonzero component of each vector positive), so results
    are deterministic and identical across backends.  Intended for n <= 16.
    """
    a = np.array(mat, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    v = np.eye(n)
    scale = np.max(np.abs(a)) or 1.0
    for _ in range(_JACOBI_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(a[p, q]))
        if off <= _JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[:, p].copy()
                rq = a[:, q].copy()
                a[:, p] = c * rp - s * rq
                a[:, q] = s * rp + c * rq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                rp = v[:, p].copy()
                rq = v[:, q].copy()
                v[:, p] = c * rp - s * rq
                v[:, q] = s * rp + c * rq
    evals = np.diag(a).copy()
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    vecs = v[:, order].T.copy()
    for i in range(n):
        row = vecs[i]
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            vecs[i] = -row
    return evals, vecs


def smallest_eigenvalue_sum(mat, count):
    """Sum of the ``count`` smallest eigenvalues of a symmetric matrix."""
    evals, _ = jacobi_eigh(mat)
    if count <= 0:
        return 0.0
    return float(np.sum(evals[len(evals) - count:]))


def displacement_many(points, weights, centers, radius, k, gate):
    """Scale-normalized least L2 plane-fit distance of a weighted cloud.

    For each center c: gather atoms with |y - c| <= radius; if their total
    weight is below gate * radius**k the value is 0 by convention, otherwise
    radius**-(k+2) times the smallest possible integral of squared distances
    to an affine k-plane (the tail eigenvalue sum of the centered second
    moment of the restricted, unnormalized measure).
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    ncenters = centers.shape[0]
    out = np.zeros(ncenters)
    if points.shape[0] == 0 or ncenters == 0:
        return out
    threshold = gate * radius**k
    r2 = radius * radius
    n = points.shape[1]
    # chunk the distance computation to bound memory
    chunk = max(1, int(4e6) // max(points.shape[0], 1))
    for lo in range(0, ncenters, chunk):
        cs = centers[lo:lo + chunk]
        d2 = ((points[None, :, :] - cs[:, None, :]) ** 2).sum(axis=2)
        inside = d2 <= r2
        for j in range(cs.shape[0]):
            mask = inside[j]
            w = weights[mask]
            mass = w.sum()
            if mass < threshold or mass <= 0.0:
                continue
            pts = points[mask]
            cm = (w[:, None] * pts).sum(axis=0) / mass
            d = pts - cm
            sec = (w[:, None] * d).T @ d
            tail = max(smallest_eigenvalue_sum(sec, n - k), 0.0)
            out[lo + j] = tail / radius ** (k + 2)
    return out


def min_pairwise_distance(points):
    """Smallest nonzero inter-point distance (inf for fewer than 2 points)."""
    points = np.asarray(points, dtype=np.float64)
    npts = points.shape[0]
    if npts < 2:
        return np.inf
    best = np.inf
    chunk = max(1, int(4e6) // npts)
    for lo in range(0, npts, chunk):
        d2 = ((points[lo:lo + chunk, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        for j in range(d2.shape[0]):
            d2[j, lo + j] = np.inf
        best = min(best, float(np.sqrt(d2.min())))
    return best


def _simplex_diameter_edge(verts):
    nv = verts.shape[0]
    best = -1.0
    ei, ej = 0, 1
    for i in range(nv - 1):
        d2 = ((verts[i + 1:] - verts[i]) ** 2).sum(axis=1)
        j = int(np.argmax(d2))
        if d2[j] > best:
            best = float(d2[j])
            ei, ej = i, i + 1 + j
    return np.sqrt(best), ei, ej


def _clip_simplex(verts, vol, center, rlo, rhi, h, accum, max_depth=200):
    """Recursive longest-edge bisection of one simplex against an annulus.

    accum(centroid, piece_volume) is called on every accepted leaf piece.
    Pieces wholly outside {rlo < |y-center| <= rhi} are discarded; for pure
    mass queries (accum just sums volume) wholly-inside pieces are accepted
    without further refinement via the accum(None, vol) fast path.
    """
    stack = [(verts, vol, 0)]
    while stack:
        v, vv, depth = stack.pop()
        d = np.sqrt(((v - center) ** 2).sum(axis=1))
        dmin = d.min()
        dmax = d.max()      # distance to a point is convex: max is at a vertex
        diam, ei, ej = _simplex_diameter_edge(v)
        if dmin - diam > rhi or (rlo > 0.0 and dmax <= rlo):
            continue
        if diam <= h or depth >= max_depth:
            c = v.mean(axis=0)
            dc = np.sqrt(((c - center) ** 2).sum())
            if rlo < dc <= rhi:
                accum(c, vv)
            continue
        if accum.mass_only and dmax <= rhi and (rlo <= 0.0 or dmin - diam > rlo):
            accum(None, vv)
            continue
        mid = 0.5 * (v[ei] + v[ej])
        a = v.copy()
        a[ej] = mid
        b = v.copy()
        b[ei] = mid
        stack.append((a, 0.5 * vv, depth + 1))
        stack.append((b, 0.5 * vv, depth + 1))


class _MassAccum:
    mass_only = True

    def __init__(self):
        self.total = 0.0

    def __call__(self, centroid, vol):
        self.total += vol


class _DefectAccum:
    mass_only = False

    def __init__(self, proj, center, m):
        self.proj = proj
        self.center = center
        self.m = m
        self.total = 0.0

    def __call__(self, centroid, vol):
        d = centroid - self.center
        dist = np.sqrt((d * d).sum())
        if dist <= 0.0:
            return
        nx = d / dist
        val = float(nx @ self.proj @ nx)
        self.total += vol * val * dist ** (-self.m)


class _MomentAccum:
    mass_only = False

    def __init__(self, proj):
        self.proj = proj
        self.mass = 0.0
        self.moment = np.zeros_like(proj)

    def __call__(self, centroid, vol):
        self.mass += vol
        self.moment += vol * self.proj


def simplex_ball_mass(verts, vols, mults, center, radius, h):
    """Total weighted volume of simplices clipped to a closed ball."""
    verts = np.asarray(verts, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    total = 0.0
    for s in range(verts.shape[0]):
        acc = _MassAccum()
        _clip_simplex(verts[s], float(vols[s]), center, 0.0, radius, h, acc)
        total += float(mults[s]) * acc.total
    return total


def annulus_normal_defect(verts, vols, mults, projs, center, rlo, rhi, h, m):
    """Quadrature of |P_N n_x|^2 |y-x|^-m over an annulus, per-simplex P_N."""
    verts = np.asarray(verts, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    total = 0.0
    for s in range(verts.shape[0]):
        acc = _DefectAccum(projs[s], center, m)
        _clip_simplex(verts[s], float(vols[s]), center, rlo, rhi, h, acc)
        total += float(mults[s]) * acc.total
    return total


def annulus_normal_moment(verts, vols, mults, projs, center, rlo, rhi, h):
    """Unnormalized integral of the normal-space projector over an annulus."""
    verts = np.asarray(verts, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    n = verts.shape[2]
    mass = 0.0
    moment = np.zeros((n, n))
    for s in range(verts.shape[0]):
        acc = _MomentAccum(np.asarray(projs[s], dtype=np.float64))
        _clip_simplex(verts[s], float(vols[s]), center, rlo, rhi, h, acc)
        mass += float(mults[s]) * acc.mass
        moment += float(mults[s]) * acc.moment
    return moment, mass


def cone_pair_histogram(dist_u, vol_u, csq_u, dist_v, vol_v, csq_v, smin, smax, nbins):
    """Histogram of base-cell centroid radii for a product cone.

    Each pair (i, j) of factor cells contributes weight
    sqrt(dist_u[i]^2 + dist_v[j]^2) * vol_u[i] * vol_v[j] at radius
    sqrt(csq_u[i] + csq_v[j]).  Radial integrals over the cone then reduce to
    moments of this histogram.
    """
    dist_u = np.asarray(dist_u, dtype=np.float64)
    vol_u = np.asarray(vol_u, dtype=np.float64)
    csq_u = np.asarray(csq_u, dtype=np.float64)
    dist_v = np.asarray(dist_v, dtype=np.float64)
    vol_v = np.asarray(vol_v, dtype=np.float64)
    csq_v = np.asarray(csq_v, dtype=np.float64)
    hist = np.zeros(nbins)
    scale = nbins / (smax - smin)
    du2 = dist_u * dist_u
    dv2 = dist_v * dist_v
    chunk = max(1, int(2e6) // max(dist_v.size, 1))
    for lo in range(0, dist_u.size, chunk):
        hi = min(lo + chunk, dist_u.size)
        w = np.sqrt(du2[lo:hi, None] + dv2[None, :]) * vol_u[lo:hi, None] * vol_v[None, :]
        s = np.sqrt(csq_u[lo:hi, None] + csq_v[None, :])
        idx = np.clip(((s - smin) * scale).astype(np.int64), 0, nbins - 1)
        hist += np.bincount(idx.ravel(), weights=w.ravel(), minlength=nbins)
    return hist
