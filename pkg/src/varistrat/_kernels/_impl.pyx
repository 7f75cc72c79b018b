# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: small-matrix Jacobi eigensolve, batched plane-fit
displacement, simplex-vs-ball clipping quadrature, product-cone histogram.

Must stay numerically interchangeable with ``fallback.py``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY
from libc.stdlib cimport free, malloc

cnp.import_array()

IS_COMPILED = True

DEF MAXN = 16        # max ambient dimension for the eigensolver
DEF MAXV = 9         # max vertices per simplex (m + 1, m <= 8)
DEF STACKCAP = 4096
DEF MAXDEPTH = 200


cdef int _jacobi(double* a, double* v, int n) noexcept nogil:
    """In-place cyclic Jacobi on a (row-major n*n); v receives eigenvectors."""
    cdef int i, j, p, q, sweep
    cdef double off, scale, apq, theta, t, c, s, rp, rq
    for i in range(n):
        for j in range(n):
            v[i * n + j] = 1.0 if i == j else 0.0
    scale = 0.0
    for i in range(n * n):
        if fabs(a[i]) > scale:
            scale = fabs(a[i])
    if scale == 0.0:
        scale = 1.0
    for sweep in range(64):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(a[p * n + q]) > off:
                    off = fabs(a[p * n + q])
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p * n + q]
                if fabs(apq) <= 1e-300:
                    continue
                theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    rp = a[i * n + p]
                    rq = a[i * n + q]
                    a[i * n + p] = c * rp - s * rq
                    a[i * n + q] = s * rp + c * rq
                for i in range(n):
                    rp = a[p * n + i]
                    rq = a[q * n + i]
                    a[p * n + i] = c * rp - s * rq
                    a[q * n + i] = s * rp + c * rq
                for i in range(n):
                    rp = v[i * n + p]
                    rq = v[i * n + q]
                    v[i * n + p] = c * rp - s * rq
                    v[i * n + q] = s * rp + c * rq
    return 0


def jacobi_eigh(mat):
    """Deterministic Jacobi eigen-decomposition (descending, rows, fixed signs)."""
    cdef cnp.ndarray[double, ndim=2] a = np.array(mat, dtype=np.float64, order="C")
    cdef int n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("square matrix required")
    if n > MAXN:
        raise ValueError("jacobi_eigh supports n <= 16")
    cdef double work[MAXN * MAXN]
    cdef double vecs[MAXN * MAXN]
    cdef int i, j
    for i in range(n):
        for j in range(n):
            work[i * n + j] = a[i, j]
    _jacobi(work, vecs, n)
    evals = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] ev = evals
    for i in range(n):
        ev[i] = work[i * n + i]
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    vout = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2] vo = vout
    cdef cnp.ndarray[long, ndim=1] orda = order.astype(np.int64)
    for i in range(n):
        for j in range(n):
            vo[i, j] = vecs[j * n + orda[i]]
    for i in range(n):
        for j in range(n):
            if fabs(vout[i, j]) > 1e-12:
                if vout[i, j] < 0:
                    vout[i] = -vout[i]
                break
    return evals, vout


def smallest_eigenvalue_sum(mat, count):
    evals, _ = jacobi_eigh(mat)
    if count <= 0:
        return 0.0
    return float(np.sum(evals[len(evals) - count:]))


def displacement_many(points, weights, centers, double radius, int k, double gate):
    """Batched displacement values; see fallback.displacement_many."""
    cdef cnp.ndarray[double, ndim=2] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] cen = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t npts = pts.shape[0], ncen = cen.shape[0]
    cdef int n = pts.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(ncen)
    if npts == 0 or ncen == 0:
        return out
    if n > MAXN:
        raise ValueError("ambient dimension too large for compiled kernel")
    cdef double threshold = gate * radius**k
    cdef double r2 = radius * radius, norm = radius**(k + 2)
    cdef double mass, d2, diff, val
    cdef double cm[MAXN]
    cdef double sec[MAXN * MAXN]
    cdef double vecs[MAXN * MAXN]
    cdef double dv[MAXN]
    cdef Py_ssize_t ci, i
    cdef int a, b, nk = n - k
    cdef double* evsort
    with nogil:
        for ci in range(ncen):
            mass = 0.0
            for a in range(n):
                cm[a] = 0.0
            for i in range(npts):
                d2 = 0.0
                for a in range(n):
                    diff = pts[i, a] - cen[ci, a]
                    d2 += diff * diff
                if d2 <= r2:
                    mass += w[i]
                    for a in range(n):
                        cm[a] += w[i] * pts[i, a]
            if mass < threshold or mass <= 0.0:
                continue
            for a in range(n):
                cm[a] /= mass
            for a in range(n * n):
                sec[a] = 0.0
            for i in range(npts):
                d2 = 0.0
                for a in range(n):
                    dv[a] = pts[i, a] - cen[ci, a]
                    d2 += dv[a] * dv[a]
                if d2 <= r2:
                    for a in range(n):
                        dv[a] = pts[i, a] - cm[a]
                    for a in range(n):
                        for b in range(n):
                            sec[a * n + b] += w[i] * dv[a] * dv[b]
            _jacobi(sec, vecs, n)
            # insertion sort of the n diagonal entries, ascending
            for a in range(n):
                dv[a] = sec[a * n + a]
            for a in range(1, n):
                val = dv[a]
                b = a - 1
                while b >= 0 and dv[b] > val:
                    dv[b + 1] = dv[b]
                    b -= 1
                dv[b + 1] = val
            val = 0.0
            for a in range(nk):
                val += dv[a]
            if val < 0.0:
                val = 0.0
            out[ci] = val / norm
    return out


def min_pairwise_distance(points):
    cdef cnp.ndarray[double, ndim=2] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t npts = pts.shape[0]
    cdef int n = pts.shape[1]
    cdef Py_ssize_t i, j
    cdef int a
    cdef double best = INFINITY, d2, diff
    if npts < 2:
        return np.inf
    with nogil:
        for i in range(npts - 1):
            for j in range(i + 1, npts):
                d2 = 0.0
                for a in range(n):
                    diff = pts[i, a] - pts[j, a]
                    d2 += diff * diff
                if d2 < best:
                    best = d2
    return float(sqrt(best))


cdef struct ClipTotals:
    double mass
    double defect
    double moment_mass
    double moment[MAXN * MAXN]


cdef int _clip_one(double* v0, double vol0, int nv, int n, double* center,
                   double rlo, double rhi, double h, int mode, int m,
                   double* proj, ClipTotals* tot) noexcept nogil:
    """Clip one simplex against the annulus {rlo < d <= rhi}.

    mode 0: mass only; mode 1: defect integrand |P n_x|^2 d^-m;
    mode 2: projector moment + mass.  Explicit-stack longest-edge bisection.
    """
    cdef double* stack = <double*> malloc(STACKCAP * (MAXV * MAXN + 1) * sizeof(double))
    cdef int* depths = <int*> malloc(STACKCAP * sizeof(int))
    cdef int top = 0, depth, i, j, a, ei, ej, inside_ok
    cdef double vol, d2, diff, dmin, dmax, diam2, diam, best, dc, val, q
    cdef double c[MAXN]
    cdef double nx[MAXN]
    cdef int rec = MAXV * MAXN + 1
    if stack == NULL or depths == NULL:
        if stack != NULL:
            free(stack)
        if depths != NULL:
            free(depths)
        return -1
    for i in range(nv):
        for a in range(n):
            stack[i * n + a] = v0[i * n + a]
    stack[rec - 1] = vol0
    depths[0] = 0
    top = 1
    while top > 0:
        top -= 1
        depth = depths[top]
        vol = stack[top * rec + rec - 1]
        # distances of vertices to center
        dmin = INFINITY
        dmax = 0.0
        for i in range(nv):
            d2 = 0.0
            for a in range(n):
                diff = stack[top * rec + i * n + a] - center[a]
                d2 += diff * diff
            d2 = sqrt(d2)
            if d2 < dmin:
                dmin = d2
            if d2 > dmax:
                dmax = d2
        # longest edge
        best = -1.0
        ei = 0
        ej = 1
        for i in range(nv - 1):
            for j in range(i + 1, nv):
                d2 = 0.0
                for a in range(n):
                    diff = stack[top * rec + i * n + a] - stack[top * rec + j * n + a]
                    d2 += diff * diff
                if d2 > best:
                    best = d2
                    ei = i
                    ej = j
        diam = sqrt(best)
        if dmin - diam > rhi or (rlo > 0.0 and dmax <= rlo):
            continue
        if diam <= h or depth >= MAXDEPTH:
            for a in range(n):
                c[a] = 0.0
            for i in range(nv):
                for a in range(n):
                    c[a] += stack[top * rec + i * n + a]
            d2 = 0.0
            for a in range(n):
                c[a] /= nv
                diff = c[a] - center[a]
                d2 += diff * diff
            dc = sqrt(d2)
            if dc > rlo and dc <= rhi:
                if mode == 0:
                    tot.mass += vol
                elif mode == 1:
                    if dc > 0.0:
                        for a in range(n):
                            nx[a] = (c[a] - center[a]) / dc
                        val = 0.0
                        for i in range(n):
                            q = 0.0
                            for a in range(n):
                                q += proj[i * n + a] * nx[a]
                            val += nx[i] * q
                        tot.defect += vol * val * dc**(-m)
                else:
                    tot.moment_mass += vol
                    for a in range(n * n):
                        tot.moment[a] += vol * proj[a]
            continue
        if mode == 0 and dmax <= rhi and (rlo <= 0.0 or dmin - diam > rlo):
            tot.mass += vol
            continue
        if top + 2 > STACKCAP:
            # degenerate refinement pressure: fall back to centroid rule
            for a in range(n):
                c[a] = 0.0
            for i in range(nv):
                for a in range(n):
                    c[a] += stack[top * rec + i * n + a]
            d2 = 0.0
            for a in range(n):
                c[a] /= nv
                diff = c[a] - center[a]
                d2 += diff * diff
            dc = sqrt(d2)
            if dc > rlo and dc <= rhi and mode == 0:
                tot.mass += vol
            continue
        # child B at slot top+1 first (copy), child A in place at slot top
        for i in range(nv):
            for a in range(n):
                stack[(top + 1) * rec + i * n + a] = stack[top * rec + i * n + a]
        for a in range(n):
            c[a] = 0.5 * (stack[top * rec + ei * n + a] + stack[top * rec + ej * n + a])
        for a in range(n):
            stack[top * rec + ej * n + a] = c[a]
            stack[(top + 1) * rec + ei * n + a] = c[a]
        stack[top * rec + rec - 1] = 0.5 * vol
        stack[(top + 1) * rec + rec - 1] = 0.5 * vol
        depths[top] = depth + 1
        depths[top + 1] = depth + 1
        top += 2
    free(stack)
    free(depths)
    return 0


def simplex_ball_mass(verts, vols, mults, center, double radius, double h):
    cdef cnp.ndarray[double, ndim=3] v = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vol = np.ascontiguousarray(vols, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] mu = np.ascontiguousarray(mults, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cen = np.ascontiguousarray(center, dtype=np.float64)
    cdef int ns = v.shape[0], nv = v.shape[1], n = v.shape[2]
    cdef Py_ssize_t s
    cdef double total = 0.0
    cdef ClipTotals tot
    if nv > MAXV or n > MAXN:
        raise ValueError("simplex too large for compiled kernel")
    with nogil:
        for s in range(ns):
            tot.mass = 0.0
            _clip_one(&v[s, 0, 0], vol[s], nv, n, &cen[0], 0.0, radius, h, 0, 0, NULL, &tot)
            total += mu[s] * tot.mass
    return float(total)


def annulus_normal_defect(verts, vols, mults, projs, center, double rlo, double rhi,
                          double h, int m):
    cdef cnp.ndarray[double, ndim=3] v = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vol = np.ascontiguousarray(vols, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] mu = np.ascontiguousarray(mults, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] pr = np.ascontiguousarray(projs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cen = np.ascontiguousarray(center, dtype=np.float64)
    cdef int ns = v.shape[0], nv = v.shape[1], n = v.shape[2]
    cdef Py_ssize_t s
    cdef double total = 0.0
    cdef ClipTotals tot
    if nv > MAXV or n > MAXN:
        raise ValueError("simplex too large for compiled kernel")
    with nogil:
        for s in range(ns):
            tot.defect = 0.0
            _clip_one(&v[s, 0, 0], vol[s], nv, n, &cen[0], rlo, rhi, h, 1, m,
                      &pr[s, 0, 0], &tot)
            total += mu[s] * tot.defect
    return float(total)


def annulus_normal_moment(verts, vols, mults, projs, center, double rlo, double rhi,
                          double h):
    cdef cnp.ndarray[double, ndim=3] v = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vol = np.ascontiguousarray(vols, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] mu = np.ascontiguousarray(mults, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] pr = np.ascontiguousarray(projs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cen = np.ascontiguousarray(center, dtype=np.float64)
    cdef int ns = v.shape[0], nv = v.shape[1], n = v.shape[2]
    cdef Py_ssize_t s
    cdef int a
    cdef double mass = 0.0
    cdef ClipTotals tot
    if nv > MAXV or n > MAXN:
        raise ValueError("simplex too large for compiled kernel")
    out = np.zeros((n, n))
    cdef cnp.ndarray[double, ndim=2] om = out
    with nogil:
        for s in range(ns):
            tot.moment_mass = 0.0
            for a in range(n * n):
                tot.moment[a] = 0.0
            _clip_one(&v[s, 0, 0], vol[s], nv, n, &cen[0], rlo, rhi, h, 2, 0,
                      &pr[s, 0, 0], &tot)
            mass += mu[s] * tot.moment_mass
            for a in range(n * n):
                om[a // n, a % n] += mu[s] * tot.moment[a]
    return out, float(mass)


def cone_pair_histogram(dist_u, vol_u, csq_u, dist_v, vol_v, csq_v,
                        double smin, double smax, int nbins):
    cdef cnp.ndarray[double, ndim=1] du = np.ascontiguousarray(dist_u, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vu = np.ascontiguousarray(vol_u, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cu = np.ascontiguousarray(csq_u, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] dv = np.ascontiguousarray(dist_v, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] vv = np.ascontiguousarray(vol_v, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cv = np.ascontiguousarray(csq_v, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hist = np.zeros(nbins)
    cdef Py_ssize_t i, j, nu = du.shape[0], nv2 = dv.shape[0]
    cdef double scale = nbins / (smax - smin)
    cdef double du2, w, s
    cdef long idx
    with nogil:
        for i in range(nu):
            du2 = du[i] * du[i]
            for j in range(nv2):
                w = sqrt(du2 + dv[j] * dv[j]) * vu[i] * vv[j]
                s = sqrt(cu[i] + cv[j])
                idx = <long>((s - smin) * scale)
                if idx < 0:
                    idx = 0
                elif idx >= nbins:
                    idx = nbins - 1
                hist[idx] += w
    return hist
