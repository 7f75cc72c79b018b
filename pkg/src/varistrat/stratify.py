"""Quantitative stratification labeling, content estimators, the iterated
covering construction with mass-drop certificates, and weak-Lp tail curves."""

import math
from dataclasses import dataclass

import numpy as np

from .measure import unit_ball_volume

# Symmetry-proxy threshold, calibrated once on the flat/cone testbeds and
# frozen: flat patches and smooth points score below eps/2 in both pinch and
# spine, while cone vertices and creases score above 2*eps.
DEFAULT_SYMMETRY_EPS = 0.05

__all__ = [
    "DEFAULT_SYMMETRY_EPS", "dyadic_scales_in", "stratum_label", "StratLabel",
    "stratify_samples", "tube_volume", "content_estimates", "ContentEstimates",
    "CoveringLevel", "CoveringTree", "construct_covering", "decompose_groups",
    "group_property_violations", "weak_lp_curve", "WeakLpCurve", "fit_loglog",
]


def dyadic_scales_in(r, upper=1.0):
    """Dyadic radii 2**-a with r <= 2**-a < upper, decreasing."""
    if not 0 < r < upper:
        raise ValueError("need 0 < r < upper")
    alpha = math.floor(-math.log2(upper)) + 1
    out = []
    while 2.0 ** -alpha >= r:
        if 2.0 ** -alpha < upper:
            out.append(2.0 ** -alpha)
        alpha += 1
    return out


def adaptive_h(s, h=None):
    """Per-scale quadrature resolution: cells a fixed fraction of the scale.

    Flat simplicial geometry is exact, so refining to s/48 at query time
    keeps the relative quadrature error of pinch and spine scores uniform
    over scales at bounded cost per query.
    """
    return s / 48.0 if h is None else min(h, s / 48.0)


def smallest_symmetric_scale(v, x, eps, r, k, h=None):
    """Smallest dyadic s in [r, 1) whose ball at x passes the k-symmetry
    proxy, or None if none does."""
    found = None
    for s in dyadic_scales_in(r):
        if v.symmetry_test(x, s, k, eps, adaptive_h(s, h)):
            found = s
    return found


def stratum_label(v, x, eps, r, k, h=None):
    """True iff no dyadic scale in [r, 1) carries a (k+1)-symmetric ball at x."""
    return smallest_symmetric_scale(v, x, eps, r, k + 1, h) is None


@dataclass
class StratLabel:
    """Per-sample stratum membership: smallest symmetric scale for each k."""

    point: np.ndarray
    symmetric_scale: dict  # k -> smallest dyadic scale with a (k+1,eps) ball

    def labeled(self, k):
        return self.symmetric_scale[k] is None


def stratify_samples(v, samples, eps, r, h=None, kmax=None):
    """Stratum labels for all k in [0, m-1]; membership is nested in k."""
    kmax = v.m - 1 if kmax is None else kmax
    out = []
    for x in np.atleast_2d(np.asarray(samples, dtype=np.float64)):
        scales = {k: smallest_symmetric_scale(v, x, eps, r, k + 1, h)
                  for k in range(kmax + 1)}
        out.append(StratLabel(x, scales))
    return out


def tube_volume(points, r, box, n_mc=20000, seed=0):
    """Monte-Carlo volume of the r-tube around a finite set within a box.

    Returns (estimate, standard_error).  The box is (lo, hi) coordinate
    vectors; the generator is seeded for reproducibility.
    """
    if n_mc < 10**4:
        raise ValueError("need at least 1e4 Monte-Carlo samples")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lo, hi = (np.asarray(b, dtype=np.float64) for b in box)
    rng = np.random.default_rng(seed)
    vol_box = float(np.prod(hi - lo))
    hits = 0
    chunk = 200000
    done = 0
    r2 = r * r
    while done < n_mc:
        take = min(chunk, n_mc - done)
        q = rng.uniform(lo, hi, size=(take, len(lo)))
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        hits += int((d2 <= r2).sum())
        done += take
    p = hits / n_mc
    se = vol_box * math.sqrt(max(p * (1.0 - p), 0.0) / n_mc)
    return vol_box * p, se


@dataclass
class ContentEstimates:
    hausdorff: float
    minkowski: float
    packing: float
    cover_count: int
    packing_count: int
    tube_se: float


def content_estimates(points, k, r, n_mc=20000, seed=0, box=None):
    """Greedy k-dimensional content estimators at scale r.

    hausdorff: greedy ball-cover upper bound on the Hausdorff r-content;
    minkowski: (2r)^(k-n) * tube volume; packing: greedy disjoint-ball lower
    bound.  The standard ordering holds up to dimensional factors.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[1]
    omega = unit_ball_volume(k)
    # greedy cover by sets of diameter at most 2r, each charged its actual
    # half-diameter: tight clusters cost much less than their box count
    alive = np.ones(len(points), dtype=bool)
    order = np.lexsort(points.T[::-1])
    cover = 0
    cover_sum = 0.0
    for i in order:
        if not alive[i]:
            continue
        d2 = ((points - points[i]) ** 2).sum(axis=1)
        cand = alive & (d2 <= 4.0 * r * r)
        sub = points[cand]
        pair = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=2)
        diam = math.sqrt(float(pair.max()))
        if diam > 2.0 * r:
            cand = alive & (d2 <= r * r)
            sub = points[cand]
            pair = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=2)
            diam = math.sqrt(float(pair.max()))
        cover += 1
        cover_sum += omega * (diam / 2.0) ** k
        alive[cand] = False
    # greedy packing (disjoint balls of radius r centered on the set)
    centers = []
    for i in order:
        p = points[i]
        if all(((p - c) ** 2).sum() > 4 * r * r for c in centers):
            centers.append(p)
    if box is None:
        lo = points.min(axis=0) - 2 * r
        hi = points.max(axis=0) + 2 * r
        box = (lo, hi)
    tube, se = tube_volume(points, r, box, n_mc, seed)
    return ContentEstimates(
        hausdorff=cover_sum,
        minkowski=(2.0 * r) ** (k - n) * tube,
        packing=omega * r**k * len(centers),
        cover_count=cover,
        packing_count=len(centers),
        tube_se=se,
    )


# ---------------------------------------------------------------------------
# covering construction
# ---------------------------------------------------------------------------


@dataclass
class CoveringLevel:
    """One outer round: floor-scale balls, larger mass-drop balls, and the
    per-ball certificates sup theta_{r_i} <= E - eta."""

    round_index: int
    density_bound: float
    u_r_centers: np.ndarray
    u_r_radius: float
    u_plus_centers: np.ndarray
    u_plus_radii: np.ndarray
    certificates: list  # (sampled sup, bound, ok)


@dataclass
class CoveringTree:
    levels: list
    floor_radius: float
    k: int
    eta: float
    covered_all_samples: bool
    rounds: int

    def u_r_count(self):
        return sum(len(lv.u_r_centers) for lv in self.levels)

    def packing_sum(self):
        return float(sum((lv.u_plus_radii ** self.k).sum() for lv in self.levels))

    def certificates_ok(self):
        return all(ok for lv in self.levels for (_, _, ok) in lv.certificates)


def _vitali_select(points, separation):
    """Greedy maximal subset with pairwise distance >= separation, in a fixed
    (lexicographic) order for determinism."""
    points = np.atleast_2d(points)
    order = np.lexsort(points.T[::-1])
    chosen = []
    for i in order:
        p = points[i]
        if all(((p - points[j]) ** 2).sum() >= separation * separation
               for j in chosen):
            chosen.append(i)
    return np.array(chosen, dtype=np.int64)


def construct_covering(v, samples, k, eps, eta, r, h=None, max_rounds=64):
    """Iterated covering of the k-stratum samples by floor-radius balls plus
    larger balls carrying a definite density drop.

    Round 0 covers the unit ball; each ball of a round either has mass scale
    at the floor (enters the floor cover) or gets a certified density drop of
    eta and is re-covered in the next round.  Terminates within about
    sup(theta)/eta rounds; every labeled sample stays covered throughout.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    labels = stratify_samples(v, samples, eps, r, h, kmax=k)
    stratum = samples[[lab.labeled(k) for lab in labels]]
    levels = []
    if len(stratum) == 0:
        return CoveringTree(levels, r, k, eta, True, 0)

    def theta(y, t):
        return v.density(y, t, adaptive_h(t, h))

    active = [(None, 1.0, None)]  # (center or None for the unit ball, radius)
    covered_flags = np.zeros(len(stratum), dtype=bool)
    rounds = 0
    for round_index in range(max_rounds):
        if not active:
            break
        rounds += 1
        next_active = []
        ur_centers_round = []
        uplus_centers = []
        uplus_radii = []
        certs = []
        density_bound = 0.0
        for center, radius, _ in active:
            if center is None:
                inside = np.ones(len(stratum), dtype=bool)
            else:
                inside = ((stratum - center) ** 2).sum(axis=1) <= radius * radius
            pts = stratum[inside]
            if len(pts) == 0:
                continue
            bound = max(theta(y, radius) for y in pts)
            density_bound = max(density_bound, bound)
            # mass scale per sample: smallest dyadic t in [r, radius] such
            # that the sampled sup of theta_{eta s} stays above bound - eta
            # for every dyadic s in [t, radius]
            if radius <= r * (1.0 + 1e-9):
                scales = [r]
            else:
                scales = sorted(set([r] + dyadic_scales_in(r, radius)),
                                reverse=True)
            theta_small = np.array(
                [[theta(z, max(eta * s, 1e-9)) for s in scales] for z in pts])
            mass_scale = np.full(len(pts), radius)
            for i, y in enumerate(pts):
                sy = radius
                d2 = ((pts - y) ** 2).sum(axis=1)
                for si, s in enumerate(scales):
                    sup = theta_small[d2 <= s * s, si].max()
                    if sup >= bound - eta:
                        sy = s
                    else:
                        break
                mass_scale[i] = sy
            at_floor = mass_scale <= r * (1.0 + 1e-9)
            floor_pts = pts[at_floor]
            if len(floor_pts):
                keep = _vitali_select(floor_pts, r / 4.0)
                ur_centers_round.extend(floor_pts[keep])
            rest = pts[~at_floor]
            rest_scales = mass_scale[~at_floor]
            if len(rest):
                order = np.lexsort(np.vstack([rest.T[::-1], -rest_scales]))
                chosen = []
                for i in order:
                    ri = rest_scales[i] / 2.0
                    if all(((rest[i] - rest[j]) ** 2).sum() >= ((rest_scales[i] + rest_scales[j]) / 10.0) ** 2
                           for j in chosen):
                        chosen.append(i)
                for i in chosen:
                    ri = rest_scales[i] / 2.0
                    ball_pts = pts[((pts - rest[i]) ** 2).sum(axis=1) <= ri * ri]
                    sup = max(theta(z, ri) for z in ball_pts) if len(ball_pts) else 0.0
                    ok = sup <= bound - eta + 1e-9
                    certs.append((float(sup), float(bound - eta), bool(ok)))
                    uplus_centers.append(rest[i])
                    uplus_radii.append(ri)
                    if ri > r * (1.0 + 1e-9):
                        next_active.append((rest[i], ri, None))
        ur = np.array(ur_centers_round).reshape(-1, samples.shape[1])
        up = np.array(uplus_centers).reshape(-1, samples.shape[1])
        upr = np.array(uplus_radii)
        levels.append(CoveringLevel(round_index, density_bound, ur, r, up, upr, certs))
        active = next_active
    # soundness: every stratum sample inside some floor or drop ball
    for i, y in enumerate(stratum):
        ok = False
        for lv in levels:
            if len(lv.u_r_centers) and \
                    ((lv.u_r_centers - y) ** 2).sum(axis=1).min() <= r * r:
                ok = True
            elif len(lv.u_plus_centers):
                d2 = ((lv.u_plus_centers - y) ** 2).sum(axis=1)
                ok = bool((d2 <= lv.u_plus_radii ** 2).any())
            if ok:
                break
        covered_flags[i] = ok
    return CoveringTree(levels, r, k, eta, bool(covered_flags.all()), rounds)


def decompose_groups(centers, radii, big_factor=5.0):
    """Partition balls so that, within a group, a center landing inside the
    big_factor-enlargement of another ball has radius smaller by
    big_factor**-2.  Greedy, radius-descending; the group count is bounded
    by a packing constant of the enlargement factor."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    order = np.lexsort(np.vstack([centers.T[::-1], -radii]))
    groups = []
    for i in order:
        placed = False
        for g in groups:
            if not any(_group_conflict(centers[i], radii[i], centers[j], radii[j],
                                       big_factor) for j in g):
                g.append(int(i))
                placed = True
                break
        if not placed:
            groups.append([int(i)])
    return groups


def _group_conflict(xi, ri, xj, rj, big):
    d2 = float(((xi - xj) ** 2).sum())
    if d2 <= (big * rj) ** 2 and ri >= rj / big**2:
        return True
    if d2 <= (big * ri) ** 2 and rj >= ri / big**2:
        return True
    return False


def group_property_violations(centers, radii, groups, big_factor=5.0):
    """Exhaustive check of the group property; returns violating pairs."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    bad = []
    for g in groups:
        for a in g:
            for b in g:
                if a == b:
                    continue
                d2 = float(((centers[a] - centers[b]) ** 2).sum())
                if d2 <= (big_factor * radii[a]) ** 2 and \
                        radii[b] >= radii[a] / big_factor**2:
                    bad.append((a, b))
    return bad


# ---------------------------------------------------------------------------
# weak-Lp tails
# ---------------------------------------------------------------------------


def fit_loglog(x, y):
    """Least-squares slope of log y against log x, with R^2."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass
class WeakLpCurve:
    radii: np.ndarray
    masses: np.ndarray
    slope: float
    r2: float


def weak_lp_curve(v, radii, quantity="regularity_scale"):
    """Mass of the sublevel set {quantity threshold exceeded at scale r}.

    For the cone testbeds this is a vertex ball in closed/histogram form; a
    flat mesh has empty sublevel sets; other varifolds are unsupported.
    """
    from . import simons as _simons
    radii = np.asarray(radii, dtype=np.float64)
    if quantity not in ("regularity_scale", "curvature"):
        raise ValueError("quantity must be 'regularity_scale' or 'curvature'")
    if isinstance(v, (_simons.SimonsCone, _simons.SimonsConeMesh)):
        if isinstance(v, _simons.SimonsCone):
            def sub(rho):
                return _simons.small_regularity_mass(rho) if \
                    quantity == "regularity_scale" else \
                    _simons.vertex_ball_mass(min(1.0, _simons.SQRT6 * rho))
        else:
            def sub(rho):
                return v.regularity_sublevel_mass(rho) if \
                    quantity == "regularity_scale" else \
                    v.mass(np.zeros(8), min(1.0, _simons.SQRT6 * rho))
        masses = np.array([sub(r) for r in radii])
        valid = masses > 0
        slope, _, r2 = fit_loglog(radii[valid], masses[valid]) if valid.sum() >= 2 \
            else (float("nan"), 0.0, 0.0)
        return WeakLpCurve(radii, masses, slope, r2)
    projs = getattr(v, "normal_projectors", None)
    if projs is not None:
        p = v.normal_projectors()
        if np.max(np.abs(p - p[0])) < 1e-9:
            # flat: |A| = 0, the regularity scale is capped at 1 everywhere
            return WeakLpCurve(radii, np.zeros_like(radii), float("nan"), 0.0)
    raise ValueError("unsupported varifold kind for weak-Lp curves")
