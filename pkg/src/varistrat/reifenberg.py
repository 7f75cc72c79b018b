"""Executable discrete-Reifenberg pipeline: the multiscale flatness
hypothesis check, partition-of-unity projection maps, the graph squash step,
the iterative manifold construction with good/bad/final bookkeeping and its
volume ledger, packing verdicts, and best-plane drift checks."""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import measure as _measure
from .geom import AffineSubspace, LinearSubspace, hausdorff_distance, orthonormalize
from .measure import WeightedPointMeasure, best_plane, default_gate, \
    displacement, dini_sum, unit_ball_volume

PACKING_CEILING_FACTOR = 40.0  # per-ball density budget 40^k * omega_k


class HypothesisError(ValueError):
    """The multiscale flatness hypothesis failed where it was required."""


@dataclass
class BallSystem:
    """Disjoint closed balls {B_{r_s}(x_s)}; carries the induced atomic
    measure sum omega_k r_s^k delta_{x_s}."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.radii = np.asarray(self.radii, dtype=np.float64)
        if self.radii.shape != (len(self.centers),):
            raise ValueError("one radius per center required")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        d2 = ((self.centers[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        rsum = self.radii[:, None] + self.radii[None, :]
        np.fill_diagonal(d2, np.inf)
        if np.any(d2 < (rsum * (1.0 - 1e-12)) ** 2):
            raise ValueError("balls are not pairwise disjoint")

    @property
    def ambient_dim(self):
        return self.centers.shape[1]

    def induced_measure(self, k):
        return WeightedPointMeasure(self.centers,
                                    unit_ball_volume(k) * self.radii**k)

    def packing_sum(self, k):
        return float((self.radii**k).sum())

    def to_json(self, path=None):
        doc = {"dim": self.ambient_dim,
               "balls": [[list(map(float, c)), float(r)]
                         for c, r in zip(self.centers, self.radii)]}
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh)
        return doc

    @classmethod
    def from_json(cls, source):
        if isinstance(source, (str, bytes)):
            with open(source) as fh:
                doc = json.load(fh)
        else:
            doc = source
        balls = doc["balls"]
        centers = np.array([b[0] for b in balls], dtype=np.float64)
        radii = np.array([b[1] for b in balls], dtype=np.float64)
        return cls(centers.reshape(len(balls), int(doc["dim"])), radii)


@dataclass
class HypothesisReport:
    rows: list           # (center, radius, mass, dini value)
    delta: float
    worst: float
    passed: bool

    def worst_row(self):
        return max(self.rows, key=lambda row: row[3]) if self.rows else None


def check_hypothesis(system, k, delta, gate=None, scale_floor=None,
                     max_centers_per_scale=64):
    """Evaluate the multiscale flatness sums over a dyadic net of balls.

    For every net ball B_t(x) centered at an atom with mass >= gate * t^k,
    the normalized sum over dyadic scales below t/2 of the ball-integrated
    displacement must stay below delta**2.  Ball centers are subsampled with
    a deterministic stride when the system is large (a sampled net, like the
    other suprema in this package).
    """
    mu = system.induced_measure(k) if isinstance(system, BallSystem) else system
    if gate is None:
        gate = default_gate(k)
    if scale_floor is None:
        scale_floor = max(mu.min_atom_gap() / 2.0, 1e-9)
    stride = max(1, mu.size // max_centers_per_scale)
    rows = []
    t = 1.0
    scales = []
    while t >= scale_floor:
        scales.append(t)
        t /= 2.0
    for t in scales:
        for x in mu.points[::stride]:
            if mu.mass_in_ball(x, t) >= gate * t**k:
                val = dini_sum(mu, x, t, k, gate)
                rows.append((x.copy(), t, mu.mass_in_ball(x, t), val))
    worst = max((row[3] for row in rows), default=0.0)
    return HypothesisReport(rows, delta, worst, bool(worst < delta**2))


# ---------------------------------------------------------------------------
# partition-of-unity projection maps
# ---------------------------------------------------------------------------


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_prime(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


class SigmaMap:
    """Smooth interpolation between the identity and affine projections onto
    per-center planes: sigma(x) = x + sum_i lambda_i(x) P_i^perp (p_i - x).

    Centers must be r/5-separated and anchors within 10r of their centers;
    bump i is supported in B_{3r}(x_i), the lambdas sum to 1 on the union of
    the B_{2r}(x_i), and sigma is exactly the identity outside the supports.
    """

    def __init__(self, centers, anchors, planes, r):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        self.anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
        self.r = float(r)
        if len(self.centers) != len(self.anchors):
            raise ValueError("one anchor per center required")
        frames = []
        for pl in planes:
            frames.append(pl.frame if isinstance(pl, LinearSubspace)
                          else pl.direction.frame if isinstance(pl, AffineSubspace)
                          else orthonormalize(pl))
        self.normal_projectors = np.array(
            [np.eye(self.centers.shape[1]) - f.T @ f for f in frames])
        d2 = ((self.centers[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if len(self.centers) > 1 and d2.min() < (self.r / 5.0) ** 2 * (1 - 1e-12):
            raise ValueError("centers are not r/5-separated")
        gap = np.sqrt(((self.anchors - self.centers) ** 2).sum(axis=1))
        if np.any(gap > 10.0 * self.r * (1 + 1e-12)):
            raise ValueError("anchors must lie within 10r of their centers")

    def partition(self, points):
        """(lambdas, psi): bump weights per center and the identity weight."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = np.sqrt(((points[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2))
        raw = _smoothstep((3.0 * self.r - d) / self.r)
        denom = np.maximum(raw.sum(axis=1), 1.0)
        lam = raw / denom[:, None]
        return lam, 1.0 - lam.sum(axis=1)

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = points.copy()
        # bump supports are 3r-balls: work chunked and per-center sparse
        chunk = max(1, int(2e6) // max(len(self.centers), 1))
        for lo in range(0, len(points), chunk):
            pts = points[lo:lo + chunk]
            d = np.sqrt(((pts[:, None, :] - self.centers[None, :, :]) ** 2)
                        .sum(axis=2))
            raw = _smoothstep((3.0 * self.r - d) / self.r)
            denom = np.maximum(raw.sum(axis=1), 1.0)
            for i in range(len(self.centers)):
                touched = np.nonzero(raw[:, i] > 0.0)[0]
                if touched.size == 0:
                    continue
                lam = raw[touched, i] / denom[touched]
                pull = (self.anchors[i] - pts[touched]) @ self.normal_projectors[i].T
                out[lo + touched] += lam[:, None] * pull
        return out

    def jacobian(self, x):
        """Analytic derivative of sigma at one point."""
        x = np.asarray(x, dtype=np.float64)
        n = len(x)
        diff = x - self.centers
        d = np.sqrt((diff ** 2).sum(axis=1))
        t = (3.0 * self.r - d) / self.r
        raw = _smoothstep(t)
        draw = np.zeros((len(self.centers), n))
        nz = d > 1e-300
        draw[nz] = (-_smoothstep_prime(t[nz]) / self.r)[:, None] * \
            (diff[nz] / d[nz, None])
        total = raw.sum()
        jac = np.eye(n)
        if total <= 0.0:
            return jac
        if total > 1.0:
            dlam = draw / total - raw[:, None] * draw.sum(axis=0)[None, :] / total**2
            lam = raw / total
        else:
            dlam = draw
            lam = raw
        for i in range(len(self.centers)):
            pull = self.normal_projectors[i] @ (self.anchors[i] - x)
            jac += np.outer(pull, dlam[i]) - lam[i] * self.normal_projectors[i]
        return jac


# ---------------------------------------------------------------------------
# graph patches and the squash step
# ---------------------------------------------------------------------------


@dataclass
class GraphPatch:
    """Sampled graph of g: V -> V^perp over a coordinate grid on a k-plane."""

    base: np.ndarray            # point on the plane
    tangent: np.ndarray         # (k, n) orthonormal rows
    normal: np.ndarray          # (n-k, n) orthonormal rows
    axes: list                  # k coordinate arrays
    values: np.ndarray          # grid shape + (n-k,) graph coordinates

    @classmethod
    def flat(cls, base, tangent_frame, extent, resolution, n):
        tangent = orthonormalize(tangent_frame)
        k = tangent.shape[0]
        normal = LinearSubspace(tangent).orthogonal_complement().frame
        axes = [np.linspace(-extent, extent, resolution + 1) for _ in range(k)]
        shape = tuple(len(a) for a in axes) + (n - k,)
        return cls(np.asarray(base, dtype=np.float64), tangent, normal, axes,
                   np.zeros(shape))

    @property
    def k(self):
        return self.tangent.shape[0]

    def grid_coords(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def points(self):
        coords = self.grid_coords()
        vals = self.values.reshape(len(coords), -1)
        return self.base + coords @ self.tangent + vals @ self.normal

    def interpolate(self, coords):
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator(self.axes, self.values,
                                         bounds_error=False, fill_value=None)
        return interp(coords)

    def embed(self, coords):
        coords = np.atleast_2d(coords)
        vals = np.atleast_2d(self.interpolate(coords))
        return self.base + coords @ self.tangent + vals @ self.normal

    def sup_norm(self):
        return float(np.abs(self.values).max(initial=0.0))

    def lip_norm(self):
        grads = []
        for axis in range(self.k):
            step = self.axes[axis][1] - self.axes[axis][0]
            grads.append(np.diff(self.values, axis=axis) / step)
        return float(max((np.sqrt((g ** 2).sum(axis=-1)).max(initial=0.0))
                         for g in grads))

    def seminorm(self, scale):
        """scale^-1 sup |g| + Lip(g), the graph smallness measure."""
        return self.sup_norm() / scale + self.lip_norm()


def squash_step(patch: GraphPatch, sigma: SigmaMap, rho, damping=0.5,
                max_iter=80, tol=1e-12):
    """Push a graph through sigma and re-express it over the same plane.

    The tangential component of sigma restricted to the graph is inverted by
    a damped fixed-point iteration; the output is a new GraphPatch on the
    same grid plus distortion statistics (sampled bi-Lipschitz constant of
    sigma between the graph and its image, input/output seminorms).
    """
    coords = patch.grid_coords()
    source = patch.embed(coords)
    mapped = sigma(source)
    # invert the tangential part: find tau with tangent(sigma(graph(tau))) = c
    tau = coords.copy()
    converged = False
    for _ in range(max_iter):
        pts = patch.embed(tau)
        img = sigma(pts)
        tang = (img - patch.base) @ patch.tangent.T
        resid = coords - tang
        tau = tau + damping * resid
        err = float(np.abs(resid).max())
        if err < tol * max(sigma.r, 1e-12):
            converged = True
            break
    if not converged:
        raise HypothesisError("squash fixed-point iteration failed; the "
                              "plane/anchor hypotheses are likely violated")
    img = sigma(patch.embed(tau))
    new_vals = (img - patch.base) @ patch.normal.T
    out = GraphPatch(patch.base.copy(), patch.tangent.copy(),
                     patch.normal.copy(), [a.copy() for a in patch.axes],
                     new_vals.reshape(patch.values.shape))
    # sampled bi-Lipschitz distortion of sigma along grid edges of the graph
    shape = patch.values.shape[:-1]
    src_grid = source.reshape(shape + (source.shape[1],))
    img_grid = mapped.reshape(shape + (mapped.shape[1],))
    worst = 1.0
    for axis in range(patch.k):
        ds = np.sqrt((np.diff(src_grid, axis=axis) ** 2).sum(axis=-1))
        di = np.sqrt((np.diff(img_grid, axis=axis) ** 2).sum(axis=-1))
        ratio = di / np.maximum(ds, 1e-300)
        worst = max(worst, float(ratio.max()), float((1.0 / ratio).max()))
    stats = {
        "distortion": worst,
        "seminorm_in": patch.seminorm(sigma.r),
        "seminorm_out": out.seminorm(sigma.r),
        "rho": float(rho),
    }
    return out, stats


# ---------------------------------------------------------------------------
# the inductive construction
# ---------------------------------------------------------------------------


@dataclass
class LevelRecord:
    scale: float
    good: list      # (center, plane frame, anchor)
    bad: list       # centers
    final: list     # (center, radius)
    excess_atoms: np.ndarray
    excess_mass: float
    area_before: float
    area_after_holes: float
    hole_budget: float
    ledger_ok: bool
    distortion: float
    patch_seminorms: list
    patch_residuals: list


@dataclass
class ReifenbergTrace:
    levels: list
    k: int
    scale_ratio: float
    initial_area: float
    final_area: float
    completed: bool
    grid_points: np.ndarray = None
    grid_alive: np.ndarray = None

    def packing_sum(self):
        total = 0.0
        for lv in self.levels:
            total += len(lv.bad) * lv.scale**self.k
            total += sum(r**self.k for _, r in lv.final)
        return total

    def ledger_ok(self):
        return all(lv.ledger_ok for lv in self.levels)

    def to_json(self, path=None):
        doc = {"schema": 1, "k": self.k, "scale_ratio": self.scale_ratio,
               "initial_area": self.initial_area, "final_area": self.final_area,
               "completed": self.completed,
               "levels": [{
                   "scale": lv.scale,
                   "good": [[list(map(float, c)), list(map(float, p))]
                            for c, _, p in lv.good],
                   "bad": [list(map(float, c)) for c in lv.bad],
                   "final": [[list(map(float, c)), float(r)]
                             for c, r in lv.final],
                   "excess_mass": lv.excess_mass,
                   "area_before": lv.area_before,
                   "area_after_holes": lv.area_after_holes,
                   "hole_budget": lv.hole_budget,
                   "ledger_ok": lv.ledger_ok,
                   "distortion": lv.distortion,
                   "patch_seminorms": [float(s) for s in lv.patch_seminorms],
               } for lv in self.levels]}
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh, sort_keys=True)
        return doc

    def write_grid_csv(self, path):
        """Final approximating-manifold samples: coordinates plus a flag for
        points surviving the hole-cutting."""
        n = self.grid_points.shape[1]
        header = ",".join([f"x{i + 1}" for i in range(n)] + ["alive"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for p, a in zip(self.grid_points, self.grid_alive):
                fh.write(",".join(f"{v:.17g}" for v in p) + f",{int(a)}\n")


def _grid_on_plane(plane: AffineSubspace, extent, spacing):
    k = plane.dim
    cap = 4096 if k == 1 else 320
    count = min(max(int(math.ceil(2.0 * extent / spacing)), 4), cap)
    axis = np.linspace(-extent, extent, count + 1)
    if k == 1:
        coords = axis[:, None]
        shape = (len(axis),)
    elif k == 2:
        aa, bb = np.meshgrid(axis, axis, indexing="ij")
        coords = np.column_stack([aa.ravel(), bb.ravel()])
        shape = (len(axis), len(axis))
    else:
        raise ValueError("construction supports k in {1, 2}")
    return plane.base + coords @ plane.direction.frame, shape


def _masked_area(points, shape, alive):
    """Polyline length (k=1) or triangulated area (k=2) of the un-removed
    part of a grid-parametrized manifold."""
    if len(shape) == 1:
        seg_ok = alive[:-1] & alive[1:]
        seg = np.sqrt(((points[1:] - points[:-1]) ** 2).sum(axis=1))
        return float(seg[seg_ok].sum())
    nu, nv = shape
    pts = points.reshape(nu, nv, -1)
    ok = alive.reshape(nu, nv)
    a = pts[:-1, :-1]
    b = pts[1:, :-1]
    c = pts[:-1, 1:]
    d = pts[1:, 1:]
    cell_ok = ok[:-1, :-1] & ok[1:, :-1] & ok[:-1, 1:] & ok[1:, 1:]

    def tri_area(p, q, s):
        u = q - p
        v = s - p
        g11 = (u * u).sum(axis=-1)
        g22 = (v * v).sum(axis=-1)
        g12 = (u * v).sum(axis=-1)
        return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))

    area = tri_area(a, b, c) + tri_area(d, c, b)
    return float(area[cell_ok].sum())


def construct(system, center, radius, k, rho=0.25, depth=4, delta=0.2,
              gate=None, grid_spacing=None, check=True):
    """Run the inductive approximating-manifold construction.

    system: a BallSystem (its induced measure drives the fit; ball radii in
    [r_{i+1}, r_i) become final balls) or a bare WeightedPointMeasure.
    Levels walk r_i = radius * rho**i; at each level the support is covered by
    Vitali balls centered on the current manifold, split into good/bad by
    the mass gate, and the manifold is pushed through the partition-of-unity
    projection map of the good balls.  Records the volume ledger
    area(T_i' minus holes) + hole budget <= area(T_i') per level.
    """
    if gate is None:
        gate = default_gate(k)
    if isinstance(system, BallSystem):
        mu = system.induced_measure(k)
        final_radii = system.radii
    else:
        mu = system
        final_radii = None
    center = np.asarray(center, dtype=np.float64)
    if check:
        report = check_hypothesis(system, k, delta, gate)
        if not report.passed:
            raise HypothesisError(
                f"flatness hypothesis fails: worst {report.worst:.3e} "
                f">= delta^2 = {delta**2:.3e}")
    if mu.mass_in_ball(center, radius) < gate * radius**k:
        raise ValueError("the initial ball fails the mass gate")
    plane0, _ = best_plane(mu, center, radius, k)
    scales = [radius * rho**i for i in range(depth + 1)]
    if grid_spacing is None:
        grid_spacing = scales[-1] / 8.0
    pts, shape = _grid_on_plane(plane0, 1.5 * radius, grid_spacing)
    pts = pts.copy()
    alive = np.ones(len(pts), dtype=bool)
    removed_atoms = np.zeros(mu.size, dtype=bool)
    used_final = np.zeros(mu.size, dtype=bool) if final_radii is not None else None
    good = [(center.copy(), plane0, center.copy())]
    initial_area = _masked_area(pts, shape, alive)
    levels = []
    completed = True
    for i in range(depth):
        r_i, r_next = scales[i], scales[i + 1]
        # excess atoms: too far from the local best plane of their good ball
        excess_ids = []
        excess_budget_ok = True
        for (y, plane, _) in good:
            idx = mu.indices_in_ball(y, r_i)
            if idx.size == 0:
                continue
            dist = plane.distances(mu.points[idx])
            far = idx[dist > r_next / 11.0]
            excess_ids.extend(far.tolist())
        excess_ids = np.array(sorted(set(excess_ids)), dtype=np.int64)
        excess_mass = float(mu.weights[excess_ids].sum()) if excess_ids.size else 0.0
        removed_atoms[excess_ids] = True
        # final balls: input radii in [r_next, r_i)
        final_here = []
        if final_radii is not None:
            sel = np.nonzero((final_radii >= r_next) & (final_radii < r_i)
                             & ~used_final & ~removed_atoms)[0]
            for s in sel:
                final_here.append((mu.points[s].copy(), float(final_radii[s])))
                used_final[s] = True
                inside = mu.indices_in_ball(mu.points[s], final_radii[s])
                removed_atoms[inside] = True
        # cover the remaining support by Vitali balls centered on the manifold
        candidates = np.nonzero(~removed_atoms)[0]
        area_before = _masked_area(pts, shape, alive)
        centers_new = []
        if candidates.size:
            live_pts = pts[alive]
            proj = []
            for a in candidates:
                d2 = ((live_pts - mu.points[a]) ** 2).sum(axis=1)
                proj.append(live_pts[int(np.argmin(d2))])
            proj = np.array(proj)
            order = np.lexsort(proj.T[::-1])
            for idx_ in order:
                p = proj[idx_]
                if all(((p - q) ** 2).sum() >= (2.0 * r_next / 3.0) ** 2
                       for q in centers_new):
                    centers_new.append(p)
        good_next = []
        bad_next = []
        parent_planes = np.array([g[0] for g in good])
        for c in centers_new:
            if mu.mass_in_ball(c, r_next) >= gate * r_next**k:
                idx = mu.indices_in_ball(c, r_next)
                w = mu.weights[idx]
                anchor = (w[:, None] * mu.points[idx]).sum(axis=0) / w.sum()
                dec = _measure.moments(mu, c, r_next)
                if idx.size > k and dec.eigenvalues[k - 1] > 1e-8 * r_next**2:
                    plane = dec.plane(k)
                else:
                    # the ball does not effectively span k directions (for
                    # example a single atom): the best plane is direction-
                    # degenerate, so inherit the parent ball's direction
                    near = int(np.argmin(((parent_planes - c) ** 2).sum(axis=1)))
                    plane = AffineSubspace(anchor, good[near][1].direction)
                good_next.append((c, plane, anchor))
            else:
                bad_next.append(c)
                inside = mu.indices_in_ball(c, r_next)
                removed_atoms[inside] = True
        # cut holes for bad and final balls, then push through sigma
        for c in bad_next:
            alive &= ((pts - c) ** 2).sum(axis=1) > (r_next / 6.0) ** 2
        for (c, rs) in final_here:
            alive &= ((pts - c) ** 2).sum(axis=1) > (rs / 6.0) ** 2
        area_after_holes = _masked_area(pts, shape, alive)
        hole_budget = unit_ball_volume(k) * (
            len(bad_next) * (r_next / 10.0) ** k
            + sum((rs / 10.0) ** k for _, rs in final_here))
        ledger_ok = area_after_holes + hole_budget <= area_before * 1.05 + 1e-12
        distortion = 1.0
        seminorms = []
        residuals = []
        if good_next:
            sigma = SigmaMap([g[0] for g in good_next],
                             [g[2] for g in good_next],
                             [g[1].direction for g in good_next], r_next)
            before = pts.copy()
            pts = sigma(pts)
            move = np.sqrt(((pts - before) ** 2).sum(axis=1))
            if len(shape) == 1:
                seg_b = np.sqrt(((before[1:] - before[:-1]) ** 2).sum(axis=1))
                seg_a = np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(axis=1))
                ratios = seg_a / np.maximum(seg_b, 1e-300)
                distortion = float(max(ratios.max(), (1.0 / ratios).max()))
            else:
                rb = before.reshape(shape + (-1,))
                ra = pts.reshape(shape + (-1,))
                for axis in (0, 1):
                    seg_b = np.sqrt((np.diff(rb, axis=axis) ** 2).sum(axis=-1))
                    seg_a = np.sqrt((np.diff(ra, axis=axis) ** 2).sum(axis=-1))
                    ratios = seg_a / np.maximum(seg_b, 1e-300)
                    distortion = max(distortion, float(ratios.max()),
                                     float((1.0 / ratios).max()))
            # per-good-ball graph diagnostics over the new planes (sampled)
            for (c, plane, _) in good_next[:64]:
                sel = ((pts - c) ** 2).sum(axis=1) <= (1.5 * r_next) ** 2
                sel &= alive
                if sel.sum() < k + 2:
                    continue
                local = pts[sel]
                tcoords = (local - plane.base) @ plane.direction.frame.T
                ncoords = local - plane.base - tcoords @ plane.direction.frame
                sup = float(np.sqrt((ncoords ** 2).sum(axis=1)).max())
                lip = 0.0
                if len(local) > 1:
                    dt = tcoords[1:] - tcoords[:-1]
                    dn = ncoords[1:] - ncoords[:-1]
                    ln = np.sqrt((dt ** 2).sum(axis=1))
                    ok = ln > grid_spacing / 4.0
                    if ok.any():
                        lip = float((np.sqrt((dn[ok] ** 2).sum(axis=1)) / ln[ok]).max())
                seminorms.append(sup / r_next + lip)
                residuals.append(sup)
        levels.append(LevelRecord(
            scale=r_next, good=good_next, bad=bad_next, final=final_here,
            excess_atoms=excess_ids, excess_mass=excess_mass,
            area_before=area_before, area_after_holes=area_after_holes,
            hole_budget=hole_budget, ledger_ok=bool(ledger_ok),
            distortion=distortion, patch_seminorms=seminorms,
            patch_residuals=residuals))
        good = good_next
        if not good and candidates.size == 0:
            break
    final_area = _masked_area(pts, shape, alive)
    return ReifenbergTrace(levels, k, rho, initial_area, final_area, completed,
                           pts, alive)


@dataclass
class PackingVerdict:
    packing_sum: float
    sup_density_ratio: float
    ceiling: float

    def within_ceiling(self):
        return self.packing_sum <= self.ceiling and \
            self.sup_density_ratio <= self.ceiling


def packing_verdict(system: BallSystem, k, scale_floor=None,
                    max_centers_per_scale=128):
    """Total r_s^k of the system plus the worst ball-density ratio
    mu(B_t(x))/t^k over a (strided) dyadic net, against the declared
    40^k omega_k ceiling."""
    mu = system.induced_measure(k)
    if scale_floor is None:
        scale_floor = max(float(system.radii.min()), 1e-6)
    stride = max(1, mu.size // max_centers_per_scale)
    worst = 0.0
    t = 1.0
    while t >= scale_floor:
        for x in mu.points[::stride]:
            worst = max(worst, mu.mass_in_ball(x, t) / t**k)
        t /= 2.0
    ceiling = PACKING_CEILING_FACTOR**k * unit_ball_volume(k)
    return PackingVerdict(system.packing_sum(k), worst, ceiling)


def best_plane_drift(mu: WeightedPointMeasure, x, rho, k, gate=None,
                     samples=256, seed=0):
    """Compare the best planes at scale 1 (origin) and scale rho (at x).

    Returns (lhs, rhs, ratio): lhs is the squared sampled Hausdorff distance
    between the two planes inside B_rho(x), rhs the sum of the two
    displacements; their ratio is what the drift bound controls.  Requires
    both balls to pass the mass gate -- without the small-ball gate two
    wildly different planes can both be L2-optimal.
    """
    from .geom import sample_ball_intersection
    if gate is None:
        gate = default_gate(k)
    x = np.asarray(x, dtype=np.float64)
    origin = np.zeros_like(x)
    if mu.mass_in_ball(origin, 1.0) < gate:
        raise ValueError("mass gate fails on the unit ball")
    if mu.mass_in_ball(x, rho) < gate * rho**k:
        raise ValueError("mass gate fails on the small ball")
    big_plane, _ = best_plane(mu, origin, 1.0, k)
    small_plane, _ = best_plane(mu, x, rho, k)
    # identical sampling pattern: coinciding planes give exactly zero
    a = sample_ball_intersection(big_plane, rho, x, samples, seed)
    b = sample_ball_intersection(small_plane, rho, x, samples, seed)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("a best plane misses the comparison ball")
    lhs = hausdorff_distance(a, b) ** 2
    rhs = displacement(mu, x, rho, k, gate) + displacement(mu, origin, 1.0, k, gate)
    ratio = 0.0 if (lhs == 0.0 and rhs == 0.0) else lhs / max(rhs, 1e-300)
    return lhs, rhs, ratio


def find_spanning_point(mu: WeightedPointMeasure, subspace: AffineSubspace,
                        rho, gate=None):
    """A support point clear of a low-dimensional plane and carrying mass.

    Whenever mu(B_1) >= gate and the rho-ball mass cap holds, some atom of
    the unit ball keeps B_{10 rho} clear of the given plane while its
    rho-ball carries at least c(n) rho^n mass.
    """
    k = subspace.dim + 1
    if gate is None:
        gate = default_gate(k)
    n = mu.ambient_dim
    needed = 0.75 * gate * 4.0 ** (-n) * rho**n
    origin = np.zeros(n)
    best = None
    for idx in mu.indices_in_ball(origin, 1.0):
        p = mu.points[idx]
        if subspace.distance(p) <= 10.0 * rho:
            continue
        mass = mu.mass_in_ball(p, rho)
        if mass >= needed and (best is None or mass > best[1]):
            best = (p.copy(), mass)
    if best is None:
        raise ValueError("no spanning point found; mass hypotheses violated")
    return best
