"""Atomic weighted measures with ball queries, second directional moments,
best-fit affine planes, and the scale-normalized plane-fit displacement with
its multiscale (Dini-type) sums."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geom import AffineSubspace, LinearSubspace

__all__ = [
    "unit_ball_volume", "default_gate", "WeightedPointMeasure",
    "MomentDecomposition", "moments", "best_plane", "displacement",
    "displacement_batch", "dini_sum", "pointwise_displacement_bound",
    "DisplacementProfile", "displacement_profile",
]


def unit_ball_volume(k):
    """Volume of the unit k-ball."""
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def default_gate(k):
    """Default mass-gate coefficient: unit_ball_volume(k) * 40**-k.

    Displacement is defined to vanish on balls carrying less mass than
    gate * r**k; this threshold keeps every low-mass degenerate configuration
    (isolated atoms, nearly-empty balls) out of the plane-fit statistics.
    """
    return unit_ball_volume(k) * 40.0 ** (-k)


class WeightedPointMeasure:
    """Finite atomic measure sum w_i * delta_{x_i} with exact ball queries.

    Ball queries run through a fixed-cell grid built at the query radius
    scale (linear scan for high ambient dimension); results always equal the
    linear-scan answer on the closed ball.
    """

    def __init__(self, points, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.size == 0:
            points = points.reshape(0, points.shape[1] if points.ndim == 2 else 1)
        if weights is None:
            weights = np.ones(points.shape[0])
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (points.shape[0],):
            raise ValueError("weights must match the number of atoms")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise ValueError("non-finite atom data")
        self.points = points
        self.weights = weights
        self._grids = {}
        self._min_gap = None

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    def total_mass(self):
        return float(self.weights.sum())

    # -- spatial index ----------------------------------------------------

    def _grid(self, cell):
        grid = self._grids.get(cell)
        if grid is None:
            keys = np.floor(self.points / cell).astype(np.int64)
            grid = {}
            for i, key in enumerate(map(tuple, keys)):
                grid.setdefault(key, []).append(i)
            self._grids[cell] = grid
        return grid

    def indices_in_ball(self, x, r):
        """Indices of atoms in the closed ball B_r(x); exact."""
        x = np.asarray(x, dtype=np.float64)
        if self.size == 0:
            return np.zeros(0, dtype=np.int64)
        n = self.ambient_dim
        if n > 3 or self.size < 64 or len(self._grids) > 8:
            cand = np.arange(self.size)
        else:
            cell = 2.0 ** math.ceil(math.log2(max(r, 1e-300)))
            grid = self._grid(cell)
            lo = np.floor((x - r) / cell).astype(np.int64)
            hi = np.floor((x + r) / cell).astype(np.int64)
            idx = []
            ranges = [range(lo[a], hi[a] + 1) for a in range(n)]
            keys = [(i,) for i in ranges[0]]
            for rng_ in ranges[1:]:
                keys = [k + (i,) for k in keys for i in rng_]
            for key in keys:
                idx.extend(grid.get(key, ()))
            if not idx:
                return np.zeros(0, dtype=np.int64)
            cand = np.array(sorted(idx), dtype=np.int64)
        d2 = ((self.points[cand] - x) ** 2).sum(axis=1)
        return cand[d2 <= r * r]

    def mass_in_ball(self, x, r):
        """Total weight of atoms within the closed ball B_r(x)."""
        if r <= 0:
            raise ValueError("radius must be positive")
        return float(self.weights[self.indices_in_ball(x, r)].sum())

    def restrict_to_ball(self, x, r):
        idx = self.indices_in_ball(x, r)
        return WeightedPointMeasure(self.points[idx], self.weights[idx])

    def subset(self, idx):
        return WeightedPointMeasure(self.points[idx], self.weights[idx])

    def min_atom_gap(self):
        """Smallest nonzero inter-atom distance (cached)."""
        if self._min_gap is None:
            self._min_gap = _kernels.min_pairwise_distance(self.points)
        return self._min_gap

    def rescaled(self, factor, center=None, mass_power=0):
        """Pushforward under y -> center + (y - center) * factor.

        A k-dimensional mass distribution rescales its weights by factor**k;
        pass mass_power=k for that convention (it is what makes the
        displacement exactly scale invariant).
        """
        center = np.zeros(self.ambient_dim) if center is None else np.asarray(center)
        return WeightedPointMeasure(center + (self.points - center) * factor,
                                    self.weights * factor**mass_power)

    # -- file formats ------------------------------------------------------

    def to_csv(self, path):
        n = self.ambient_dim
        header = ",".join([f"x{i + 1}" for i in range(n)] + ["weight"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for p, w in zip(self.points, self.weights):
                fh.write(",".join(f"{v:.17g}" for v in p) + f",{w:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header[-1] != "weight" or not all(
                    h == f"x{i + 1}" for i, h in enumerate(header[:-1])):
                raise ValueError(f"{path}: expected header x1,...,xn,weight")
            rows = []
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                vals = line.split(",")
                if len(vals) != len(header):
                    raise ValueError(f"{path}: line {lineno}: expected "
                                     f"{len(header)} fields, got {len(vals)}")
                try:
                    rows.append([float(v) for v in vals])
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
        data = np.array(rows) if rows else np.zeros((0, len(header)))
        return cls(data[:, :-1], data[:, -1])

    def to_json(self, path=None):
        doc = {"dim": self.ambient_dim,
               "atoms": [[list(map(float, p)), float(w)]
                         for p, w in zip(self.points, self.weights)]}
        if path is None:
            return doc
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
        n = int(doc["dim"])
        atoms = doc.get("atoms", [])
        pts = np.array([a[0] for a in atoms], dtype=np.float64).reshape(len(atoms), n)
        ws = np.array([a[1] for a in atoms], dtype=np.float64)
        return cls(pts, ws)


@dataclass
class MomentDecomposition:
    """Eigen-structure of the centered second moment of a probability measure.

    eigenvalues are sorted descending; eigenvectors are orthonormal rows.
    lambda_k is the maximum of the second directional moment over unit
    directions orthogonal to the previous maximizers.
    """

    center_of_mass: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: float

    def plane(self, k):
        return AffineSubspace(self.center_of_mass,
                              LinearSubspace(self.eigenvectors[:k]))

    def residual(self, k):
        """Least normalized squared L2 distance to any affine k-plane."""
        return float(self.eigenvalues[k:].sum())


def moments(mu: WeightedPointMeasure, x, r):
    """Moment decomposition of mu restricted to B_r(x), normalized to mass 1."""
    idx = mu.indices_in_ball(x, r)
    w = mu.weights[idx]
    mass = float(w.sum())
    if mass <= 0.0:
        raise ValueError("zero mass in ball")
    pts = mu.points[idx]
    cm = (w[:, None] * pts).sum(axis=0) / mass
    d = pts - cm
    sec = (w[:, None] * d).T @ d / mass
    evals, evecs = _kernels.jacobi_eigh(sec)
    evals = np.maximum(evals, 0.0)
    return MomentDecomposition(cm, evals, evecs, mass)


def best_plane(mu: WeightedPointMeasure, x, r, k):
    """Best affine k-plane for mu on B_r(x) and the normalized L2 residual.

    The minimizer passes through the center of mass and is spanned by the top
    k eigenvectors of the centered second moment; the residual equals the sum
    of the remaining eigenvalues.
    """
    dec = moments(mu, x, r)
    return dec.plane(k), dec.residual(k)


def displacement(mu: WeightedPointMeasure, x, r, k, gate=None):
    """Scale-normalized least L2 distance of mu on B_r(x) from a k-plane.

    Returns 0 when mu(B_r(x)) < gate * r**k, otherwise
    r**-(k+2) * integral over the ball of squared distance to the best plane
    of the unnormalized restricted measure.  Scale invariant: rescaling the
    atoms, center and radius together leaves the value unchanged.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if gate is None:
        gate = default_gate(k)
    if gate <= 0:
        raise ValueError("gate must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = _kernels.displacement_many(mu.points, mu.weights, x[None, :], r, k, gate)
    return float(out[0])


def displacement_batch(mu: WeightedPointMeasure, centers, r, k, gate=None):
    """Displacement at many centers with a shared radius (hot path)."""
    if gate is None:
        gate = default_gate(k)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    return _kernels.displacement_many(mu.points, mu.weights, centers, r, k, gate)


def dyadic_scales_below(r, floor):
    """Dyadic radii 2**-b with 2**-b <= r/2, truncated at floor.

    An infinite floor (single atom: no inter-atom scale) yields no scales.
    """
    if not np.isfinite(floor):
        return []
    floor = max(floor, 1e-30)
    beta = math.ceil(-math.log2(r / 2.0) - 1e-12)
    out = []
    while 2.0 ** -beta >= floor:
        out.append(2.0 ** -beta)
        beta += 1
    return out


def dini_sum(mu: WeightedPointMeasure, x, r, k, gate=None):
    """Multiscale displacement sum
    r**-k * sum over dyadic s <= r/2 of int_{B_r(x)} displacement(., s) dmu.

    The dyadic sum is truncated below the smallest inter-atom distance,
    where the displacement of an atomic measure vanishes identically.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if gate is None:
        gate = default_gate(k)
    idx = mu.indices_in_ball(x, r)
    if idx.size == 0:
        return 0.0
    centers = mu.points[idx]
    cw = mu.weights[idx]
    total = 0.0
    for s in dyadic_scales_below(r, mu.min_atom_gap()):
        vals = _kernels.displacement_many(mu.points, mu.weights, centers, s, k, gate)
        total += float(vals @ cw)
    return total / r**k


def pointwise_displacement_bound(mu: WeightedPointMeasure, x, r, k, gate=None):
    """Check displacement(x, r) against its ball-averaged double-scale bound.

    Returns (lhs, rhs) with lhs = displacement at (x, r) and
    rhs = 2**(k+2) times the mass-average over B_r(x) of displacement(., 2r).
    The comparison evaluates the double-scale displacement with the gate
    coefficient scaled by 2**-k so that the inner threshold is implied by the
    precondition mu(B_r(x)) >= gate * r**k; with an unscaled inner gate the
    inequality can fail vacuously.
    """
    if gate is None:
        gate = default_gate(k)
    mass = mu.mass_in_ball(x, r)
    if mass < gate * r**k:
        raise ValueError("mass gate violated at (x, r)")
    lhs = displacement(mu, x, r, k, gate)
    idx = mu.indices_in_ball(x, r)
    vals = _kernels.displacement_many(mu.points, mu.weights, mu.points[idx],
                                      2.0 * r, k, gate * 2.0 ** (-k))
    rhs = 2.0 ** (k + 2) * float(vals @ mu.weights[idx]) / mass
    return lhs, rhs


@dataclass
class DisplacementProfile:
    """Displacement over dyadic scales 2**-alpha at one center."""

    center: np.ndarray
    k: int
    alphas: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    gated: np.ndarray  # True where the mass gate passed

    def to_csv_rows(self):
        rows = ["alpha,r,D,gated"]
        for a, r, v, g in zip(self.alphas, self.radii, self.values, self.gated):
            rows.append(f"{a},{r:.17g},{v:.17g},{int(g)}")
        return rows

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_csv_rows()) + "\n")


def displacement_profile(mu: WeightedPointMeasure, x, k, alphas=None, gate=None):
    """Displacement profile of mu at x over scales 2**-alpha."""
    if gate is None:
        gate = default_gate(k)
    if alphas is None:
        alphas = np.arange(0, 11)
    alphas = np.asarray(alphas, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    radii = 2.0 ** (-alphas.astype(np.float64))
    values = np.zeros(len(radii))
    gated = np.zeros(len(radii), dtype=bool)
    for i, r in enumerate(radii):
        gated[i] = mu.mass_in_ball(x, r) >= gate * r**k
        if gated[i]:
            values[i] = displacement(mu, x, r, k, gate)
    return DisplacementProfile(x, k, alphas, radii, values, gated)
