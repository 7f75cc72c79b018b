"""Benchmark the compiled kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--quick]

Covers the four hot loops: small-matrix eigensolve, batched plane-fit
displacement, simplex-vs-ball clipping, and the product-cone pair reduction.
"""

import argparse
import time

import numpy as np

from varistrat._kernels import fallback

try:
    from varistrat._kernels import _impl as compiled
except ImportError:
    compiled = None


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads(quick):
    rng = np.random.default_rng(0)
    scale = 0.25 if quick else 1.0

    mats = rng.normal(size=(int(2000 * scale), 8, 8))
    mats = mats + mats.transpose(0, 2, 1)

    def bench_jacobi(impl):
        def run():
            acc = 0.0
            for m in mats:
                evals, _ = impl.jacobi_eigh(m)
                acc += evals[0]
            return acc
        return run

    npts = int(4096 * scale)
    from varistrat.varifold import snowflake
    atoms = snowflake([0.4] * 6).to_measure()
    pts = atoms.points[:npts]
    w = atoms.weights[:npts]
    centers = pts[:: max(1, len(pts) // 512)]

    def bench_displacement(impl):
        return lambda: impl.displacement_many(pts, w, centers, 0.25, 1, 1e-9)

    tri = np.array([[[0, 0], [1, 0], [0, 1]], [[1, 1], [1, 0], [0, 1]]],
                   dtype=float) * 4.0 - 2.0
    vols = np.array([8.0, 8.0])
    mults = np.array([1.0, 1.0])
    h = 0.004 if quick else 0.002

    def bench_clip(impl):
        return lambda: impl.simplex_ball_mass(tri, vols, mults, np.zeros(2),
                                              1.0, h)

    # raw (unaggregated) factors so the pair loop does real work
    from varistrat.simons import _factor_data
    level = 0 if quick else 1
    du, vu, cu, _, _ = _factor_data("600cell", level)

    def bench_hist(impl):
        return lambda: impl.cone_pair_histogram(
            du, vu, cu, du, vu, cu, 0.9 * np.sqrt(2 * cu.min()),
            1.1 * np.sqrt(2 * cu.max()), 4096)

    return [
        ("jacobi_eigh (8x8 batch)", bench_jacobi),
        (f"displacement_many ({npts} atoms)", bench_displacement),
        (f"simplex_ball_mass (h={h})", bench_clip),
        (f"cone_pair_histogram ({len(du)}^2 pairs)", bench_hist),
    ]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    print(f"{'kernel':38s} {'fallback':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, make in workloads(args.quick):
        t_fb, ref = timeit(make(fallback))
        if compiled is None:
            print(f"{name:38s} {t_fb:9.3f}s {'n/a':>10s} {'n/a':>8s}")
            continue
        t_c, out = timeit(make(compiled))
        same = np.allclose(np.asarray(ref, dtype=np.float64),
                           np.asarray(out, dtype=np.float64), rtol=1e-9,
                           atol=1e-12)
        flag = "" if same else "  MISMATCH"
        print(f"{name:38s} {t_fb:9.3f}s {t_c:9.3f}s {t_fb/t_c:7.1f}x{flag}")


if __name__ == "__main__":
    main()
