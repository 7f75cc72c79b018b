"""Command-line front end: testbed generators, displacement profiling,
stratification and Reifenberg runs, the cone experiment battery, and report
merging.  Exit codes: 0 ok, 2 bad input, 3 hypothesis-check failure,
4 numerical failure."""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import reifenberg as rf
from . import simons as sm
from . import stratify as st
from . import varifold as vf
from .measure import WeightedPointMeasure, default_gate, displacement_profile, dini_sum
from .stratify import fit_loglog

SCHEMA = 1


class InputError(ValueError):
    pass


def _thread_count():
    try:
        return max(1, int(os.environ.get("VARISTRAT_THREADS", "1")))
    except ValueError:
        return 1


def _load_config(path):
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InputError(f"{path}: line {lineno}: expected key=value")
                key, val = line.split("=", 1)
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    return out


def _apply_config(args, parser):
    """Fill arguments still at their defaults from the config file."""
    if not getattr(args, "config", None):
        return args
    conf = _load_config(args.config)
    sub = parser._command_parsers.get(getattr(args, "command", ""), parser)
    defaults = {a.dest: a.default for a in sub._actions}
    for key, val in conf.items():
        if not hasattr(args, key):
            raise InputError(f"unknown config key {key!r}")
        if getattr(args, key) == defaults.get(key):
            default = defaults.get(key)
            cast = type(default) if default is not None else str
            if cast is bool:
                val = val.lower() in ("1", "true", "yes")
            elif default is not None:
                val = cast(val)
            setattr(args, key, val)
    return args


def _json_dump(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_measure(path):
    try:
        if path.endswith(".json"):
            return WeightedPointMeasure.from_json(path)
        if path.endswith(".off"):
            return vf.SimplicialVarifold.read_off(path).to_measure()
        return WeightedPointMeasure.from_csv(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from None


def svg_loglog(path, series, title="", annotations=()):
    """Self-contained SVG log-log plot (polyline per series, slope labels)."""
    width, height, margin = 480, 360, 48
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ys = ys[ys > 0]
    xs = xs[xs > 0]
    if len(xs) == 0 or len(ys) == 0:
        raise InputError("nothing positive to plot on log axes")
    lx0, lx1 = math.log10(xs.min()), math.log10(xs.max())
    ly0, ly1 = math.log10(ys.min()), math.log10(ys.max())
    lx1 += 1e-9
    ly1 += 1e-9

    def to_px(x, y):
        px = margin + (math.log10(x) - lx0) / (lx1 - lx0) * (width - 2 * margin)
        py = height - margin - (math.log10(y) - ly0) / (ly1 - ly0) * (height - 2 * margin)
        return px, py

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width/2:.1f}" y="20" text-anchor="middle" '
             f'font-size="13">{title}</text>']
    parts.append(f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" '
                 f'y2="{height-margin}" stroke="black"/>')
    parts.append(f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
                 f'y2="{height-margin}" stroke="black"/>')
    for idx, (name, (x, y)) in enumerate(sorted(series.items())):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = (x > 0) & (y > 0)
        pts = " ".join(f"{to_px(a, b)[0]:.2f},{to_px(a, b)[1]:.2f}"
                       for a, b in zip(x[keep], y[keep]))
        color = colors[idx % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width-margin}" y="{margin + 14*idx}" '
                     f'text-anchor="end" font-size="11" fill="{color}">{name}</text>')
    for idx, text in enumerate(annotations):
        parts.append(f'<text x="{margin+4}" y="{margin + 14*idx + 12}" '
                     f'font-size="11">{text}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# -- gen ---------------------------------------------------------------------


def cmd_gen(args):
    kind = args.kind
    try:
        if kind == "plane":
            mesh = vf.plane(args.m, args.n, args.extent, args.resolution,
                            quadrature_h=args.quadrature_h)
        elif kind in ("union_of_planes", "two_planes"):
            mesh = vf.union_of_planes(args.n, args.extent, args.resolution,
                                      quadrature_h=args.quadrature_h)
        elif kind in ("cone", "cone_over_link"):
            mesh = vf.cone_over_link(args.sheets, args.extent, args.resolution,
                                     quadrature_h=args.quadrature_h)
        elif kind == "graph":
            coeff = args.height_coeff

            def height(a, b):
                return coeff * (a * a - b * b)

            mesh = vf.graph_surface(height, args.extent, args.resolution,
                                    quadrature_h=args.quadrature_h)
        elif kind == "snowflake":
            etas = vf.parse_eta_sequence(args.eta_seq, args.depth, args.eta_start)
            mesh = vf.snowflake(etas)
        elif kind == "simons":
            mesh = sm.simons_cone_mesh("16cell", args.level)
        else:
            raise InputError(f"unknown generator {kind!r}")
    except ValueError as exc:
        raise InputError(str(exc)) from None
    mesh.validate()
    mesh.write_off(args.out)
    print(f"wrote {args.out}: m={mesh.m} n={mesh.ambient_dim} "
          f"simplices={mesh.n_simplices} mass={mesh.total_mass():.6g}")
    return 0


# -- beta --------------------------------------------------------------------


def cmd_beta(args):
    mu = _load_measure(args.input)
    k = args.k
    gate = args.gate if args.gate is not None else default_gate(k)
    alphas = list(range(args.alpha_min, args.alpha_max + 1))
    if args.max_centers and mu.size > args.max_centers:
        step = mu.size // args.max_centers
        centers = mu.points[::step]
    else:
        centers = mu.points
    rows = ["center,alpha,r,D,gated"]
    profiles = []

    def one(ci):
        return displacement_profile(mu, centers[ci], k, alphas, gate)

    nthreads = _thread_count()
    if nthreads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(nthreads) as pool:
            profiles = list(pool.map(one, range(len(centers))))
    else:
        profiles = [one(ci) for ci in range(len(centers))]
    for ci, prof in enumerate(profiles):
        for a, r, v, g in zip(prof.alphas, prof.radii, prof.values, prof.gated):
            rows.append(f"{ci},{a},{r:.17g},{v:.17g},{int(g)}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    if args.dini_out:
        drows = ["center,r,dini"]
        for ci in range(len(centers)):
            val = dini_sum(mu, centers[ci], args.dini_radius, k, gate)
            drows.append(f"{ci},{args.dini_radius:.17g},{val:.17g}")
        with open(args.dini_out, "w") as fh:
            fh.write("\n".join(drows) + "\n")
    print(f"wrote {args.out}: {len(profiles)} centers x {len(alphas)} scales")
    return 0


# -- stratify ----------------------------------------------------------------


def cmd_stratify(args):
    try:
        mesh = vf.SimplicialVarifold.read_off(args.input, args.quadrature_h)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    cents, weights = mesh.refined_pieces(max(args.sample_spacing, mesh.quadrature_h))
    # keep samples a margin inside the bounding box so tested balls stay on
    # the mesh (skip directions in which the mesh is thin)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    wide = (hi - lo) > 2.0 * args.sample_margin
    keep = np.ones(len(cents), dtype=bool)
    for axis in np.nonzero(wide)[0]:
        keep &= (cents[:, axis] >= lo[axis] + args.sample_margin)
        keep &= (cents[:, axis] <= hi[axis] - args.sample_margin)
    cents = cents[keep]
    if args.max_samples and len(cents) > args.max_samples:
        step = len(cents) // args.max_samples
        cents = cents[::step]
    labels = st.stratify_samples(mesh, cents, args.eps, args.r, h=args.quadrature_h)
    strata = []
    for k in range(mesh.m):
        members = [lab.point.tolist() for lab in labels if lab.labeled(k)]
        strata.append({"k": k, "count": len(members), "points": members})
    doc = {"schema": SCHEMA, "eps": args.eps, "r": args.r,
           "samples": len(cents), "strata": strata,
           "covering": {}, "fits": {}}
    if args.covering:
        tree = st.construct_covering(mesh, cents, args.covering_k, args.eps,
                                     args.eta, args.r, h=args.quadrature_h)
        doc["covering"] = {
            "rounds": tree.rounds,
            "floor_balls": tree.u_r_count(),
            "packing_sum": {"value": tree.packing_sum(), "tol": 0.0},
            "certificates_ok": tree.certificates_ok(),
            "covered": tree.covered_all_samples,
        }
    _json_dump(doc, args.out)
    print(f"wrote {args.out}: {sum(s['count'] for s in strata)} labeled samples")
    return 0


# -- reifenberg --------------------------------------------------------------


def cmd_reifenberg(args):
    try:
        system = rf.BallSystem.from_json(args.input)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from None
    report = rf.check_hypothesis(system, args.k, args.delta)
    if not report.passed:
        print(f"hypothesis check FAILED: worst {report.worst:.4e} >= "
              f"delta^2 {args.delta**2:.4e}", file=sys.stderr)
        return 3
    trace = rf.construct(system, np.zeros(system.ambient_dim), args.radius,
                         args.k, rho=args.rho, depth=args.depth,
                         delta=args.delta, check=False)
    verdict = rf.packing_verdict(system, args.k)
    doc = trace.to_json()
    doc["hypothesis"] = {"worst": {"value": report.worst, "tol": 0.0},
                         "delta": args.delta, "passed": report.passed}
    doc["packing"] = {"sum": {"value": verdict.packing_sum, "tol": 0.0},
                      "sup_density_ratio": {"value": verdict.sup_density_ratio,
                                            "tol": 0.0},
                      "ceiling": verdict.ceiling,
                      "within": verdict.within_ceiling()}
    _json_dump(doc, args.out)
    if args.levels_csv:
        rows = ["scale,good,bad,final,excess_mass,area_before,area_after_holes,"
                "hole_budget,distortion"]
        for lv in trace.levels:
            rows.append(f"{lv.scale:.17g},{len(lv.good)},{len(lv.bad)},"
                        f"{len(lv.final)},{lv.excess_mass:.17g},"
                        f"{lv.area_before:.17g},{lv.area_after_holes:.17g},"
                        f"{lv.hole_budget:.17g},{lv.distortion:.17g}")
        with open(args.levels_csv, "w") as fh:
            fh.write("\n".join(rows) + "\n")
    if args.grid_csv:
        trace.write_grid_csv(args.grid_csv)
    print(f"wrote {args.out}: {len(trace.levels)} levels, ledger "
          f"{'ok' if trace.ledger_ok() else 'VIOLATED'}")
    return 0


# -- simons ------------------------------------------------------------------


def cmd_simons(args):
    rng_seed = args.seed
    mesh = sm.SimonsConeMesh("600cell", args.level)
    cone = sm.SimonsCone()
    radii = 2.0 ** -np.arange(1, 6)
    masses = np.array([mesh.mass(np.zeros(8), r) for r in radii])
    mass_slope, _, mass_r2 = fit_loglog(radii, masses)
    curve = mesh.density_curve(np.zeros(8), radii)
    dens_rel = float(np.ptp(curve.values) / curve.values.mean())

    rhos = 2.0 ** -np.arange(4, 9)
    sub = np.array([mesh.regularity_sublevel_mass(r) for r in rhos])
    weak_slope, _, weak_r2 = fit_loglog(rhos, sub)

    eps_grid = 10.0 ** -np.arange(1, 5)
    log_vals = np.array([sm.curvature_integral(7.0, e) for e in eps_grid])
    lin_slope, lin_intercept = np.polyfit(np.log(1.0 / eps_grid), log_vals, 1)
    pred = lin_slope * np.log(1.0 / eps_grid) + lin_intercept
    ss = 1.0 - ((log_vals - pred) ** 2).sum() / ((log_vals - log_vals.mean()) ** 2).sum()

    quad7 = mesh.curvature_mass(7.0, 0.1)
    closed7 = sm.curvature_integral(7.0, 0.1)
    quad65 = cone.curvature_mass(6.5, 0.01, h=args.quadrature_h)
    closed65 = sm.curvature_integral(6.5, 0.01)

    # tube-volume slope around the singular point in R^8 (per-radius boxes)
    tube_r = np.array([0.3, 0.42, 0.6, 0.84, 1.0])
    tube_v = []
    tube_se = []
    for i, r in enumerate(tube_r):
        lo = np.full(8, -1.2 * r)
        hi = np.full(8, 1.2 * r)
        v, se = st.tube_volume(np.zeros((1, 8)), r, (lo, hi),
                               n_mc=args.n_mc, seed=rng_seed + i)
        tube_v.append(v)
        tube_se.append(se)
    tube_slope, _, tube_r2 = fit_loglog(tube_r, tube_v)

    # stratification and covering spot checks complete the battery
    eps = st.DEFAULT_SYMMETRY_EPS
    vertex_labeled = all(st.stratum_label(cone, np.zeros(8), eps, r, 0)
                         for r in (0.02, 0.1, 0.3))
    smooth_clear = all(not st.stratum_label(cone, sm.smooth_point(t), eps,
                                            0.02, 0)
                       for t in (0.2, 0.5, 0.8))
    samples = np.vstack([np.zeros(8)] + [sm.smooth_point(t)
                        for t in np.linspace(0.05, 0.95, 19)])
    tree = st.construct_covering(cone, samples, 0, eps, args.eta, 2.0 ** -5)
    round_cap = math.ceil(sm.VERTEX_DENSITY / args.eta)
    checks = {
        "mass_slope": abs(mass_slope - 7.0) <= 0.05,
        "density_constant": dens_rel <= 0.01,
        "curvature_quadrature": abs(quad7 - closed7) <= 0.01 * closed7
        and abs(quad65 - closed65) <= 0.01 * closed65,
        "weak_tail_slope": abs(weak_slope - 7.0) <= 0.1,
        "tube_slope": abs(tube_slope - 8.0) <= 0.3,
        "vertex_labeled": bool(vertex_labeled),
        "smooth_points_clear": bool(smooth_clear),
        "covering": bool(tree.rounds <= round_cap and tree.certificates_ok()
                         and tree.covered_all_samples),
    }

    doc = {
        "schema": SCHEMA,
        "seed": rng_seed,
        "level": args.level,
        "fits": {
            "mass": {"value": mass_slope, "r2": mass_r2, "tol": 0.05},
            "density_constancy": {"value": dens_rel, "tol": 0.01},
            "weakL7": {"value": weak_slope, "r2": weak_r2, "tol": 0.1},
            "tube": {"value": tube_slope, "r2": tube_r2, "tol": 0.3},
            "L7divergence": {"value": float(lin_slope), "r2": float(ss),
                             "tol": 1e-3},
        },
        "curvature": {
            "p7_quadrature": {"value": quad7, "tol": abs(quad7 - closed7)},
            "p7_closed": closed7,
            "p65_quadrature": {"value": quad65, "tol": abs(quad65 - closed65)},
            "p65_closed": closed65,
        },
        "tube_volumes": [{"r": float(r), "value": float(v), "se": float(s)}
                         for r, v, s in zip(tube_r, tube_v, tube_se)],
        "link_area": {"value": mesh.link_area,
                      "tol": abs(mesh.link_area - sm.LINK_AREA)},
        "checks": checks,
        "covering": {"rounds": tree.rounds, "round_cap": round_cap,
                     "floor_balls": tree.u_r_count(),
                     "packing_sum": {"value": tree.packing_sum(), "tol": 0.0}},
    }
    _json_dump(doc, args.out)
    if args.svg:
        svg_loglog(args.svg,
                   {"vertex mass": (radii, masses),
                    "regularity tail": (rhos, sub),
                    "tube volume": (tube_r, np.array(tube_v))},
                   title="cone scaling experiments",
                   annotations=[f"mass slope {mass_slope:.3f}",
                                f"tail slope {weak_slope:.3f}",
                                f"tube slope {tube_slope:.3f}"])
    failed = [name for name, ok in checks.items() if not ok]
    print(f"wrote {args.out}: mass slope {mass_slope:.3f}, tail slope "
          f"{weak_slope:.3f}, tube slope {tube_slope:.3f}; "
          f"{len(checks) - len(failed)}/{len(checks)} checks passed"
          + (f" (failed: {', '.join(failed)})" if failed else ""))
    return 0 if not failed else 4


# -- snowflake ---------------------------------------------------------------


def cmd_snowflake(args):
    try:
        etas = vf.parse_eta_sequence(args.eta_seq, args.depth, args.eta_start)
        for eta in etas:
            if not 0.0 <= eta < vf.SNOWFLAKE_ETA_MAX:
                raise InputError(f"eta={eta} outside the embeddable range")
    except ValueError as exc:
        raise InputError(str(exc)) from None
    lengths = [1.0]
    for d in range(1, args.depth + 1):
        lengths.append(vf.snowflake_length(etas[:d]))
    mesh = vf.snowflake(etas[:min(args.depth, args.dini_depth)])
    mu = mesh.to_measure()
    dini = dini_sum(mu, np.array([0.5, 0.0]), 1.0, 1)
    doc = {"schema": SCHEMA, "eta_seq": args.eta_seq, "depth": args.depth,
           "lengths": lengths,
           "length_differences": [lengths[i + 1] - lengths[i]
                                  for i in range(args.depth)],
           "dini": {"value": dini, "depth": min(args.depth, args.dini_depth),
                    "tol": 0.0},
           "eta_sum_sq": float(np.sum(np.array(etas) ** 2))}
    _json_dump(doc, args.out)
    print(f"wrote {args.out}: depth-{args.depth} length {lengths[-1]:.6f}, "
          f"dini {dini:.6f}")
    return 0


# -- report ------------------------------------------------------------------


def cmd_report(args):
    runs = []
    for path in sorted(args.inputs):
        try:
            with open(path) as fh:
                runs.append({"file": os.path.basename(path),
                             "data": json.load(fh)})
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: {exc}") from None
    doc = {"schema": SCHEMA, "runs": runs}
    _json_dump(doc, args.out)
    print(f"wrote {args.out}: merged {len(runs)} runs")
    return 0


# -- entry point --------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="varistrat",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a testbed mesh")
    g.add_argument("kind")
    g.add_argument("--out", required=True)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--n", type=int, default=3)
    g.add_argument("--extent", type=float, default=2.0)
    g.add_argument("--resolution", type=int, default=16)
    g.add_argument("--sheets", type=int, default=3)
    g.add_argument("--height-coeff", type=float, default=0.1)
    g.add_argument("--eta-seq", default="1/i")
    g.add_argument("--eta-start", type=int, default=2)
    g.add_argument("--depth", type=int, default=6)
    g.add_argument("--level", type=int, default=0)
    g.add_argument("--quadrature-h", type=float, default=0.01)
    g.add_argument("--config")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("beta", help="displacement profiles of a point cloud")
    b.add_argument("--input", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--alpha-min", type=int, default=0)
    b.add_argument("--alpha-max", type=int, default=10)
    b.add_argument("--gate", type=float, default=None)
    b.add_argument("--max-centers", type=int, default=256)
    b.add_argument("--dini-out", default=None)
    b.add_argument("--dini-radius", type=float, default=1.0)
    b.add_argument("--config")
    b.set_defaults(func=cmd_beta)

    s = sub.add_parser("stratify", help="stratum labels on a mesh")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--eps", type=float, default=st.DEFAULT_SYMMETRY_EPS)
    s.add_argument("--r", type=float, default=0.05)
    s.add_argument("--quadrature-h", type=float, default=0.01)
    s.add_argument("--sample-spacing", type=float, default=0.1)
    s.add_argument("--sample-margin", type=float, default=1.0)
    s.add_argument("--max-samples", type=int, default=256)
    s.add_argument("--covering", action="store_true")
    s.add_argument("--covering-k", type=int, default=0)
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--config")
    s.set_defaults(func=cmd_stratify)

    r = sub.add_parser("reifenberg", help="manifold construction on a ball system")
    r.add_argument("--input", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--radius", type=float, default=1.0)
    r.add_argument("--rho", type=float, default=0.25)
    r.add_argument("--depth", type=int, default=4)
    r.add_argument("--delta", type=float, default=0.2)
    r.add_argument("--levels-csv", default=None)
    r.add_argument("--grid-csv", default=None)
    r.add_argument("--config")
    r.set_defaults(func=cmd_reifenberg)

    c = sub.add_parser("simons", help="cone experiment battery")
    c.add_argument("--out", required=True)
    c.add_argument("--svg", default=None)
    c.add_argument("--level", type=int, default=3)
    c.add_argument("--n-mc", type=int, default=400000)
    c.add_argument("--quadrature-h", type=float, default=0.01)
    c.add_argument("--eta", type=float, default=1.0)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--config")
    c.set_defaults(func=cmd_simons)

    f = sub.add_parser("snowflake", help="variable-parameter snowflake dichotomy")
    f.add_argument("--out", required=True)
    f.add_argument("--eta-seq", default="1/i")
    f.add_argument("--eta-start", type=int, default=2)
    f.add_argument("--depth", type=int, default=10)
    f.add_argument("--dini-depth", type=int, default=6)
    f.add_argument("--config")
    f.set_defaults(func=cmd_snowflake)

    m = sub.add_parser("report", help="merge run reports")
    m.add_argument("inputs", nargs="+")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_report)

    p._command_parsers = {"gen": g, "beta": b, "stratify": s, "reifenberg": r,
                          "simons": c, "snowflake": f, "report": m}
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args, parser)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except rf.HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
