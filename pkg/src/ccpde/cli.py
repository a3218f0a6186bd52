"""Command-line front end for batch experiments.

Subcommands: frames, solve, sweep, distance, differential, probe, verify.
Every run writes a ``manifest.json`` echoing the fully resolved
configuration next to its reports, so results are reproducible from the
manifest alone.  Exit status: 0 on success, 1 when a scientific check
fails, 2 on usage or parameter errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .differential import export_profile_csv, remainder_profile
from .eikonal import solve_eikonal
from .errors import CCPDEError, ParameterError
from .expressions import compile_expression
from .frames import frame_by_name, hormander_probe, left_inverse, lic_check, load_frame
from .grid import Grid, export_scalar_csv, x_divergence, x_gradient
from .limits import limit_compare, monotonicity_check, p_sweep
from .ppoisson import SolveConfig, ep_identities, solve_p_poisson
from .viscosity import export_verdicts_csv, probe_viscosity

OUTPUT_DIR_ENV = "CCPDE_OUTPUT_DIR"


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--frame", help="built-in frame name (euclideanN, heisenberg1, grushin, flat_phi)")
    sub.add_argument("--frame-file", help="JSON definition of a custom frame")
    sub.add_argument("--res", help="nodes per axis: single int or comma list")
    sub.add_argument("--box", help="domain box a1,b1;a2,b2;... (default: the frame's box)")
    sub.add_argument("--out", help="output directory (env %s overrides)" % OUTPUT_DIR_ENV)
    sub.add_argument("--deterministic", action="store_true",
                     help="force single-worker reductions and the fixed seed")
    sub.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    sub.add_argument("--workers", type=int, default=1, help="worker count for independent solves")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ccpde",
        description="Subelliptic p-Poisson / CC-distance / large-p limit laboratory.",
    )
    ap.add_argument("--version", action="version", version=f"ccpde {__version__}")
    sp = ap.add_subparsers(dest="subcommand", required=True)

    s = sp.add_parser("frames", help="frame diagnostics: rank, bracket depths, left inverse")
    _add_common(s)
    s.add_argument("--point", help="probe point x1,x2,... (default: box center)")
    s.add_argument("--depth", type=int, default=3, help="max bracket depth for the rank probe")

    s = sp.add_parser("solve", help="solve the p-Poisson Dirichlet problem")
    _add_common(s)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--f", default="const:0", help="source: const:c | expr:<e> | file:<csv>")
    s.add_argument("--g", default="const:0", help="boundary data: const:c | expr:<e> | file:<csv>")
    s.add_argument("--eps-final", type=float, help="final regularization level")
    s.add_argument("--max-iters", type=int, help="Newton iteration cap per stage")
    s.add_argument("--export-field", action="store_true", help="write the solution field CSV")

    s = sp.add_parser("sweep", help="increasing-p sweep with limit statistics")
    _add_common(s)
    s.add_argument("--p-list", default="4,8,16,32,64", help="comma list, strictly increasing")
    s.add_argument("--f", default="const:0")
    s.add_argument("--g", default="const:0")
    s.add_argument("--export-fields", action="store_true", help="write per-p solution CSVs")

    s = sp.add_parser("distance", help="CC distance by anisotropic fast sweeping")
    _add_common(s)
    s.add_argument("--source", default="boundary", help="'boundary' or point:x1,x2,...")
    s.add_argument("--export-field", action="store_true")

    s = sp.add_parser("differential", help="X-differential remainder profile at a point")
    _add_common(s)
    s.add_argument("--u", required=True, help="field under test: const:c | expr:<e> | file:<csv>")
    s.add_argument("--point", required=True, help="base point x1,x2,...")
    s.add_argument("--radii", default="0.4,0.2,0.1", help="decreasing comma list")

    s = sp.add_parser("probe", help="viscosity test-function probe at a point")
    _add_common(s)
    s.add_argument("--u", required=True, help="field under test: const:c | expr:<e> | file:<csv>")
    s.add_argument("--point", required=True)
    s.add_argument("--equation", required=True, choices=("inf_laplace", "eikonal", "p_poisson"))
    s.add_argument("--side", required=True, choices=("sub", "super", "both"))
    s.add_argument("--budget", type=int, default=512)
    s.add_argument("--p", type=float, help="exponent for the p_poisson equation")
    s.add_argument("--f", default="const:0")

    s = sp.add_parser("verify", help="run the module invariant suites")
    _add_common(s)
    s.add_argument("--suite", default="core", choices=("core",))
    return ap


def _parse_res(spec: str):
    if spec is None:
        raise ParameterError("--res is required for this subcommand")
    parts = [int(v) for v in spec.split(",") if v]
    res = parts[0] if len(parts) == 1 else parts
    low = min(parts) if parts else 0
    if low < 9:
        raise ParameterError(f"--res must be >= 9 per axis, got {spec!r}")
    return res


def _parse_box(spec: str | None):
    if spec is None:
        return None
    box = []
    for axis in spec.split(";"):
        vals = [float(v) for v in axis.split(",")]
        if len(vals) != 2 or vals[0] >= vals[1]:
            raise ParameterError(f"--box axis {axis!r} must be 'a,b' with a < b")
        box.append((vals[0], vals[1]))
    return box


def _parse_point(spec: str):
    return np.array([float(v) for v in spec.split(",")], dtype=float)


def _make_grid(args) -> Grid:
    if bool(args.frame) == bool(args.frame_file):
        raise ParameterError("exactly one of --frame / --frame-file is required")
    box = _parse_box(args.box)
    frame = load_frame(args.frame_file) if args.frame_file else frame_by_name(args.frame, box=box)
    return Grid(frame, _parse_res(args.res), box=box)


def _data_spec(grid: Grid, spec: str) -> np.ndarray:
    """Resolve a const:/expr:/file: data specifier to a node field."""
    if ":" not in spec:
        raise ParameterError(f"data specifier {spec!r} must be const:, expr:, or file:")
    kind, _, body = spec.partition(":")
    if kind == "const":
        try:
            return grid.constant_field(float(body))
        except ValueError as exc:
            raise ParameterError(f"const specifier {body!r} is not a number") from exc
    if kind == "expr":
        fn = compile_expression(body, grid.n)
        return grid.check_scalar(np.asarray(fn(grid.points), dtype=float)
                                 * np.ones(grid.shape))
    if kind == "file":
        if not os.path.exists(body):
            raise ParameterError(f"data file {body!r} does not exist")
        try:
            values = np.loadtxt(body, delimiter=",", skiprows=1)[:, grid.n]
        except (OSError, ValueError, IndexError) as exc:
            raise ParameterError(f"cannot read field CSV {body!r}: {exc}") from exc
        if values.size != grid.num_nodes:
            raise ParameterError(
                f"field file {body!r} has {values.size} rows, grid has {grid.num_nodes} nodes"
            )
        return values.reshape(grid.shape)
    raise ParameterError(f"unknown data specifier kind {kind!r} in {spec!r}")


def _out_dir(args) -> str:
    out = os.environ.get(OUTPUT_DIR_ENV) or args.out or os.path.join("ccpde_runs", args.subcommand)
    os.makedirs(out, exist_ok=True)
    return out


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["version"] = __version__
    cfg["workers"] = 1 if args.deterministic else args.workers
    return cfg


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scrub_runtimes(obj):
    """Zero wall-clock fields so deterministic runs emit identical bytes."""
    if isinstance(obj, dict):
        return {k: (0.0 if k == "runtime_s" else _scrub_runtimes(v)) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_scrub_runtimes(v) for v in obj]
    return obj


def _emit(args, out, report: dict) -> None:
    if args.deterministic:
        report = _scrub_runtimes(report)
    _write_json(os.path.join(out, "manifest.json"), _resolved_config(args))
    _write_json(os.path.join(out, "report.json"), report)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_frames(args) -> int:
    if bool(args.frame) == bool(args.frame_file):
        raise ParameterError("exactly one of --frame / --frame-file is required")
    box = _parse_box(args.box)
    frame = load_frame(args.frame_file) if args.frame_file else frame_by_name(args.frame, box=box)
    if box:
        frame = frame.with_box(box)
    point = (_parse_point(args.point) if args.point
             else np.array([(a + b) / 2.0 for a, b in frame.box]))
    rank, sv = lic_check(frame, point)
    ranks = hormander_probe(frame, point, args.depth)
    report = {
        "frame": frame.name,
        "n": frame.n,
        "m": frame.m,
        "box": [list(ab) for ab in frame.box],
        "point": [float(v) for v in point],
        "lic_rank": rank,
        "smallest_singular_value": sv,
        "rank_by_depth": ranks,
        "bracket_generating_here": ranks[-1] == frame.n,
    }
    if rank == frame.m:
        li = left_inverse(frame, point)
        from .frames import eval_coeff

        gap = np.abs(li @ eval_coeff(frame, point).T - np.eye(frame.m)).max()
        report["left_inverse_identity_gap"] = float(gap)
    out = _out_dir(args)
    _emit(args, out, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_solve(args) -> int:
    grid = _make_grid(args)
    f = _data_spec(grid, args.f)
    g = _data_spec(grid, args.g)
    cfg = SolveConfig()
    if args.eps_final is not None:
        cfg.eps_final = args.eps_final
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    rep = solve_p_poisson(grid, args.p, f, g, cfg)
    gap_weak, gap_thompson = ep_identities(rep, f)
    report = rep.to_dict()
    report["ep_identity_gap_weak"] = gap_weak
    report["ep_identity_gap_thompson"] = gap_thompson
    out = _out_dir(args)
    if args.export_field:
        export_scalar_csv(grid, rep.u, os.path.join(out, "u.csv"))
        report["field_csv"] = "u.csv"
    _emit(args, out, report)
    print(f"solved p={args.p:g}: E_p={rep.E_p:.8g} iterations={rep.iterations} "
          f"grad_norm={rep.final_grad_norm:.3g}")
    return 0 if rep.converged else 1


def _cmd_sweep(args) -> int:
    grid = _make_grid(args)
    p_list = [float(v) for v in args.p_list.split(",") if v]
    f = _data_spec(grid, args.f)
    g = _data_spec(grid, args.g)
    rep = p_sweep(grid, f, g, p_list=p_list)
    mono = monotonicity_check(rep)
    limit = limit_compare(rep)
    report = rep.to_dict()
    report["monotonicity"] = mono
    report["limit_compare"] = {k: v for k, v in limit.items()}
    out = _out_dir(args)
    if args.export_fields:
        for p, srep in zip(rep.p_list, rep.solves):
            name = f"u_p{p:g}.csv"
            export_scalar_csv(grid, srep.u, os.path.join(out, name))
        report["field_csvs"] = [f"u_p{p:g}.csv" for p in rep.p_list]
    _emit(args, out, report)
    ok = mono["passed"] and limit["lower_bound_ok"] and limit["upper_bound_ok"]
    print(f"sweep p={p_list}: N_p={['%.5g' % v for v in rep.N_p]} "
          f"monotone={mono['passed']} bounds_ok={limit['lower_bound_ok'] and limit['upper_bound_ok']}")
    return 0 if ok else 1


def _cmd_distance(args) -> int:
    grid = _make_grid(args)
    if args.source == "boundary":
        source = "boundary"
    elif args.source.startswith("point:"):
        source = _parse_point(args.source[len("point:"):])
    else:
        raise ParameterError(f"--source must be 'boundary' or 'point:...', got {args.source!r}")
    dfield = solve_eikonal(grid, source)
    stats = dfield.residual_stats()
    report = {
        "frame": grid.frame.name,
        "resolution": list(grid.resolution),
        "source": args.source,
        "sweeps": dfield.sweeps,
        "final_update": dfield.final_update,
        "max_distance": float(dfield.d[grid.domain_mask].max()),
        "residual_stats": stats,
    }
    out = _out_dir(args)
    if args.export_field:
        export_scalar_csv(
            grid, dfield.d, os.path.join(out, "d.csv"),
            extra_columns={"ridge": dfield.ridge_mask.astype(float),
                           "residual": dfield.residual()},
        )
        report["field_csv"] = "d.csv"
    _emit(args, out, report)
    print(f"distance: sweeps={dfield.sweeps} sup_residual_off_ridge={stats['sup_residual']:.4g}")
    return 0


def _cmd_differential(args) -> int:
    grid = _make_grid(args)
    u = _data_spec(grid, args.u)
    radii = [float(v) for v in args.radii.split(",") if v]
    rows = remainder_profile(grid, u, _parse_point(args.point), radii)
    out = _out_dir(args)
    export_profile_csv(rows, os.path.join(out, "profile.csv"))
    report = {
        "point": args.point,
        "radii": radii,
        "rows": [{"r": r, "worst_ratio": w, "status": s} for r, w, s in rows],
        "profile_csv": "profile.csv",
    }
    _emit(args, out, report)
    for r, w, s in rows:
        print(f"r={r:g} worst_ratio={w:.6g} [{s}]")
    return 0


def _cmd_probe(args) -> int:
    grid = _make_grid(args)
    u = _data_spec(grid, args.u)
    f = _data_spec(grid, args.f)
    sides = ("sub", "super") if args.side == "both" else (args.side,)
    verdicts = [
        probe_viscosity(grid, u, _parse_point(args.point), args.equation, side,
                        budget=args.budget, p=args.p, f=float(f[grid.interior_mask].mean()))
        for side in sides
    ]
    out = _out_dir(args)
    export_verdicts_csv(verdicts, os.path.join(out, "verdicts.csv"))
    report = {
        "equation": args.equation,
        "verdicts": [
            {"side": v.side, "admissible_count": v.admissible_count,
             "worst_violation": v.worst_violation, "tol": v.tol,
             "inconclusive": v.inconclusive, "passed": v.passed}
            for v in verdicts
        ],
        "verdicts_csv": "verdicts.csv",
    }
    _emit(args, out, report)
    failed = any((not v.passed) and (not v.inconclusive) for v in verdicts)
    for v in verdicts:
        status = "inconclusive" if v.inconclusive else ("pass" if v.passed else "FAIL")
        print(f"{v.equation} {v.side}: admissible={v.admissible_count} "
              f"worst_violation={v.worst_violation:.4g} [{status}]")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# verify suite
# ---------------------------------------------------------------------------


def _core_suite(seed: int):
    from .frames import euclidean, heisenberg1

    rng = np.random.default_rng(seed)
    checks = []

    def record(name, value, tol):
        checks.append({"name": name, "value": float(value), "tol": float(tol),
                       "passed": bool(value <= tol)})

    # left inverse identity at random interior points
    worst = 0.0
    for frame in (euclidean(2), heisenberg1()):
        lo = np.array([a for a, _ in frame.box])
        hi = np.array([b for _, b in frame.box])
        pad = 0.05 * (hi - lo)
        for _ in range(100):
            x = rng.uniform(lo + pad, hi - pad)
            from .frames import eval_coeff

            gap = np.abs(left_inverse(frame, x) @ eval_coeff(frame, x).T
                         - np.eye(frame.m)).max()
            worst = max(worst, float(gap))
    record("left_inverse_identity", worst, 1e-10)

    # divergence is the negative adjoint of the gradient
    g3 = Grid(heisenberg1(), (9, 9, 9), box=((-1, 1),) * 3)
    u = rng.standard_normal(g3.shape)
    F = rng.standard_normal(g3.shape + (g3.m,))
    u[~g3.interior_mask] = 0.0
    F[~g3.interior_mask] = 0.0
    lhs = float((x_gradient(g3, u) * F).sum())
    rhs = -float((u * x_divergence(g3, F)).sum())
    record("divergence_adjoint", abs(lhs - rhs) / (1.0 + abs(lhs)), 1e-10)

    # affine boundary data is reproduced exactly by the solver
    g2 = Grid(euclidean(2), (17, 17), box=((0, 1), (0, 1)))
    aff = 0.3 * g2.points[..., 0] - 0.7 * g2.points[..., 1] + 0.1
    rep = solve_p_poisson(g2, 6.0, 0.0, aff)
    record("affine_p_harmonic", np.abs(rep.u - aff).max(), 1e-8)

    # boundary distance on the unit square
    g2b = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    d = solve_eikonal(g2b, "boundary")
    X = g2b.points
    exact = np.minimum.reduce([X[..., 0], 1 - X[..., 0], X[..., 1], 1 - X[..., 1]])
    record("euclidean_boundary_distance", np.abs(d.d - exact).max(), 3 * g2b.h)

    # energy identities at p = 4
    g2c = Grid(euclidean(2), (33, 33), box=((0, 1), (0, 1)))
    rep4 = solve_p_poisson(g2c, 4.0, 1.0, 0.0)
    gw, gt = ep_identities(rep4, g2c.constant_field(1.0))
    record("energy_identity_weak", abs(gw), 1e-6)
    record("energy_identity_thompson", abs(gt), 1e-6)

    # affine remainder profile vanishes identically
    ga = Grid(heisenberg1(), (17, 17, 17), box=((-1, 1),) * 3)
    ua = 0.5 * ga.points[..., 0] + 0.25 * ga.points[..., 1]
    rows = remainder_profile(ga, ua, (0.0, 0.0, 0.0), [0.4, 0.2])
    worst = max((w for _, w, s in rows if s == "ok"), default=0.0)
    record("affine_differential_remainder", worst, 1e-10)
    return checks


def _cmd_verify(args) -> int:
    seed = 0 if args.deterministic else args.seed
    checks = _core_suite(seed)
    out = _out_dir(args)
    report = {"suite": args.suite, "checks": checks,
              "passed": all(c["passed"] for c in checks)}
    _emit(args, out, report)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: "
              f"{c['value']:.3g} (tol {c['tol']:.3g})")
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "frames": _cmd_frames,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "distance": _cmd_distance,
    "differential": _cmd_differential,
    "probe": _cmd_probe,
    "verify": _cmd_verify,
}


def run(argv=None) -> int:
    """Parse argv, dispatch, and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.subcommand](args)
    except CCPDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
