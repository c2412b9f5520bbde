"""Command line driver: ``ellobst <command> [options]``.

Every command resolves its configuration as flags > ``--config`` JSON file >
defaults, writes its outputs into ``--out`` and finishes with
``manifest.json`` listing each file with its SHA-256.

Exit codes: 0 success, 1 verification failure, 2 usage or validation error,
3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bodies import body_from_description
from .centroid import weighted_centroid
from .errors import ConvergenceError, EllobstError, MembershipViolation, ValidationError
from .geometry import QuadraticBlowdown
from .io import read_field, read_json, write_field, write_json, write_slice_csv
from .obstacle import (GridField, GridSpec, SolveParams, coincidence_mask, complementarity_residual,
                       sample_field, solve_obstacle)
from .solution import EllipsoidSolution

log = logging.getLogger("ellobst")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONV = 0, 1, 2, 3
BALL_Q = [1 / 6, 1 / 6, 1 / 6]

DEFAULTS = {
    "make-solution": {"q": BALL_Q, "method": "quadrature", "m": None, "box_radius": 3.0},
    "solve": {"q": BALL_Q, "solution": None, "boundary": "solution", "boundary_offset": 0.0, "dim": 3,
              "m": 65, "box_radius": 3.0, "omega": 1.8, "tol": None, "max_sweeps": 100000,
              "ordering": "lexicographic"},
    "verify": {"q": None, "field": None, "solution": None, "m": 65, "box_radius": 3.0, "tol": None},
    "centroid": {"body": {"kind": "box", "lower": [0, 0, 0], "upper": [1, 1, 1]}, "tol": 1e-8,
                 "resolution": 24},
    "bench-sweep": {"dim": 3, "m": 65, "box_radius": 3.0, "sweeps": 20, "ordering": "lexicographic",
                    "omega": 1.8},
}


class UsageError(EllobstError):
    pass


def _q_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with command parameters")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=None, help="output directory (default: ./out-<command>)")
    common.add_argument("--q", type=_q_list, default=None, help="blow-down diagonal, e.g. 0.3,0.1,0.1")
    common.add_argument("--m", type=int, default=None, help="grid points per axis (odd)")
    common.add_argument("--box-radius", type=float, default=None, dest="box_radius")
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ellobst", description="Obstacle-problem ellipsoid experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("make-solution", parents=[common], help="exact solution for a blow-down")
    s = sub.add_parser("solve", parents=[common], help="solve the obstacle problem on a box")
    s.add_argument("--solution", type=Path, help="solution JSON supplying the boundary data")
    s.add_argument("--boundary", choices=["solution", "zero"])
    s.add_argument("--ordering", choices=["lexicographic", "red-black"])
    v = sub.add_parser("verify", parents=[common], help="check the ellipsoid verdict on a field")
    v.add_argument("--field", type=Path, help="field file written by 'solve'")
    v.add_argument("--solution", type=Path, help="exact solution to sample instead of a field")
    c = sub.add_parser("centroid", parents=[common], help="weighted centre of a convex body")
    c.add_argument("--body", type=json.loads, help='JSON body description, e.g. {"kind": "ball", "radius": 1}')
    b = sub.add_parser("bench-sweep", parents=[common], help="time PSOR sweeps")
    b.add_argument("--sweeps", type=int)
    b.add_argument("--ordering", choices=["lexicographic", "red-black"])
    return p


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS[args.command])
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg) - {"seed"}
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.setdefault("seed", 0)
    for key in ("seed", "q", "m", "box_radius", "tol", "solution", "boundary", "ordering", "field",
                "body", "sweeps"):
        val = getattr(args, key, None)
        if val is None:
            continue
        if key not in cfg:
            raise UsageError(f"--{key.replace('_', '-')} does not apply to {args.command}")
        cfg[key] = str(val) if isinstance(val, Path) else val
    return cfg


def _blowdown(entries) -> QuadraticBlowdown:
    try:
        return QuadraticBlowdown.normalized(entries, tol=1e-9)
    except ValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid blow-down {entries!r}: {exc}") from exc


class Run:
    """Output directory bookkeeping: every written file ends up in the manifest."""

    def __init__(self, out: Path, command: str, cfg: dict, figures: bool):
        self.out = out
        self.command = command
        self.cfg = cfg
        self.figures = figures
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name, doc):
        return write_json(self.path(name), doc)

    def field_outputs(self, stem: str, fld: GridField, ellipse_axes=None, title=None):
        write_field(self.path(f"{stem}.bin"), fld)
        write_slice_csv(self.path(f"{stem}_slice.csv"), fld)
        if self.figures:
            from .plotting import slice_figure
            slice_figure(self.path(f"{stem}_slice.png"), fld, ellipse_axes, title)

    def manifest(self, status: str, exit_code: int):
        entries = []
        for name in sorted(set(self.files)):
            data = (self.out / name).read_bytes()
            entries.append({"file": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        write_json(self.out / "manifest.json", {"command": self.command, "config": self.cfg,
                                                "version": __version__, "status": status,
                                                "exit_code": exit_code, "files": entries})


def _grid(cfg, dim=3) -> GridSpec:
    return GridSpec(int(cfg.get("dim", dim)), float(cfg["box_radius"]), int(cfg["m"]))


def cmd_make_solution(run: Run) -> int:
    cfg = run.cfg
    Q = _blowdown(cfg["q"])
    sol = EllipsoidSolution.from_blowdown(Q, cfg["method"])
    doc = sol.to_dict()
    doc["kappa_residual"] = sol.kappa_residual()
    run.json("solution.json", doc)
    if cfg["m"] is not None:
        fld = sample_field(_grid(cfg, sol.dim), sol)
        run.field_outputs("sampled", fld, sol.axes[:2], "exact solution")
    print(" ".join(f"{a:.12g}" for a in sol.axes))
    return EXIT_OK


def cmd_solve(run: Run) -> int:
    cfg = run.cfg
    spec = _grid(cfg)
    offset = float(cfg["boundary_offset"])
    sol = None
    if cfg["boundary"] == "zero":
        boundary = offset
    elif cfg["solution"] is not None:
        sol = EllipsoidSolution.from_dict(read_json(cfg["solution"]))
    else:
        sol = EllipsoidSolution.from_blowdown(_blowdown(cfg["q"]))
    if sol is not None:
        if sol.dim != spec.dim:
            raise ValidationError(f"solution has dimension {sol.dim}, grid has {spec.dim}")

        def boundary(x):
            return sol(x) + offset

    params = SolveParams(omega=float(cfg["omega"]), tol=cfg["tol"], max_sweeps=int(cfg["max_sweeps"]),
                         ordering=cfg["ordering"])
    fld = solve_obstacle(spec, boundary, params)
    res = complementarity_residual(fld)
    mask = coincidence_mask(fld)
    mask_fld = GridField(spec, mask.astype(float), {})
    info = {k: v for k, v in fld.info.items()}
    report = {"schema": "ellobst.solve/1", "grid": {"dim": spec.dim, "box_radius": spec.box_radius,
                                                   "points_per_axis": spec.points_per_axis, "h": spec.h},
              "solver": info, "residual": {"max_neg_u": res.max_neg_u,
                                           "max_excess_laplacian": res.max_excess_laplacian,
                                           "max_product": res.max_product},
              "mask_nodes": int(mask.sum()), "mask_volume": float(mask.sum() * spec.h**spec.dim),
              "q": None if sol is None else list(sol.Q.diag),
              "boundary": cfg["boundary"] if sol is None else "solution"}
    if sol is not None:
        report["exact_axes"] = list(sol.axes)
    run.field_outputs("field", fld, None if sol is None else sol.axes[:2], "obstacle solution")
    write_field(run.path("mask.bin"), mask_fld)
    run.json("solve_report.json", report)
    if not fld.converged:
        print(f"not converged after {info['sweeps']} sweeps (max update {info['max_update']:.3g})",
              file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_verify(run: Run) -> int:
    from .verify import run_verification

    cfg = run.cfg
    sol = None
    if cfg["solution"] is not None:
        sol = EllipsoidSolution.from_dict(read_json(cfg["solution"]))
    if cfg["q"] is not None:
        Q = _blowdown(cfg["q"])
    elif sol is not None:
        Q = sol.Q
    elif cfg["field"] is not None:
        rep = Path(cfg["field"]).with_name("solve_report.json")
        if not rep.exists() or read_json(rep).get("q") is None:
            raise UsageError("no blow-down given: pass --q or a solution file")
        Q = _blowdown(read_json(rep)["q"])
    else:
        raise UsageError("verify needs --field or --solution")
    if cfg["field"] is not None:
        fld = read_field(cfg["field"])
        sampled = False
    else:
        fld = sample_field(_grid(cfg, sol.dim), sol)
        sampled = True
    report = run_verification(fld, Q, sampled=sampled, residual_tol=cfg["tol"], seed=int(cfg["seed"]))
    report["source"] = "field" if not sampled else "exact solution"
    run.json("verification.json", report)
    write_slice_csv(run.path("verified_slice.csv"), fld)
    if run.figures and np.all(np.isfinite(fld.values)):
        from .plotting import slice_figure
        axes = report.get("fitted", {}).get("axes")
        slice_figure(run.path("verified_slice.png"), fld, None if axes is None else axes[:2], "fitted ellipsoid")
    failed = [i for i in report["invariants"] if not i["passed"]]
    for i in failed:
        print(f"FAIL {i['name']}: value={i['value']} threshold={i['threshold']} {i['note']}".rstrip(),
              file=sys.stderr)
    if not failed:
        print("ellipsoid verdict: pass")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_centroid(run: Run) -> int:
    cfg = run.cfg
    body = body_from_description(cfg["body"])
    try:
        res = weighted_centroid(body, tol=float(cfg["tol"]), resolution=int(cfg["resolution"]))
    except MembershipViolation as exc:
        print(f"membership violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    doc = res.to_dict()
    doc["schema"] = "ellobst.centroid/1"
    doc["body"] = body.describe()
    run.json("centroid.json", doc)
    with open(run.path("epsilon_trace.csv"), "w") as fh:
        fh.write("eps," + ",".join(f"x{i}" for i in range(body.dim)) + "\n")
        for eps, x in res.epsilon_trace:
            fh.write(repr(float(eps)) + "," + ",".join(repr(float(v)) for v in x) + "\n")
    if run.figures:
        from .plotting import epsilon_trace_figure
        epsilon_trace_figure(run.path("epsilon_trace.png"), res.epsilon_trace, res.x0)
    print(" ".join(f"{v:.10g}" for v in res.x0))
    return EXIT_OK


def cmd_bench_sweep(run: Run) -> int:
    from .obstacle import boundary_values, make_sweeper

    cfg = run.cfg
    spec = _grid(cfg)
    u = boundary_values(spec, lambda x: np.sum(x**2, axis=-1) / (2 * spec.dim))
    sweep = make_sweeper(spec, float(cfg["omega"]), cfg["ordering"])
    sweep(u)  # compile
    times = []
    for _ in range(int(cfg["sweeps"])):
        t = time.perf_counter()
        sweep(u)
        times.append(time.perf_counter() - t)
    per = float(np.median(times))
    run.json("bench.json", {"schema": "ellobst.bench/1", "nodes": spec.points_per_axis**spec.dim,
                            "median_sweep_seconds": per,
                            "ns_per_node": 1e9 * per / spec.points_per_axis**spec.dim,
                            "sweeps": len(times)})
    print(f"{per * 1e3:.2f} ms per sweep")
    return EXIT_OK


COMMANDS = {"make-solution": cmd_make_solution, "solve": cmd_solve, "verify": cmd_verify,
            "centroid": cmd_centroid, "bench-sweep": cmd_bench_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with exit 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    status, code = "error", EXIT_USAGE
    run = None
    try:
        cfg = resolve_config(args)
        out = args.out or Path(f"out-{args.command}")
        run = Run(out, args.command, cfg, figures=not args.no_figures)
        code = COMMANDS[args.command](run)
        status = {EXIT_OK: "pass", EXIT_FAIL: "fail", EXIT_NONCONV: "not converged"}.get(code, "error")
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status, code = "not converged", EXIT_NONCONV
    except (EllobstError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status, code = "error", EXIT_USAGE
    if run is not None:
        run.manifest(status, code)
    return code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
