"""Command-line entry point: ``solve``, ``sweep``, ``verify`` and ``compare``.

Settings come from defaults, then flags, then an optional ``--config`` JSON
file whose keys win over both. Config keys use the flag names with
underscores (``r_grid``, ``delta_star``); a nested ``kernel`` object may give
``sigma2`` and ``length_scale``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

from .bench import (
    MethodConfig,
    SetConfig,
    compare,
    default_r_grid,
    manifest,
    parse_r_grid,
    resolve_instance,
    result_summary,
    run_method,
    sweep,
    verify,
    write_csv,
)
from .pooling import InstanceError, parse_solution

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
METHOD_KEYS = tuple(f.name for f in fields(MethodConfig))
SET_KEYS = ("sigma2", "length_scale", "preset")


class UsageError(Exception):
    pass


def _method_args(p: argparse.ArgumentParser, default_method="cut-multi") -> None:
    p.add_argument("--method", default=default_method,
                   choices=["nominal", "reform", "cut-single", "cut-multi", "safety"])
    p.add_argument("--delta0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta-star", type=float)
    p.add_argument("--feas-tol", type=float)
    p.add_argument("--max-cuts", type=int)
    p.add_argument("--s-bar", type=float)
    p.add_argument("--time-limit", dest="time_limit_s", type=float)
    p.add_argument("--node-limit", type=int)


def _set_args(p: argparse.ArgumentParser, multi=False) -> None:
    if multi:
        p.add_argument("--sets", default="box,ellipsoid,polyhedron")
    else:
        p.add_argument("--set", default="box", choices=["box", "ellipsoid", "polyhedron", "ellipsoid-corr"])
        p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0, help="kernel signal variance (ellipsoid-corr)")
    p.add_argument("--length-scale", type=float, default=1.0, help="kernel length scale (ellipsoid-corr)")
    p.add_argument("--preset", choices=["near", "medium", "far"],
                   help="place sources on a line instead of using file locations (ellipsoid-corr)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-pooling", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="solve one instance for one set and radius")
    p.add_argument("--instance", required=True, help="instance file or bundled name")
    _set_args(p)
    _method_args(p)
    p.add_argument("--out", help="write the solution JSON here")
    p.add_argument("--report", help="write a JSON run report here")
    p.add_argument("--config")

    p = sub.add_parser("sweep", help="solve a grid of radii for several instances and sets")
    p.add_argument("--instances", default="haverly1,haverly2,haverly3")
    _set_args(p, multi=True)
    p.add_argument("--r-grid", help="lo:hi:n or a comma list (default 0:0.3:30)")
    _method_args(p)
    p.add_argument("--csv", required=True)
    p.add_argument("--manifest", help="JSON manifest path (default: CSV path with .json)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")

    p = sub.add_parser("verify", help="certify a solution file against an uncertainty set")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    _set_args(p)
    p.add_argument("--feas-tol", type=float)
    p.add_argument("--config")

    p = sub.add_parser("compare", help="run every robust method on one cell")
    p.add_argument("--instance", required=True)
    _set_args(p)
    _method_args(p)
    p.add_argument("--report")
    p.add_argument("--config")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Overlay a JSON config file on the parsed flags."""
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    doc = dict(doc)
    doc.update(doc.pop("kernel", {}) or {})
    if "geometry" in doc:
        doc["set"] = doc.pop("geometry")
    if "time_limit" in doc:
        doc["time_limit_s"] = doc.pop("time_limit")
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if key in ("instances", "sets", "r_grid") and isinstance(value, list):
            value = ",".join(str(v) for v in value)
        if not hasattr(args, attr):
            raise UsageError(f"config key {key!r} does not apply to '{args.verb}'")
        setattr(args, attr, value)
    return args


def _method_config(args) -> MethodConfig:
    opts = {k: getattr(args, k) for k in METHOD_KEYS if getattr(args, k, None) is not None}
    try:
        return MethodConfig(**opts)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _set_config(args, geometry) -> SetConfig:
    try:
        return SetConfig(geometry, args.sigma2, args.length_scale, args.preset)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load(ref):
    try:
        return resolve_instance(ref)
    except (FileNotFoundError, InstanceError) as exc:
        raise UsageError(str(exc)) from exc


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return str(obj)


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    cfg = _method_config(args)
    uset = _set_config(args, args.set).build(inst, args.r)
    res = run_method(inst, uset, cfg)
    print(f"{inst.name} set={args.set} r={args.r:g} method={res.method}")
    print(f"status: {res.status}")
    if res.solution is None:
        print("no solution found")
    else:
        print(f"profit: {res.profit:.6f}")
        print(f"epsilon: {res.separation.eps:.3g}  certified: {'yes' if res.certified else 'no'}")
    print(f"iterations: {res.iterations}  cuts: {res.cuts}  nodes: {res.nodes}  time: {res.time_s:.2f}s")
    if args.out and res.solution is not None:
        _write_json(args.out, res.solution.to_dict())
    if args.report:
        doc = result_summary(res)
        doc.update(instance=inst.name, set=uset.to_dict())
        _write_json(args.report, doc)
    return EXIT_OK if res.solution is not None else EXIT_FAIL


def cmd_sweep(args) -> int:
    instances = [_load(ref.strip()) for ref in str(args.instances).split(",") if ref.strip()]
    try:
        grid = parse_r_grid(str(args.r_grid)) if args.r_grid else default_r_grid()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sets = [_set_config(args, g.strip()) for g in str(args.sets).split(",") if g.strip()]
    cfg = _method_config(args)
    out = Path(args.csv)
    partial = out.with_name(out.name + ".partial")
    with partial.open("w", encoding="utf-8") as fh:
        write_csv([], fh)

        def on_row(row):
            write_csv([row], fh, header=False)
            fh.flush()
            print(f"{row.instance} {row.set} r={row.r:.4g} {row.status} profit={row.profit:.6f}", flush=True)

        rows = sweep(instances, sets, grid, cfg, workers=args.workers, on_row=on_row)
    with out.open("w", encoding="utf-8") as fh:
        write_csv(rows, fh)
    partial.unlink()
    _write_json(args.manifest or out.with_suffix(".json"), manifest(instances, sets, grid, cfg, rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load(args.instance)
    try:
        sol = parse_solution(Path(args.solution).read_text(encoding="utf-8"), inst)
    except (OSError, InstanceError) as exc:
        raise UsageError(f"{args.solution}: {exc}") from exc
    uset = _set_config(args, args.set).build(inst, args.r)
    cert = verify(inst, sol, uset, args.feas_tol if args.feas_tol is not None else MethodConfig().feas_tol)
    print(cert.describe(inst))
    return EXIT_OK if cert.certified else EXIT_FAIL


def cmd_compare(args) -> int:
    inst = _load(args.instance)
    cmp = compare(inst, _set_config(args, args.set), args.r, _method_config(args))
    print(cmp.table())
    if args.report:
        _write_json(args.report, cmp.to_dict())
    return EXIT_FAIL if cmp.disagreement else EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        args = _apply_config(args)
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
