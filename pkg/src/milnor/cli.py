"""Command-line front end.

Every subcommand prints one JSON document (sorted keys, so identical inputs
and seeds give byte-identical output).  Exit status: 0 on success, 1 when a
numerical check fails, 2 when the input cannot be parsed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .base_complex import BaseError, ChartedCurve, catalog_loop
from .bundle_cocycle import BundleError, bundle_from_json, validate
from .classify import chart_independence, classifying_point, contract, reconstruct_cocycle
from .connection import ConnectionFormError, chern_number, holonomy
from .exprlang import ExprError, ExprSyntaxError
from .homotopy_tables import PiTable, bg_table, catalog_tables, verify_les
from .lie_group import CircleU1, group_from_json
from .milnor_join import join_equiv, make_join

CERTIFICATE_TOL = 1e-5
CHERN_TOL = 1e-3
CHECK_TOL = 1e-9


class SpecError(Exception):
    """Unreadable input; carries the byte offset when one is known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"byte {offset}: {message}")
        self.offset = offset


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def read_json(path: str) -> tuple[dict, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SpecError("file is not UTF-8", exc.start) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, _byte_offset(text, exc.pos)) from None
    if not isinstance(data, dict):
        raise SpecError("top level must be a JSON object", 0)
    return data, text


def load_bundle(path: str):
    data, text = read_json(path)
    try:
        return bundle_from_json(data), data
    except ExprSyntaxError as exc:
        # locate the offending expression inside the file
        at = text.find(json.dumps(exc.source)) if exc.source else -1
        offset = None if at < 0 else _byte_offset(text, at + 1) + exc.offset
        raise SpecError(str(exc), offset) from None
    except (BundleError, BaseError, ExprError, ValueError, KeyError, TypeError) as exc:
        raise SpecError(f"invalid bundle spec: {exc}") from None


def _seed(args, data: dict | None = None) -> int:
    if args.seed is not None:
        return args.seed
    return int((data or {}).get("seed", 0))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def emit(doc: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands; each returns (document, ok)


def cmd_check(args):
    bundle, data = load_bundle(args.spec)
    seed = _seed(args, data)
    rep = validate(bundle, samples=args.samples, seed=seed, tol=args.tol)
    base = bundle.base
    pts = base.random_points(np.random.default_rng(seed), args.samples)
    sums, neg = 0.0, 0.0
    for p in pts:
        w = base.partition_eval(p)
        sums = max(sums, abs(float(np.sum(w)) - 1.0))
        neg = max(neg, float(-np.min(w)))
    part_ok = sums <= args.tol and neg <= 0.0
    doc = {"command": "check", "seed": seed, "cocycle": rep.to_json(),
           "partition": {"max_sum_error": sums, "max_negative": neg, "ok": part_ok}}
    return doc, rep.ok and part_ok


def cmd_classify(args):
    bundle, data = load_bundle(args.spec)
    seed = _seed(args, data)
    pts = bundle.base.random_points(np.random.default_rng(seed), args.samples)
    points, worst, all_ok = [], 0.0, True
    for x in pts:
        b = classifying_point(bundle, x, stage=args.stage)
        ok, gap = chart_independence(bundle, x, stage=args.stage)
        all_ok &= ok
        worst = max(worst, gap)
        points.append({"chart": x.chart, "x": list(x.x), "point": b.to_json()})
    rec = reconstruct_cocycle(bundle, samples=args.samples, seed=seed, stage=args.stage)
    doc = {"command": "classify", "seed": seed, "points": points,
           "chart_independence": {"equivalent": all_ok, "max_weight_gap": worst},
           "round_trip": rec.to_json()}
    return doc, all_ok and worst <= CHECK_TOL and rec.max_deviation <= CHECK_TOL


def parse_loop(base, text: str) -> ChartedCurve:
    """Catalog loop name, or ``k:expr1;expr2`` in chart k with t in [0, 1]."""
    if ":" in text and text.split(":", 1)[0].strip().isdigit():
        chart, rest = text.split(":", 1)
        exprs = tuple(e.strip() for e in rest.split(";"))
        return ChartedCurve.build([(int(chart), exprs, 0.0, 1.0)])
    return catalog_loop(base, text)


def cmd_holonomy(args):
    bundle, data = load_bundle(args.spec)
    try:
        loop = parse_loop(bundle.base, args.loop)
    except (BaseError, ExprError) as exc:
        raise SpecError(f"bad loop {args.loop!r}: {exc}") from None
    elem, lift, hl = holonomy(bundle, loop, steps=args.steps)
    cert = hl.certificate
    doc = {"command": "holonomy", "seed": _seed(args, data), "loop": loop.to_json(), "steps": args.steps,
           "element": np.asarray(elem, dtype=float), "lift": np.asarray(lift, dtype=float),
           "certificate": cert}
    return doc, bool(cert <= CERTIFICATE_TOL)


def cmd_chern(args):
    bundle, data = load_bundle(args.spec)
    res = chern_number(bundle, resolution=args.resolution, keep_grid=bool(args.csv))
    if args.csv:
        write_grid(args.csv, bundle.base.dim, res.grid)
    doc = {"command": "chern", "seed": _seed(args, data), "resolution": args.resolution, **res.to_json()}
    return doc, res.residual <= CHERN_TOL


def write_grid(path: str, dim: int, grid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chart"] + [f"x{a}" for a in range(dim)] + ["F"])
        for k, X, F in grid:
            X = np.asarray(X).reshape(-1, dim)
            F = np.asarray(F, dtype=float).reshape(len(X), -1)
            for xi, fi in zip(X, F):
                w.writerow([k] + [repr(float(v)) for v in xi] + [repr(float(v)) for v in fi])


def cmd_contract(args):
    seed = 0 if args.seed is None else args.seed
    group = CircleU1() if args.group is None else group_from_json(json.loads(args.group))
    if args.stage < 2:
        raise SpecError("stage must be at least 2")
    if not 0.0 <= args.tau <= 1.0:
        raise SpecError("tau must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, args.stage))
    idx = sorted(rng.choice(args.stage - 1, size=min(m, args.stage - 1), replace=False).tolist())
    w = rng.uniform(0.05, 1.0, size=len(idx))
    p = make_join(w / w.sum(), [group.random_element(rng) for _ in idx], args.stage, group, idx)
    start = contract(p, 0.0)
    end = contract(p, 1.0)
    target = make_join([1.0], [group.identity()], args.stage, group, [1])
    checks = {"start_is_point": join_equiv(start, p), "end_is_basepoint": join_equiv(end, target, 0.0, 0.0)}
    doc = {"command": "contract", "seed": seed, "stage": args.stage, "tau": args.tau,
           "point": p.to_json(), "value": contract(p, args.tau).to_json(), "checks": checks}
    return doc, all(checks.values())


def cmd_homotopy(args):
    data, _ = read_json(args.tables)
    try:
        tables = dict(catalog_tables())
        for name, entry in (data.get("tables") or {}).items():
            tables[name] = PiTable.from_json(name, entry)
        shifts = {}
        for name in data.get("shifts", sorted(tables)):
            shifts[name] = bg_table(tables[name]).to_json()
        reports = []
        for ext in data.get("extensions", []):
            rep = verify_les(tables[ext["sub"]], tables[ext["total"]], tables[ext["quotient"]], int(ext["bound"]))
            reports.append({"sub": ext["sub"], "total": ext["total"], "quotient": ext["quotient"], **rep.to_json()})
    except KeyError as exc:
        raise SpecError(f"unknown table or missing field {exc}") from None
    except (ValueError, TypeError, AttributeError) as exc:
        raise SpecError(f"invalid tables file: {exc}") from None
    doc = {"command": "homotopy", "shifts": shifts, "extensions": reports}
    return doc, all(r["status"] != "violated" for r in reports)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="milnor", description="Classifying spaces, classifying maps and holonomy.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="overrides the seed in the input file")
        p.add_argument("--out", default=None, help="write JSON here instead of stdout")
        return p

    p = common(sub.add_parser("check", help="validate cocycle and partition"))
    p.add_argument("spec")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=CHECK_TOL)
    p.set_defaults(func=cmd_check)

    p = common(sub.add_parser("classify", help="classifying points and cocycle round trip"))
    p.add_argument("spec")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--stage", type=int, default=None)
    p.set_defaults(func=cmd_classify)

    p = common(sub.add_parser("holonomy", help="holonomy of a loop"))
    p.add_argument("spec")
    p.add_argument("--loop", default="equator", help="catalog loop name or 'k:expr1;expr2'")
    p.add_argument("--steps", type=int, default=1000)
    p.set_defaults(func=cmd_holonomy)

    p = common(sub.add_parser("chern", help="curvature integral and nearest period"))
    p.add_argument("spec")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--csv", default=None, help="write the curvature grid as CSV")
    p.set_defaults(func=cmd_chern)

    p = common(sub.add_parser("contract", help="contraction of the join on a random point"))
    p.add_argument("--stage", type=int, default=8)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--group", default=None, help='group JSON, e.g. \'{"kind": "SO3"}\' (default U1)')
    p.set_defaults(func=cmd_contract)

    p = common(sub.add_parser("homotopy", help="pi(BG) shifts and exact-sequence report"))
    p.add_argument("tables")
    p.set_defaults(func=cmd_homotopy)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc, ok = args.func(args)
    except SpecError as exc:
        print(f"milnor: {exc}", file=sys.stderr)
        return 2
    except (ConnectionFormError, BundleError, BaseError, ExprError) as exc:
        print(f"milnor: {exc}", file=sys.stderr)
        return 1
    doc["ok"] = bool(ok)
    emit(doc, args.out)
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
