"""Command-line front end.

Usage:
    bpdvmo criterion --preset roadrunner-harmonic --t 1
    bpdvmo criterion --preset roadrunner-harmonic --t 1 --alpha 0.5
    bpdvmo content   --region region.json --horizon 8 --format csv
    bpdvmo witness   --preset roadrunner-harmonic --t 1 --starts 1 2 3
    bpdvmo ratios    --preset roadrunner-square --t 1 --depths 2 3 4 5
    bpdvmo bmo-norm  --preset roadrunner-harmonic --function re-z
    bpdvmo preset    roadrunner-harmonic

Exit status: 0 on success, 2 on invalid input, 3 on numeric or consistency
failures. Output is deterministic for a fixed command line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import NumericError, ValidationError
from .geometry import RadiusRule, RegionSpec
from .oscillation import DEFAULT_NODES, bmo_region_norm
from .series import CriterionQuery, bpd_verdict, annulus_content
from .witness import (DEFAULT_ATOMS, RATIO_COLUMNS, RATIO_FAMILIES, WITNESS_COLUMNS, LogDecay,
                      ProbeSettings, build_block, ratio_table, rows_to_csv, witness_report)

PRESETS = {
    "roadrunner-harmonic": RadiusRule(1.0, 2.0, 1.0),
    "roadrunner-square": RadiusRule(1.0, 2.0, 2.0),
}

FUNCTIONS = ("re-z", "z", "z2", "pole", "witness")


def preset(name: str) -> RegionSpec:
    """Roadrunner region at 0 with disks of radius ``4**-n * n**-s`` on the real axis."""
    try:
        return RegionSpec(rule=PRESETS[name])
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def load_region(path: str) -> RegionSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read region file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"region file {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return RegionSpec.from_json(data)


def _region(args) -> RegionSpec:
    if (args.preset is None) == (args.region is None):
        raise ValidationError("give exactly one of --preset or --region")
    return preset(args.preset) if args.preset else load_region(args.region)


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _dimension(args) -> float:
    if args.alpha is None:
        return 1.0
    if not 0.0 < args.alpha < 1.0:
        raise ValidationError(f"--alpha must lie in (0, 1), got {args.alpha}")
    return 1.0 + args.alpha


def _space(args) -> str:
    return "A0(X)" if args.alpha is None else f"lip-{args.alpha:g}(X)"


def _fmt(x) -> str:
    return repr(float(x))


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_criterion(args) -> str:
    region = _region(args)
    d = _dimension(args)
    v = bpd_verdict(CriterionQuery(region, args.t, d, args.horizon), args.depth)
    n = v.numeric
    if args.format == "json":
        return _dump_json(v.to_json())
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "term_lower", "term_upper", "content_lower", "content_upper"])
        for k, (lo, up, c) in enumerate(zip(n.terms_lower, n.terms_upper, n.contents), 1):
            w.writerow([k, _fmt(lo), _fmt(up), _fmt(c.lower), _fmt(c.upper)])
        return buf.getvalue()
    head = {True: "admits", False: "does NOT admit", None: "inconclusive: cannot decide"}[v.admits]
    lines = [f"{head} order-{args.t} BPD on {_space(args)} at x0 = {region.x0}"]
    if v.symbolic is not None:
        c = v.symbolic
        lines.append(f"certificate: {c.verdict.value}; {c.reason} "
                     f"(exponent t+1-beta*d = {c.exponent:g}, log power s*d = {c.log_power:g}, "
                     f"coefficient c^d = {c.coefficient:g})")
    tail = "unknown" if n.tail_bound is None or math.isinf(n.tail_bound) else f"{n.tail_bound:.6g}"
    lines.append(f"partial sum N={n.horizon}: [{n.partial_sum_lower:.12g}, {n.partial_sum_upper:.12g}]; "
                 f"tail bound {tail}; numeric route {n.verdict.value} ({n.verdict_source.value})")
    lines.append(f"{'n':>4}  {'term_lower':>22}  {'term_upper':>22}  method")
    for k, (lo, up, c) in enumerate(zip(n.terms_lower, n.terms_upper, n.contents), 1):
        lines.append(f"{k:>4}  {lo:>22.15g}  {up:>22.15g}  {c.method.value}")
    lines.extend(f"note: {s}" for s in n.notes)
    return "\n".join(lines) + "\n"


def cmd_content(args) -> str:
    region = _region(args)
    d = _dimension(args)
    rows = [(n, annulus_content(region, n, d, args.depth)) for n in range(1, args.horizon + 1)]
    if args.format == "json":
        return _dump_json({"dimension": d, "annuli": [{"n": n, **c.to_json()} for n, c in rows]})
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "lower", "upper", "method"])
        for n, c in rows:
            w.writerow([n, _fmt(c.lower), _fmt(c.upper), c.method.value])
        return buf.getvalue()
    lines = [f"content of A_n minus X, dimension {d:g}", f"{'n':>4}  {'lower':>22}  {'upper':>22}  method"]
    lines += [f"{n:>4}  {c.lower:>22.15g}  {c.upper:>22.15g}  {c.method.value}" for n, c in rows]
    return "\n".join(lines) + "\n"


def _settings(args) -> ProbeSettings:
    return ProbeSettings(nodes=args.nodes)


def _epsilon(args):
    return LogDecay(args.kappa)


def _table(columns, rows, fmt, title) -> str:
    if fmt == "csv":
        return rows_to_csv(columns, rows)
    if fmt == "json":
        return _dump_json({"columns": columns,
                           "rows": [dict(zip(columns, map(_json_safe, r.as_list()))) for r in rows]})
    lines = [title, "  ".join(f"{c:>22}" for c in columns)]
    for r in rows:
        lines.append("  ".join(f"{v:>22.15g}" if isinstance(v, float) else f"{v:>22}" for v in r.as_list()))
    return "\n".join(lines) + "\n"


def cmd_witness(args) -> str:
    region = _region(args)
    if args.alpha is not None:
        raise ValidationError("witness blocks are built for the VMO criterion only; drop --alpha")
    rows = witness_report(region, args.t, args.starts, _epsilon(args), args.atoms, _settings(args))
    return _table(WITNESS_COLUMNS, rows, args.format, f"witness blocks, t={args.t}")


def cmd_ratios(args) -> str:
    region = _region(args)
    rows = ratio_table(region, args.t, args.depths, _settings(args), args.family)
    return _table(RATIO_COLUMNS, rows, args.format, f"derivative/seminorm ratios ({args.family}), t={args.t}")


def _function(args, region):
    name = args.function
    if name == "re-z":
        return (lambda z: z.real + 0j), False
    if name == "z":
        return (lambda z: z), False
    if name == "z2":
        return (lambda z: z * z), False
    if name == "pole":
        a = complex(*args.pole)
        return (lambda z: 1.0 / (z - a)), False
    block = build_block(region, args.t, args.start, _epsilon(args), args.atoms)
    return block.g.sampled(), True


def cmd_bmo_norm(args) -> str:
    region = _region(args)
    if args.function == "pole" and args.pole is None:
        raise ValidationError("--function pole needs --pole RE IM")
    f, restrict = _function(args, region)
    scales = tuple(args.scales) if args.scales else tuple(2.0 ** -j for j in range(9))
    res = bmo_region_norm(f, region, scales, args.grid, args.nodes, args.area_grid,
                          restrict_to_region=restrict or args.restrict)
    if args.format == "json":
        return _dump_json(res.to_json())
    if args.format == "csv":
        return res.seminorm.modulus_csv()
    lines = [f"BMO(X) norm estimate {res.value:.12g} = seminorm {res.seminorm.bmo_seminorm_estimate:.12g}"
             f" + |integral| {abs(res.integral):.12g}",
             f"area(X) {res.area:.9g}; squares examined {res.seminorm.cubes_examined}; "
             f"vmo consistent {res.seminorm.vmo_consistent}",
             f"{'delta':>22}  {'modulus':>22}"]
    lines += [f"{d:>22.15g}  {w:>22.15g}" for d, w in res.seminorm.modulus_samples]
    return "\n".join(lines) + "\n"


def cmd_preset(args) -> str:
    return _dump_json(preset(args.name).to_json())


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpdvmo", description="Bounded point derivations on analytic VMO spaces.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, region=True):
        if region:
            p.add_argument("--preset", choices=sorted(PRESETS), help="built-in roadrunner region")
            p.add_argument("--region", metavar="FILE", help="region JSON file")
        p.add_argument("--t", type=int, default=1, help="derivation order (default 1)")
        p.add_argument("--alpha", type=float, help="use the little-Lipschitz criterion with this alpha")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--output", "-o", metavar="PATH", help="write the report here instead of stdout")

    p = sub.add_parser("criterion", help="decide the content series criterion")
    common(p)
    p.add_argument("--horizon", type=_positive(int), default=20)
    p.add_argument("--depth", type=_positive(int), help="dyadic cover search depth")
    p.set_defaults(func=cmd_criterion)

    p = sub.add_parser("content", help="content intervals of A_n minus X")
    common(p)
    p.add_argument("--horizon", type=_positive(int), default=10)
    p.add_argument("--depth", type=_positive(int))
    p.set_defaults(func=cmd_content)

    def probe_knobs(p):
        p.add_argument("--nodes", type=_positive(int), default=DEFAULT_NODES, help="quadrature nodes per axis")
        p.add_argument("--atoms", type=_positive(int), default=DEFAULT_ATOMS, help="atoms per circle")
        p.add_argument("--kappa", type=_positive(float), default=0.2,
                       help="epsilon_n = 1/(1 + kappa log(n+1)) (default 0.2)")

    p = sub.add_parser("witness", help="witness block table")
    common(p)
    p.add_argument("--starts", type=_positive(int), nargs="+", default=[1, 2, 3, 4, 5, 6])
    probe_knobs(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("ratios", help="derivative to seminorm ratio table")
    common(p)
    p.add_argument("--depths", type=_positive(int), nargs="+", default=[2, 3, 4, 5, 6, 7, 8])
    p.add_argument("--family", choices=RATIO_FAMILIES, default="pole-sum")
    probe_knobs(p)
    p.set_defaults(func=cmd_ratios)

    p = sub.add_parser("bmo-norm", help="BMO(X) norm estimate of a test function")
    common(p)
    p.add_argument("--function", choices=FUNCTIONS, default="re-z")
    p.add_argument("--pole", type=float, nargs=2, metavar=("RE", "IM"))
    p.add_argument("--start", type=_positive(int), default=1, help="block start for --function witness")
    p.add_argument("--scales", type=_positive(float), nargs="+")
    p.add_argument("--grid", type=_positive(int), default=16, help="square positions per axis and scale")
    p.add_argument("--area-grid", type=_positive(int), default=1024)
    p.add_argument("--restrict", action="store_true", help="probe only squares inside X")
    probe_knobs(p)
    p.set_defaults(func=cmd_bmo_norm)

    p = sub.add_parser("preset", help="print a preset region as JSON")
    p.add_argument("name")
    p.set_defaults(func=cmd_preset)
    return ap


def run(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "t", 0) < 0:
            raise ValidationError(f"--t must be >= 0, got {args.t}")
        text = args.func(args)
        out = getattr(args, "output", None)
        if out:
            Path(out).write_text(text)
        else:
            sys.stdout.write(text)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
