"""Command-line interface.

Four subcommands:

* ``analyze`` -- run the test battery on an ``x,y,label`` CSV and emit a
  JSON report (optionally a text rendering and figure files).
* ``simulate`` -- draw one synthetic point pattern to a CSV.
* ``size`` -- empirical size sweep under CSR or random labeling.
* ``power`` -- empirical power sweep under a segregation or association
  alternative.

Everything user-facing is 1-based: cells, focus classes, and targets
like ``cell(1,1)`` or ``ovr_overall(2)`` count from one, as do the rows
and columns of printed tables. Exit status is 0 on success and 2 on
usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import NnctError
from .experiments import (
    THREE_CLASS_GRID,
    TWO_CLASS_GRID,
    ExperimentSpec,
    parse_target_list,
    run_experiment,
)
from .patterns import (
    ASSOCIATION2_DIVISORS,
    ASSOCIATION3_DIVISORS,
    SEGREGATION2_LEVELS,
    SEGREGATION3_LEVELS,
    PatternSpec,
    association2_radius,
    association3_radii,
    generate,
)
from .points import Rectangle, load_points, save_points
from .report import analyze_points, report_json, report_text
from .stattests import FAMILIES

__all__ = ["main"]

_PATTERN_KINDS = {
    "csr": "csr",
    "rl": "rl_fixed",
    "seg2": "segregation2",
    "seg3": "segregation3",
    "assoc2": "association2",
    "assoc3": "association3",
}
_GRIDS = {"two-class": TWO_CLASS_GRID, "three-class": THREE_CLASS_GRID}


def _parse_families(text: str) -> tuple[str, ...]:
    families = tuple(f.strip() for f in text.split(",") if f.strip())
    for f in families:
        if f not in FAMILIES:
            raise NnctError(f"unknown family {f!r}; choose from {','.join(FAMILIES)}")
    if not families:
        raise NnctError("no families given")
    return families


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise NnctError(f"cannot parse sizes {text!r}; expected e.g. 50,50")
    if not sizes:
        raise NnctError("no sizes given")
    return sizes


def _parse_combos(text: str) -> tuple[tuple[int, ...], ...]:
    return tuple(_parse_sizes(part) for part in text.split(";") if part.strip())


def _parse_region(text: str) -> Rectangle:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) != 4:
        raise NnctError(
            f"cannot parse region {text!r}; expected xmin,ymin,xmax,ymax"
        )
    return Rectangle(*vals)


def _cmd_analyze(args) -> int:
    points = load_points(args.input)
    region = _parse_region(args.region) if args.region else None
    report = analyze_points(
        points,
        families=_parse_families(args.families),
        alpha=args.alpha,
        nmc=args.nmc,
        seed=args.seed,
        null=args.null,
        region=region,
        strict_patterns=args.strict_patterns,
    )
    js = report_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(js)
    if args.text:
        sys.stdout.write(report_text(report))
    elif not args.out:
        sys.stdout.write(js)
    if args.figures:
        from .figures import render_analysis_figures

        for path in render_analysis_figures(points, report, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _simulate_pattern(args) -> PatternSpec:
    kind = _PATTERN_KINDS[args.pattern]
    sizes = _parse_sizes(args.sizes)
    if kind == "csr":
        return PatternSpec(kind, sizes)
    if kind == "rl_fixed":
        return PatternSpec(kind, sizes, rl_case=args.case or 1)
    if kind == "segregation2":
        s = SEGREGATION2_LEVELS.get(args.level) if args.level else args.s
        if s is None:
            raise NnctError(
                "seg2 needs --s or --level "
                f"({', '.join(SEGREGATION2_LEVELS)})"
            )
        return PatternSpec(kind, sizes, s=s)
    if kind == "segregation3":
        s = SEGREGATION3_LEVELS.get(args.level) if args.level else args.s
        if s is None:
            raise NnctError(
                "seg3 needs --s or --level "
                f"({', '.join(SEGREGATION3_LEVELS)})"
            )
        return PatternSpec(kind, sizes, s=s)
    if kind == "association2":
        if args.level:
            radii = (association2_radius(sum(sizes), args.level),)
        elif args.r is not None:
            radii = (args.r,)
        else:
            raise NnctError(
                "assoc2 needs --r or --level "
                f"({', '.join(ASSOCIATION2_DIVISORS)})"
            )
        return PatternSpec(kind, sizes, radii=radii)
    if args.level:
        radii = association3_radii(sum(sizes), args.level)
    elif args.ry is not None and args.rz is not None:
        radii = (args.ry, args.rz)
    else:
        raise NnctError(
            "assoc3 needs --ry and --rz, or --level "
            f"({', '.join(ASSOCIATION3_DIVISORS)})"
        )
    return PatternSpec(kind, sizes, radii=radii)


def _cmd_simulate(args) -> int:
    spec = replace(_simulate_pattern(args), seed=args.seed)
    save_points(generate(spec), args.out)
    return 0


def _experiment_spec(args, mode: str) -> ExperimentSpec:
    if args.combos:
        combos = _parse_combos(args.combos)
    elif args.sizes:
        combos = (_parse_sizes(args.sizes),)
    elif args.grid:
        combos = _GRIDS[args.grid]
    else:
        raise NnctError("need --combos, --sizes, or --grid")
    kind = _PATTERN_KINDS[args.pattern]
    level = getattr(args, "level", None)
    template_sizes = combos[0]
    if kind == "csr":
        pattern = PatternSpec(kind, template_sizes)
    elif kind == "rl_fixed":
        pattern = PatternSpec(kind, template_sizes, rl_case=args.case or 1)
    elif kind in ("segregation2", "segregation3"):
        s = args.s
        if s is None and level:
            table = (SEGREGATION2_LEVELS if kind == "segregation2"
                     else SEGREGATION3_LEVELS)
            if level not in table:
                raise NnctError(
                    f"unknown level {level!r}; choose from {', '.join(table)}"
                )
            s = table[level]
        if s is None:
            raise NnctError(f"{args.pattern} needs --s or --level")
        pattern = PatternSpec(kind, template_sizes, s=s)
    elif kind == "association2":
        if level:
            radii = (association2_radius(sum(template_sizes), level),)
        elif args.r is not None:
            radii = (args.r,)
            level = None
        else:
            raise NnctError("assoc2 needs --r or --level")
        pattern = PatternSpec(kind, template_sizes, radii=radii)
    else:
        if level:
            radii = association3_radii(sum(template_sizes), level)
        elif args.ry is not None and args.rz is not None:
            radii = (args.ry, args.rz)
        else:
            raise NnctError("assoc3 needs --ry and --rz, or --level")
        pattern = PatternSpec(kind, template_sizes, radii=radii)
    # Explicit shift/radius flags pin the parameter across combinations;
    # a named level rescales association radii with each total size.
    pattern_level = level if (level and args.s is None
                              and getattr(args, "r", None) is None
                              and getattr(args, "ry", None) is None) else None
    return ExperimentSpec(
        pattern=pattern,
        combos=combos,
        targets=parse_target_list(args.targets),
        families=_parse_families(args.families),
        alpha=args.alpha,
        n_rep=args.nrep,
        seed=args.seed,
        mode=mode,
        route=args.route,
        route_n_rep=args.route_nrep,
        pattern_level=pattern_level,
        two_sided_thresholds=args.two_sided_thresholds,
        rl_redraw=getattr(args, "redraw_locations", False),
    )


def _cmd_experiment(args, mode: str) -> int:
    spec = _experiment_spec(args, mode)
    result = run_experiment(spec, workers=args.workers)
    if args.out:
        result.save_csv(args.out)
    else:
        sys.stdout.write(result.to_csv())
    if args.figures:
        from .figures import render_experiment_figures

        for path in render_experiment_figures(result, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _add_experiment_args(sub: argparse.ArgumentParser, patterns: list[str],
                         default_targets: str) -> None:
    sub.add_argument("--pattern", required=True, choices=patterns)
    sub.add_argument("--combos",
                     help="semicolon-separated size lists, e.g. '10,10;30,30'")
    sub.add_argument("--sizes",
                     help="single size combination, e.g. 50,50")
    sub.add_argument("--grid", choices=sorted(_GRIDS),
                     help="a standard size sweep instead of --combos")
    sub.add_argument("--families", "--tests", dest="families", default="D,I,III",
                     help="comma-separated families (default D,I,III)")
    sub.add_argument("--targets", default=default_targets,
                     help=f"comma-separated targets (default {default_targets})")
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument("--nrep", type=int, default=1000,
                     help="replicate datasets per combination")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--route", choices=("asymptotic", "mc", "rand"),
                     default="asymptotic",
                     help="p-value route applied to every replicate")
    sub.add_argument("--route-nrep", type=int, default=99,
                     help="inner replicates when --route is mc or rand")
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--out", help="CSV output path (default: stdout)")
    sub.add_argument("--figures", metavar="DIR",
                     help="also render rejection-rate figures into DIR")
    sub.add_argument("--two-sided-thresholds", action="store_true",
                     help="wider acceptance band (alpha/2 in each tail)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnct",
        description="Nearest-neighbor contingency table tests of spatial "
                    "segregation and association.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="test one x,y,label CSV dataset")
    p.add_argument("input", help="CSV file with an x,y,label header row")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--families", default="D,I,III")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--nmc", type=int, default=0,
                   help="Monte Carlo replicates (0 = asymptotic only)")
    p.add_argument("--seed", type=int, help="required when --nmc > 0")
    p.add_argument("--null", choices=("csr", "rl"), default="csr",
                   help="Monte Carlo null: resample locations (csr) or "
                        "permute labels (rl)")
    p.add_argument("--region", help="xmin,ymin,xmax,ymax sampling window "
                                    "for --null csr")
    p.add_argument("--text", action="store_true",
                   help="print a text rendering instead of JSON on stdout")
    p.add_argument("--figures", metavar="DIR",
                   help="render scatter and z-heatmap figures into DIR")
    p.add_argument("--strict-patterns", action="store_true",
                   help="strict inequalities in the descriptive profile")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="draw one synthetic pattern to CSV")
    p.add_argument("--pattern", required=True, choices=sorted(_PATTERN_KINDS))
    p.add_argument("--sizes", required=True, help="points per class, e.g. 50,50")
    p.add_argument("--case", type=int, help="rl location preset number")
    p.add_argument("--s", type=float, help="segregation shift")
    p.add_argument("--r", type=float, help="assoc2 offspring radius")
    p.add_argument("--ry", type=float, help="assoc3 class-2 radius")
    p.add_argument("--rz", type=float, help="assoc3 class-3 radius")
    p.add_argument("--level", help="named alternative level instead of "
                                   "an explicit shift/radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("size", help="empirical size sweep under a null pattern")
    _add_experiment_args(p, ["csr", "rl"], "cell(1,1),cell(2,2),overall")
    p.add_argument("--case", type=int, help="rl location preset number")
    p.add_argument("--redraw-locations", action="store_true",
                   help="redraw rl locations every replicate instead of "
                        "fixing them per combination")
    p.set_defaults(func=lambda a: _cmd_experiment(a, "size"), s=None, r=None,
                   ry=None, rz=None, level=None)

    p = sub.add_parser("power", help="empirical power sweep under an alternative")
    _add_experiment_args(p, ["seg2", "seg3", "assoc2", "assoc3"],
                         "cell(1,1),overall")
    p.add_argument("--level", help="named alternative level")
    p.add_argument("--s", type=float, help="explicit segregation shift")
    p.add_argument("--r", type=float, help="explicit assoc2 radius")
    p.add_argument("--ry", type=float, help="explicit assoc3 class-2 radius")
    p.add_argument("--rz", type=float, help="explicit assoc3 class-3 radius")
    p.set_defaults(func=lambda a: _cmd_experiment(a, "power"), case=None)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NnctError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
