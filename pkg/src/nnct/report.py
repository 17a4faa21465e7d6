"""Whole-dataset analysis reports.

:func:`analyze_points` runs the full battery on one labeled point set --
table, cell tests, overall tests, one-vs-rest collapses, and the
descriptive segregation profile -- and returns a plain nested dict of
Python scalars and lists. :func:`report_json` and :func:`report_text`
render that dict; the text renderer never looks at the original data, so
anything it prints is also in the JSON.

Conventions: classes, rows, columns, and focus indices are 1-based in
both renderings (matching the command line), while the underlying
library API stays 0-based. Degenerate statistics never abort a report;
the affected family or focus block carries an ``error`` entry instead.
"""

from __future__ import annotations

import json

import numpy as np

from .contingency import build_nnct, classify_patterns
from .errors import DegenerateStatisticError, ValidationError
from .inference import McConfig, mc_pvalues
from .moments import MomentContext, build_moments, family_coefficients
from .neighbors import build_nn_digraph, nn_distances
from .points import LabeledPointSet, Rectangle
from .stattests import cell_tests, one_vs_rest, overall_test

__all__ = ["analyze_points", "report_json", "report_text", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


def _jsonable(value):
    """Recursively convert to plain JSON types; NaN/inf become None."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


def _significant_cells(p: np.ndarray, z: np.ndarray, alpha: float) -> list:
    """1-based [row, col, direction] for every cell with p <= alpha."""
    out = []
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if np.isfinite(p[i, j]) and p[i, j] <= alpha:
                out.append([i + 1, j + 1, "+" if z[i, j] > 0 else "-"])
    return out


def _overall_block(result, extra_p: dict | None = None) -> dict:
    block = {
        "X": float(result.statistic),
        "df": int(result.df),
        "rank": int(result.rank),
        "p_asy": float(result.p_asy),
        "warning": result.rank_warning,
    }
    if extra_p:
        block.update(extra_p)
    return block


def _family_feasible(family: str, ctx: MomentContext) -> str | None:
    """None if usable, else the reason the family is degenerate here."""
    try:
        family_coefficients(family, ctx)
    except DegenerateStatisticError as exc:
        return str(exc)
    return None


def analyze_points(points: LabeledPointSet,
                   families: tuple[str, ...] = ("D", "I", "III"),
                   alpha: float = 0.05,
                   nmc: int = 0,
                   seed: int | None = None,
                   null: str = "csr",
                   region: Rectangle | None = None,
                   include_one_vs_rest: bool = True,
                   strict_patterns: bool = False) -> dict:
    """Run every requested test on one dataset and collect the results.

    Parameters
    ----------
    families : tuple of str
        Test families to run (subset of D, I, II, III, IV).
    alpha : float
        Level used for the ``significant`` cell lists.
    nmc : int
        Monte Carlo replicates; 0 keeps the report purely asymptotic.
    seed : int, optional
        Required when ``nmc > 0``.
    null : str
        Which null the Monte Carlo replicates sample: ``csr`` redraws
        locations uniformly on ``region`` (default: the data's bounding
        box), ``rl`` keeps locations and permutes labels.
    region : Rectangle, optional
        Sampling window for ``null='csr'``.
    include_one_vs_rest : bool
        Add the per-class collapsed analyses.
    strict_patterns : bool
        Use strict inequalities in the descriptive segregation profile.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must be strictly between 0 and 1")
    if null not in ("csr", "rl"):
        raise ValidationError("null must be 'csr' or 'rl'")
    nmc = int(nmc)
    if nmc < 0:
        raise ValidationError("nmc must not be negative")
    if nmc > 0 and seed is None:
        raise ValidationError("Monte Carlo p-values need a seed")
    families = tuple(families)

    graph = build_nn_digraph(points)
    nnct = build_nnct(points, graph)
    ctx = MomentContext.from_graph(points, graph)
    dist = nn_distances(points, graph)
    feasible = tuple(f for f in families if _family_feasible(f, ctx) is None)
    moments = build_moments(ctx, feasible) if feasible else None

    sweep = None
    if nmc > 0:
        mode = "mc" if null == "csr" else "rand"
        config = McConfig(n_rep=nmc, seed=seed, region=region)
        sweep = mc_pvalues(points, feasible, config, mode=mode,
                           include_one_vs_rest=include_one_vs_rest)
    p_key = None if sweep is None else f"p_{sweep.mode}"

    report = {
        "schema_version": SCHEMA_VERSION,
        "alpha": float(alpha),
        "input": {
            "n": int(points.n),
            "m": int(nnct.m),
            "class_names": list(nnct.class_names),
            "class_sizes": [int(v) for v in nnct.row_sums],
            "units": points.units,
        },
        "nn": {
            "mean_distance": dist.mean,
            "sd_distance": dist.sd,
            "shared_nn_pairs": int(graph.shared_nn_pairs),
            "mutual_nn_count": int(graph.mutual_nn_count),
            "in_degree_histogram": [int(v) for v in graph.in_degree_histogram],
        },
        "nnct": {
            "counts": nnct.counts.tolist(),
            "row_sums": nnct.row_sums.tolist(),
            "col_sums": nnct.col_sums.tolist(),
            "pi_hat": nnct.pi_hat.tolist(),
        },
        "families": {},
    }

    for f in families:
        reason = _family_feasible(f, ctx)
        if reason is not None:
            report["families"][f] = {"error": reason}
            continue
        block = {}
        try:
            ct = cell_tests(f, nnct, moments)
        except DegenerateStatisticError as exc:
            block["cell_error"] = str(exc)
        else:
            block.update(
                Z=ct.z.tolist(),
                expected=ct.expected.tolist(),
                p_asy=ct.p_two.tolist(),
                p_left=ct.p_left.tolist(),
                p_right=ct.p_right.tolist(),
                significant=_significant_cells(ct.p_two, ct.z, alpha),
            )
            if sweep is not None and f in sweep.cell:
                block[p_key] = sweep.cell[f]
        try:
            ov = overall_test(f, nnct, moments)
        except DegenerateStatisticError as exc:
            block["overall"] = {"error": str(exc)}
        else:
            block["overall"] = _overall_block(ov)
            if sweep is not None and f in sweep.overall:
                block["overall"][p_key] = sweep.overall[f]
        report["families"][f] = block

    if include_one_vs_rest and nnct.m >= 2:
        blocks = []
        for focus in range(nnct.m):
            entry = {
                "focus": focus + 1,
                "class_name": nnct.class_names[focus],
                "families": {},
            }
            counts_set = False
            for f in families:
                try:
                    res = one_vs_rest(nnct, ctx, focus, families=(f,))
                except DegenerateStatisticError as exc:
                    entry["families"][f] = {"error": str(exc)}
                    continue
                if not counts_set:
                    entry["counts"] = res.nnct.counts.tolist()
                    counts_set = True
                fam = {
                    "Z_rest": res.rest_cell_z[f],
                    "p_asy": float(res.cell[f].p_two[1, 1]),
                    "overall": _overall_block(res.overall[f]),
                }
                if sweep is not None and f in sweep.ovr_cell:
                    pos = sweep.foci.index(focus)
                    fam[p_key] = float(sweep.ovr_cell[f][pos])
                    fam["overall"][p_key] = float(sweep.ovr_overall[f][pos])
                entry["families"][f] = fam
            blocks.append(entry)
        report["one_vs_rest"] = blocks

    profile = classify_patterns(nnct, strict=strict_patterns)
    report["segregation_profile"] = {
        "strict": profile.strict,
        "classes": [
            {
                "class": c.index + 1,
                "name": c.name,
                "label": c.label,
                "segregated_from": [j + 1 for j in c.segregated_from],
                "associated_with": [j + 1 for j in c.associated_with],
            }
            for c in profile.classes
        ],
        "associations": [
            {
                "base": a.base + 1,
                "neighbor": a.neighbor + 1,
                "label": a.label,
            }
            for a in profile.associations
            if a.label != "none"
        ],
    }

    if sweep is not None:
        report["mc"] = {
            "mode": sweep.mode,
            "n_rep": int(sweep.n_rep),
            "seed": int(seed),
            "region": None if region is None else
                [region.xmin, region.ymin, region.xmax, region.ymax],
        }

    return _jsonable(report)


def report_json(report: dict) -> str:
    """Deterministic JSON rendering (sorted keys, no NaN)."""
    return json.dumps(_jsonable(report), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def _fmt_p(p) -> str:
    if p is None:
        return "n/a"
    return f"{p:.4g}"


def _matrix_lines(names, matrix, fmt, col_width=10) -> list[str]:
    head = " " * col_width + "".join(f"{c:>{col_width}}" for c in names)
    lines = [head]
    for name, row in zip(names, matrix):
        cells = "".join(
            f"{'n/a':>{col_width}}" if v is None else f"{fmt(v):>{col_width}}"
            for v in row
        )
        lines.append(f"{name:>{col_width}}{cells}")
    return lines


def report_text(report: dict) -> str:
    """Human-readable rendering of an analysis report dict."""
    inp = report["input"]
    names = [str(c)[:9] for c in inp["class_names"]]
    out = []
    sizes = ", ".join(f"{c}={s}" for c, s in
                      zip(inp["class_names"], inp["class_sizes"]))
    out.append(f"nearest-neighbor contingency analysis: "
               f"n={inp['n']}, {inp['m']} classes ({sizes})")
    if inp.get("units"):
        out.append(f"coordinate units: {inp['units']}")
    nn = report["nn"]
    out.append(
        f"nn distance mean={nn['mean_distance']:.4g} sd={nn['sd_distance']:.4g}; "
        f"shared-neighbor pairs Q={nn['shared_nn_pairs']}, "
        f"mutual-neighbor points R={nn['mutual_nn_count']}"
    )
    out.append("")
    out.append("counts (row = class of point, column = class of its nearest neighbor):")
    out.extend(_matrix_lines(names, report["nnct"]["counts"], lambda v: f"{v:d}"))
    col_line = "".join(f"{v:>10}" for v in report["nnct"]["col_sums"])
    out.append(f"{'col sum':>10}{col_line}")
    out.append("")

    alpha = report["alpha"]
    for f, block in report["families"].items():
        out.append(f"--- family {f} " + "-" * (58 - len(f)))
        if "error" in block:
            out.append(f"  not available: {block['error']}")
            out.append("")
            continue
        if "cell_error" in block:
            out.append(f"  cell tests not available: {block['cell_error']}")
        else:
            out.append("z scores:")
            out.extend(_matrix_lines(names, block["Z"], lambda v: f"{v:.2f}"))
            out.append("two-sided asymptotic p:")
            out.extend(_matrix_lines(names, block["p_asy"], lambda v: f"{v:.3g}"))
            mc_key = next((k for k in ("p_mc", "p_rand") if k in block), None)
            if mc_key is not None:
                out.append(f"two-sided {mc_key} (Monte Carlo):")
                out.extend(_matrix_lines(names, block[mc_key], lambda v: f"{v:.3g}"))
            sig = block["significant"]
            if sig:
                cells = ", ".join(f"({i},{j}){d}" for i, j, d in sig)
                out.append(f"cells with p_asy <= {alpha:g}: {cells}")
            else:
                out.append(f"no cells with p_asy <= {alpha:g}")
        ov = block["overall"]
        if "error" in ov:
            out.append(f"overall test not available: {ov['error']}")
        else:
            line = (f"overall: X = {ov['X']:.4f}, df = {ov['df']}, "
                    f"p_asy = {_fmt_p(ov['p_asy'])}")
            for k in ("p_mc", "p_rand"):
                if k in ov:
                    line += f", {k} = {_fmt_p(ov[k])}"
            out.append(line)
            if ov.get("warning"):
                out.append(f"  warning: {ov['warning']}")
        out.append("")

    for entry in report.get("one_vs_rest", ()):
        out.append(f"--- class {entry['focus']} ({entry['class_name']}) "
                   f"vs pooled rest " + "-" * 20)
        if "counts" in entry:
            c = entry["counts"]
            out.append(f"collapsed counts: [[{c[0][0]}, {c[0][1]}], "
                       f"[{c[1][0]}, {c[1][1]}]]")
        for f, fam in entry["families"].items():
            if "error" in fam:
                out.append(f"  family {f}: not available: {fam['error']}")
                continue
            line = (f"  family {f}: rest-cell z = {fam['Z_rest']:.2f}, "
                    f"p_asy = {_fmt_p(fam['p_asy'])}")
            for k in ("p_mc", "p_rand"):
                if k in fam:
                    line += f", {k} = {_fmt_p(fam[k])}"
            ov = fam["overall"]
            line += (f"; overall X = {ov['X']:.4f}, df = {ov['df']}, "
                     f"p_asy = {_fmt_p(ov['p_asy'])}")
            for k in ("p_mc", "p_rand"):
                if k in ov:
                    line += f", {k} = {_fmt_p(ov[k])}"
            out.append(line)
        out.append("")

    prof = report.get("segregation_profile")
    if prof:
        out.append("--- observed mixing pattern " + "-" * 34)
        name_of = {i + 1: n for i, n in enumerate(inp["class_names"])}
        for c in prof["classes"]:
            line = f"  class {c['class']} ({c['name']}): {c['label']}"
            if c["associated_with"]:
                assoc = ", ".join(name_of[j] for j in c["associated_with"])
                line += f" (drawn toward {assoc})"
            out.append(line)
        for a in prof["associations"]:
            out.append(
                f"  {name_of[a['neighbor']]} shows {a['label']} "
                f"with {name_of[a['base']]}"
            )
        out.append("")

    mc = report.get("mc")
    if mc:
        out.append(f"Monte Carlo: mode={mc['mode']}, n_rep={mc['n_rep']}, "
                   f"seed={mc['seed']}")
        out.append("")
    return "\n".join(out)
