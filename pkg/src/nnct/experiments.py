"""Empirical size and power experiments over synthetic patterns.

An :class:`ExperimentSpec` names one pattern family, a list of class-size
combinations, the tests to run (families x targets), and a replicate
budget. :func:`run_experiment` draws ``n_rep`` independent datasets per
combination, applies every requested test at level ``alpha``, and tallies
rejection rates. In ``size`` mode each rate is judged against a binomial
band around ``alpha`` (see :func:`size_thresholds`); in ``power`` mode the
raw rates are reported without a verdict.

Reproducibility contract: given the same spec and seed, the emitted CSV
is byte-identical across runs *and* across worker counts. Every
replicate owns a counter-derived random stream keyed by
``(combo, stream, replicate)``, so the partition of replicates into
worker chunks cannot change any draw, and the per-chunk tallies are
plain integer sums, which commute.

Rejection uses ``p <= alpha``. Replicates on which a statistic is
degenerate (for example a zero-variance cell, or family IV with a
singleton class) are dropped from that test's denominator; the CSV's
``n_rep`` column records the denominator actually used.
"""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .contingency import collapse_one_vs_rest
from .errors import DegenerateStatisticError, ValidationError
from .inference import McConfig, _ContextTester, derive_seed, mc_pvalues, replicate_rng
from .patterns import (
    SEGREGATION2_LEVELS,
    SEGREGATION3_LEVELS,
    PatternSpec,
    association2_radius,
    association3_radii,
    generate,
    relabel,
    rl_locations,
)
from .stattests import FAMILIES, cell_tests, overall_test

__all__ = [
    "TWO_CLASS_GRID",
    "THREE_CLASS_GRID",
    "CSV_HEADER",
    "TestTarget",
    "parse_target_list",
    "ExperimentSpec",
    "ExperimentRow",
    "ExperimentResult",
    "size_thresholds",
    "run_experiment",
]

# Standard class-size combinations for null (CSR / random labeling)
# calibration sweeps.
TWO_CLASS_GRID = (
    (10, 10), (10, 30), (10, 50), (30, 30),
    (30, 50), (50, 50), (50, 100), (100, 100),
)
THREE_CLASS_GRID = (
    (10, 10, 10), (10, 10, 30), (10, 10, 50), (10, 30, 30), (10, 30, 50),
    (30, 30, 30), (10, 50, 50), (30, 30, 50), (30, 50, 50), (50, 50, 50),
    (50, 50, 100), (50, 100, 100), (100, 100, 100),
)

CSV_HEADER = (
    "pattern", "params", "n1", "n2", "n3", "test_family", "target",
    "alpha", "n_rep", "reject_rate", "verdict", "lower", "upper", "seed",
)

_TARGET_KINDS = ("cell", "overall", "ovr_cell", "ovr_overall")
_CELL_RE = re.compile(r"^cell\((\d+),(\d+)\)$")
_OVR_RE = re.compile(r"^(ovr_cell|ovr_overall)\((\d+)\)$")


@dataclass(frozen=True)
class TestTarget:
    """One statistic to monitor: which test, and which part of it.

    ``cell`` indices and ``focus`` are 0-based here; the textual form
    accepted by :meth:`parse` and produced by :meth:`label` is 1-based,
    matching the command-line interface and the CSV output.

    Kinds
    -----
    * ``cell`` -- the two-sided cell test at ``cell`` of the full table.
    * ``overall`` -- the overall quadratic-form test.
    * ``ovr_cell`` -- the two-sided rest/rest cell test after collapsing
      class ``focus`` against the pooled others.
    * ``ovr_overall`` -- the overall test of that collapsed table.
    """

    # not a unit-test class, despite the name
    __test__ = False

    kind: str
    cell: tuple[int, int] | None = None
    focus: int | None = None

    def __post_init__(self):
        if self.kind not in _TARGET_KINDS:
            raise ValidationError(
                f"unknown target kind {self.kind!r}; expected one of {_TARGET_KINDS}"
            )
        if self.kind == "cell":
            if self.cell is None or len(self.cell) != 2 or min(self.cell) < 0:
                raise ValidationError("cell targets need cell=(i, j), 0-based")
            object.__setattr__(self, "cell", tuple(int(v) for v in self.cell))
        elif self.kind == "overall":
            if self.cell is not None or self.focus is not None:
                raise ValidationError("overall targets take no cell or focus")
        else:
            if self.focus is None or int(self.focus) < 0:
                raise ValidationError(f"{self.kind} targets need a 0-based focus class")
            object.__setattr__(self, "focus", int(self.focus))
            if self.kind == "ovr_cell":
                # The collapsed test always reads the rest/rest cell.
                object.__setattr__(self, "cell", (1, 1))

    @classmethod
    def parse(cls, text: str) -> "TestTarget":
        """Parse the 1-based textual form, e.g. ``cell(1,2)`` or ``ovr_overall(3)``."""
        text = text.strip()
        if text == "overall":
            return cls("overall")
        m = _CELL_RE.match(text)
        if m:
            i, j = int(m.group(1)), int(m.group(2))
            if min(i, j) < 1:
                raise ValidationError(f"cell indices in {text!r} are 1-based")
            return cls("cell", cell=(i - 1, j - 1))
        m = _OVR_RE.match(text)
        if m:
            focus = int(m.group(2))
            if focus < 1:
                raise ValidationError(f"focus in {text!r} is 1-based")
            return cls(m.group(1), focus=focus - 1)
        raise ValidationError(
            f"cannot parse target {text!r}; expected cell(i,j), overall, "
            "ovr_cell(k), or ovr_overall(k)"
        )

    def label(self) -> str:
        """The 1-based textual form used in CSV rows."""
        if self.kind == "cell":
            return f"cell({self.cell[0] + 1},{self.cell[1] + 1})"
        if self.kind == "overall":
            return "overall"
        return f"{self.kind}({self.focus + 1})"


def parse_target_list(text: str) -> tuple[TestTarget, ...]:
    """Split a comma-separated target list, respecting parentheses."""
    targets, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            targets.append(text[start:pos])
            start = pos + 1
    targets.append(text[start:])
    parsed = tuple(TestTarget.parse(t) for t in targets if t.strip())
    if not parsed:
        raise ValidationError("no targets given")
    return parsed


def size_thresholds(alpha: float, n_rep: int,
                    two_sided: bool = False) -> tuple[float, float]:
    """Binomial acceptance band around the nominal level.

    With ``n_rep`` replicates an exact-size test rejects with frequency
    ``alpha`` give or take ``sqrt(alpha (1 - alpha) / n_rep)``. The band
    puts ``alpha`` of the normal tail beyond each edge (or ``alpha/2``
    with ``two_sided=True``, which widens it). Rates below the band are
    flagged conservative, above it liberal.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must be strictly between 0 and 1")
    if n_rep < 1:
        raise ValidationError("n_rep must be at least 1")
    q = 1.0 - (alpha / 2.0 if two_sided else alpha)
    half = float(ndtri(q)) * math.sqrt(alpha * (1.0 - alpha) / n_rep)
    return alpha - half, alpha + half


@dataclass(frozen=True)
class ExperimentSpec:
    """A full experiment: pattern x combinations x tests x replicates.

    ``pattern`` is a template; its ``sizes`` are replaced by each entry
    of ``combos`` in turn. For association patterns, ``pattern_level``
    recomputes the offspring radii from each combination's total size,
    since those alternatives are defined relative to ``n``; for
    segregation patterns it looks the shift up in the named-level
    tables. Leave it ``None`` to keep the template's own ``s``/``radii``
    fixed across combinations.

    ``route`` selects how p-values are produced: ``asymptotic`` (normal
    and chi-square references), ``rand`` (label permutation), or ``mc``
    (resampled locations), the latter two with ``route_n_rep`` inner
    replicates each.

    ``rl_redraw`` applies to ``rl_fixed`` patterns: by default the
    locations are drawn once per combination and only labels vary across
    replicates; set it to redraw locations every replicate.
    """

    pattern: PatternSpec
    combos: tuple[tuple[int, ...], ...]
    targets: tuple[TestTarget, ...]
    families: tuple[str, ...] = ("D", "I", "III")
    alpha: float = 0.05
    n_rep: int = 1000
    seed: int = 0
    mode: str = "size"
    route: str = "asymptotic"
    route_n_rep: int = 99
    pattern_level: str | None = None
    two_sided_thresholds: bool = False
    rl_redraw: bool = False

    def __post_init__(self):
        combos = tuple(tuple(int(v) for v in c) for c in self.combos)
        object.__setattr__(self, "combos", combos)
        if not combos:
            raise ValidationError("need at least one class-size combination")
        if len({len(c) for c in combos}) != 1:
            raise ValidationError("all combinations must have the same class count")
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.targets:
            raise ValidationError("need at least one target")
        object.__setattr__(self, "families", tuple(self.families))
        if not self.families:
            raise ValidationError("need at least one test family")
        for f in self.families:
            if f not in FAMILIES:
                raise ValidationError(
                    f"unknown test family {f!r}; expected one of {FAMILIES}"
                )
        if len(set(self.families)) != len(self.families):
            raise ValidationError("duplicate test families")
        labels = [t.label() for t in self.targets]
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate targets")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must be strictly between 0 and 1")
        if int(self.n_rep) < 1:
            raise ValidationError("n_rep must be at least 1")
        object.__setattr__(self, "n_rep", int(self.n_rep))
        if self.mode not in ("size", "power"):
            raise ValidationError("mode must be 'size' or 'power'")
        if self.route not in ("asymptotic", "mc", "rand"):
            raise ValidationError("route must be 'asymptotic', 'mc', or 'rand'")
        if self.route != "asymptotic" and int(self.route_n_rep) < 1:
            raise ValidationError(f"route {self.route!r} needs route_n_rep >= 1")
        object.__setattr__(self, "route_n_rep", int(self.route_n_rep))
        object.__setattr__(self, "seed", int(self.seed))
        m = len(combos[0])
        for t in self.targets:
            if t.kind == "cell" and max(t.cell) >= m:
                raise ValidationError(
                    f"target {t.label()} is outside the {m}x{m} table"
                )
            if t.focus is not None and t.focus >= m:
                raise ValidationError(
                    f"target {t.label()} names a focus beyond class {m}"
                )
        # Fail fast on template/combination mismatches (wrong class count
        # for the pattern kind, unknown level name, and so on).
        for combo in combos:
            _combo_pattern(self, combo)

    @property
    def m(self) -> int:
        return len(self.combos[0])


def _combo_pattern(spec: ExperimentSpec, combo: tuple[int, ...]) -> PatternSpec:
    """The template pattern instantiated at one size combination."""
    pat = spec.pattern.with_sizes(combo)
    level = spec.pattern_level
    if level is None:
        return pat
    if pat.kind == "association2":
        return replace(pat, radii=(association2_radius(pat.n, level),))
    if pat.kind == "association3":
        return replace(pat, radii=association3_radii(pat.n, level))
    if pat.kind == "segregation2":
        if level not in SEGREGATION2_LEVELS:
            raise ValidationError(f"unknown segregation level {level!r}")
        return replace(pat, s=SEGREGATION2_LEVELS[level])
    if pat.kind == "segregation3":
        if level not in SEGREGATION3_LEVELS:
            raise ValidationError(f"unknown segregation level {level!r}")
        return replace(pat, s=SEGREGATION3_LEVELS[level])
    raise ValidationError(
        f"pattern_level has no meaning for {pat.kind!r} patterns"
    )


def _params_string(spec: ExperimentSpec, pat: PatternSpec) -> str:
    parts = []
    if spec.pattern_level is not None:
        parts.append(f"level={spec.pattern_level}")
    if pat.kind in ("segregation2", "segregation3"):
        parts.append(f"s={pat.s:g}")
    elif pat.kind == "association2":
        parts.append(f"r={pat.radii[0]:.6g}")
    elif pat.kind == "association3":
        parts.append(f"ry={pat.radii[0]:.6g}")
        parts.append(f"rz={pat.radii[1]:.6g}")
    elif pat.kind == "rl_fixed":
        parts.append("case=custom" if pat.rectangles is not None
                     else f"case={pat.rl_case}")
        if spec.rl_redraw:
            parts.append("redraw=1")
    return ";".join(parts)


@dataclass(frozen=True)
class ExperimentRow:
    """One (combination, family, target) tally."""

    pattern: str
    params: str
    sizes: tuple[int, ...]
    family: str
    target: str
    alpha: float
    n_valid: int
    n_reject: int
    seed: int
    lower: float | None = None
    upper: float | None = None

    @property
    def reject_rate(self) -> float | None:
        if self.n_valid == 0:
            return None
        return self.n_reject / self.n_valid

    @property
    def verdict(self) -> str | None:
        """Size verdict against the binomial band; None in power mode."""
        rate = self.reject_rate
        if rate is None or self.lower is None:
            return None
        if rate > self.upper:
            return "liberal"
        if rate < self.lower:
            return "conservative"
        return "ok"


@dataclass(frozen=True)
class ExperimentResult:
    """All tallies of one experiment, in deterministic row order."""

    spec: ExperimentSpec
    rows: tuple[ExperimentRow, ...]

    def find(self, sizes: tuple[int, ...] | None = None,
             family: str | None = None,
             target: str | None = None) -> tuple[ExperimentRow, ...]:
        """Rows matching the given coordinates (None matches anything)."""
        out = []
        for r in self.rows:
            if sizes is not None and r.sizes != tuple(sizes):
                continue
            if family is not None and r.family != family:
                continue
            if target is not None and r.target != target:
                continue
            out.append(r)
        return tuple(out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            n3 = r.sizes[2] if len(r.sizes) > 2 else ""
            rate = "" if r.reject_rate is None else f"{r.reject_rate:.6f}"
            writer.writerow([
                r.pattern, r.params, r.sizes[0], r.sizes[1], n3,
                r.family, r.target, f"{r.alpha:g}", r.n_valid, rate,
                r.verdict or "",
                "" if r.lower is None else f"{r.lower:.4f}",
                "" if r.upper is None else f"{r.upper:.4f}",
                r.seed,
            ])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _tally_asymptotic(spec: ExperimentSpec, tester: _ContextTester,
                      nnct, counts: dict) -> None:
    """Add one replicate's asymptotic accept/reject outcomes to ``counts``."""
    want_cell = [t for t in spec.targets if t.kind == "cell"]
    want_overall = any(t.kind == "overall" for t in spec.targets)
    ovr_targets = [t for t in spec.targets if t.kind.startswith("ovr_")]
    collapsed_tables = {}
    for t in ovr_targets:
        if t.focus not in collapsed_tables:
            collapsed_tables[t.focus] = collapse_one_vs_rest(nnct, t.focus)
    for f in spec.families:
        if want_cell:
            try:
                p_two = cell_tests(f, nnct, tester.moments).p_two
                for t in want_cell:
                    _tick(counts, f, t, p_two[t.cell], spec.alpha)
            except DegenerateStatisticError:
                for t in want_cell:
                    _tick(counts, f, t, None, spec.alpha)
        if want_overall:
            t = next(t for t in spec.targets if t.kind == "overall")
            try:
                p = overall_test(f, nnct, tester.moments).p_asy
            except DegenerateStatisticError:
                p = None
            _tick(counts, f, t, p, spec.alpha)
        for t in ovr_targets:
            table2 = collapsed_tables[t.focus]
            mom2 = tester.collapsed[t.focus]
            try:
                if t.kind == "ovr_cell":
                    p = float(cell_tests(f, table2, mom2).p_two[1, 1])
                else:
                    p = overall_test(f, table2, mom2).p_asy
            except DegenerateStatisticError:
                p = None
            _tick(counts, f, t, p, spec.alpha)


def _tick(counts: dict, family: str, target: TestTarget,
          p: float | None, alpha: float) -> None:
    cell = counts[(family, target.label())]
    if p is None or not np.isfinite(p):
        cell[1] += 1
    elif p <= alpha:
        cell[0] += 1


def _tally_resampled(spec: ExperimentSpec, points, foci: tuple[int, ...],
                     counts: dict, inner_seed: int) -> None:
    """Add one replicate's outcomes using permutation/resampling p-values."""
    config = McConfig(n_rep=spec.route_n_rep, seed=inner_seed)
    sweep = mc_pvalues(points, spec.families, config, mode=spec.route,
                       include_one_vs_rest=bool(foci))
    for f in spec.families:
        for t in spec.targets:
            if t.kind == "cell":
                p = float(sweep.cell[f][t.cell])
            elif t.kind == "overall":
                p = float(sweep.overall[f])
            else:
                pos = sweep.foci.index(t.focus)
                vec = sweep.ovr_cell if t.kind == "ovr_cell" else sweep.ovr_overall
                p = float(vec[f][pos])
            _tick(counts, f, t, p if np.isfinite(p) else None, spec.alpha)


def _chunk_counts(spec: ExperimentSpec, combo_index: int,
                  start: int, stop: int) -> dict:
    """Tallies for replicates [start, stop) of one size combination.

    Every replicate draws from its own counter-derived stream, so the
    result depends only on the replicate indices covered, not on how
    they were grouped into chunks.
    """
    combo = spec.combos[combo_index]
    pat = _combo_pattern(spec, combo)
    foci = tuple(sorted({t.focus for t in spec.targets
                         if t.kind.startswith("ovr_")}))
    counts = {(f, t.label()): [0, 0]
              for f in spec.families for t in spec.targets}
    fixed_coords = None
    if pat.kind == "rl_fixed" and not spec.rl_redraw:
        fixed_coords = rl_locations(pat, replicate_rng(spec.seed, combo_index, 1, 0))
    tester = None
    for rep in range(start, stop):
        rng = replicate_rng(spec.seed, combo_index, 0, rep)
        if fixed_coords is not None:
            points = relabel(fixed_coords, pat.sizes, rng, pat.names())
        else:
            points = generate(pat, rng)
        if spec.route == "asymptotic":
            if fixed_coords is None or tester is None:
                # Fresh coordinates need fresh moments; fixed coordinates
                # share one moment set across all relabelings.
                tester = _ContextTester.from_points(points, spec.families, foci)
            _tally_asymptotic(spec, tester, tester.table(points.labels), counts)
        else:
            _tally_resampled(spec, points, foci, counts,
                             derive_seed(spec.seed, combo_index, 2, rep))
    return counts


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Run the experiment, optionally fanning replicates out to processes.

    ``workers`` only changes wall-clock time: tallies are integer sums
    over independently seeded replicates, so the result -- including the
    CSV byte stream -- is identical for any worker count.
    """
    workers = max(1, int(workers))
    n_combo = len(spec.combos)
    totals = [{(f, t.label()): [0, 0] for f in spec.families
               for t in spec.targets} for _ in range(n_combo)]

    def _merge(combo_index: int, part: dict) -> None:
        for key, (rej, deg) in part.items():
            totals[combo_index][key][0] += rej
            totals[combo_index][key][1] += deg

    if workers == 1:
        for ci in range(n_combo):
            _merge(ci, _chunk_counts(spec, ci, 0, spec.n_rep))
    else:
        chunk = math.ceil(spec.n_rep / workers)
        jobs = [(ci, lo, min(lo + chunk, spec.n_rep))
                for ci in range(n_combo)
                for lo in range(0, spec.n_rep, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(ci, pool.submit(_chunk_counts, spec, ci, lo, hi))
                       for ci, lo, hi in jobs]
            for ci, fut in futures:
                _merge(ci, fut.result())

    rows = []
    for ci, combo in enumerate(spec.combos):
        pat = _combo_pattern(spec, combo)
        params = _params_string(spec, pat)
        for f in spec.families:
            for t in spec.targets:
                n_reject, n_degen = totals[ci][(f, t.label())]
                n_valid = spec.n_rep - n_degen
                lower = upper = None
                if spec.mode == "size" and n_valid > 0:
                    lower, upper = size_thresholds(
                        spec.alpha, n_valid, spec.two_sided_thresholds)
                rows.append(ExperimentRow(
                    pattern=pat.kind, params=params, sizes=combo,
                    family=f, target=t.label(), alpha=spec.alpha,
                    n_valid=n_valid, n_reject=n_reject, seed=spec.seed,
                    lower=lower, upper=upper))
    return ExperimentResult(spec, tuple(rows))
