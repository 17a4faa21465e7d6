"""Monte Carlo p-values by label randomization and uniform resimulation.

Two null-sampling modes are provided:

* ``rand`` -- keep every location fixed and permute the class labels
  uniformly at random. The nearest-neighbor digraph, the shared-pair
  count and the mutual-pair count never change, so the moment set is
  computed once and reused across replicates.
* ``mc`` -- keep the labels and redraw every location i.i.d. uniform on
  a rectangle (the data's bounding box unless one is supplied). The
  digraph and all moments are rebuilt per replicate.

Every p-value uses the add-one estimator ``(1 + #exceed) / (n_rep + 1)``,
which never reports zero; ties count as exceedances. Cell statistics are
compared two-sided on the standardized value, overall statistics
one-sided. Replicate ``k`` draws its randomness from a counter-based
stream keyed by ``(seed, k)``, so results are independent of execution
order and worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .contingency import Nnct, collapse_one_vs_rest, counts_from_labels
from .errors import DegenerateStatisticError, ValidationError
from .moments import (
    FAMILIES,
    MomentContext,
    MomentSet,
    build_moments,
    family_coefficients,
)
from .neighbors import build_nn_digraph
from .points import LabeledPointSet, Rectangle
from .stattests import cell_tests, overall_test

__all__ = [
    "McConfig",
    "StatisticSpec",
    "McResult",
    "McPValues",
    "replicate_rng",
    "derive_seed",
    "p_rand",
    "p_mc",
    "mc_pvalues",
]

_STATISTIC_KINDS = ("cell", "overall", "ovr_cell", "ovr_overall")


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based random stream for one replicate.

    The stream is a pure function of ``(seed, key)``: replicate ``k`` of
    a run always sees the same randomness no matter which worker or in
    which order it executes.
    """
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit sub-seed that is a pure function of ``(seed, key)``."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class McConfig:
    """How many null replicates to draw, from which seed, and where.

    ``region`` only matters for resimulation (``p_mc``); ``None`` means
    the bounding box of the data.
    """

    n_rep: int
    seed: int
    region: Rectangle | None = None

    def __post_init__(self):
        if int(self.n_rep) != self.n_rep or self.n_rep < 1:
            raise ValidationError(f"n_rep must be a positive integer, got {self.n_rep}")
        object.__setattr__(self, "n_rep", int(self.n_rep))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class StatisticSpec:
    """Selects one scalar test statistic of a labeled point set.

    kind
        ``cell`` -- the standardized statistic of one cell; ``overall``
        -- the quadratic-form statistic; ``ovr_cell`` / ``ovr_overall``
        -- the same two after collapsing to one focus class against the
        pooled rest.
    family
        One of ``D, I, II, III, IV``.
    cell
        0-based ``(row, col)`` for ``cell``; for ``ovr_cell`` it indexes
        the collapsed 2x2 table and defaults to ``(1, 1)`` (the pooled
        rest against itself, the genuinely new cell).
    focus
        0-based focus class for the ``ovr_*`` kinds.
    """

    kind: str
    family: str
    cell: tuple[int, int] | None = None
    focus: int | None = None

    def __post_init__(self):
        if self.kind not in _STATISTIC_KINDS:
            raise ValidationError(
                f"unknown statistic kind {self.kind!r}; expected one of {_STATISTIC_KINDS}"
            )
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if self.kind == "cell" and self.cell is None:
            raise ValidationError("kind 'cell' needs a (row, col) cell")
        if self.kind.startswith("ovr") and self.focus is None:
            raise ValidationError(f"kind {self.kind!r} needs a focus class")
        if self.kind == "ovr_cell" and self.cell is None:
            object.__setattr__(self, "cell", (1, 1))
        if self.cell is not None:
            object.__setattr__(self, "cell", (int(self.cell[0]), int(self.cell[1])))
        if self.focus is not None:
            object.__setattr__(self, "focus", int(self.focus))

    @property
    def two_sided(self) -> bool:
        """Cell statistics compare on |z|; overall statistics on the value."""
        return self.kind in ("cell", "ovr_cell")


@dataclass(frozen=True)
class McResult:
    """One Monte Carlo p-value with its null sample."""

    p: float
    observed: float
    null_sample: np.ndarray
    n_exceed: int
    two_sided: bool
    mode: str
    n_rep: int
    seed: int


class _ContextTester:
    """Evaluates cell z and overall X repeatedly against one moment set.

    All arithmetic goes through :func:`cell_tests` / :func:`overall_test`
    so replicate statistics are computed exactly like observed ones. The
    collapsed one-vs-rest moment sets share the context's pair counts
    (pooling labels never touches the digraph) and are built once.
    """

    def __init__(self, points: LabeledPointSet, nn_index: np.ndarray,
                 ctx: MomentContext, families: tuple[str, ...],
                 foci: tuple[int, ...] = ()):
        self.class_names = points.class_names
        self.m = ctx.m
        self.ctx = ctx
        self.nn_index = nn_index
        self.families = families
        # Families whose coefficients do not exist for these class sizes
        # (family IV with a singleton class) are left out of the batch
        # build; asking for them later raises the per-family error.
        self.moments = build_moments(ctx, _feasible_families(ctx, families))
        self.collapsed: dict[int, MomentSet] = {}
        for focus in foci:
            n_focus = ctx.class_sizes[focus]
            ctx2 = MomentContext((n_focus, ctx.n - n_focus),
                                 ctx.shared_nn_pairs, ctx.mutual_nn_count)
            self.collapsed[focus] = build_moments(
                ctx2, _feasible_families(ctx2, families))

    @classmethod
    def from_points(cls, points: LabeledPointSet, families: tuple[str, ...],
                    foci: tuple[int, ...] = ()) -> "_ContextTester":
        graph = build_nn_digraph(points)
        ctx = MomentContext.from_graph(points, graph)
        return cls(points, graph.nn_index, ctx, families, foci)

    def table(self, labels: np.ndarray) -> Nnct:
        return Nnct(counts_from_labels(labels, self.nn_index, self.m),
                    self.class_names)

    def z_matrix(self, family: str, nnct: Nnct) -> np.ndarray:
        return cell_tests(family, nnct, self.moments).z

    def x_statistic(self, family: str, nnct: Nnct) -> float:
        return overall_test(family, nnct, self.moments).statistic

    def ovr_z(self, family: str, nnct: Nnct, focus: int) -> np.ndarray:
        return cell_tests(family, collapse_one_vs_rest(nnct, focus),
                          self.collapsed[focus]).z

    def ovr_x(self, family: str, nnct: Nnct, focus: int) -> float:
        return overall_test(family, collapse_one_vs_rest(nnct, focus),
                            self.collapsed[focus]).statistic

    def eval_spec(self, spec: StatisticSpec, nnct: Nnct) -> float:
        if spec.kind == "cell":
            return float(self.z_matrix(spec.family, nnct)[spec.cell])
        if spec.kind == "overall":
            return self.x_statistic(spec.family, nnct)
        if spec.kind == "ovr_cell":
            return float(self.ovr_z(spec.family, nnct, spec.focus)[spec.cell])
        return self.ovr_x(spec.family, nnct, spec.focus)


def _feasible_families(ctx: MomentContext, families: tuple[str, ...]) -> tuple[str, ...]:
    out = []
    for f in families:
        try:
            family_coefficients(f, ctx)
        except DegenerateStatisticError:
            continue
        out.append(f)
    return tuple(out)


def _exceeds(value: float, observed: float, two_sided: bool) -> bool:
    if two_sided:
        return abs(value) >= abs(observed)
    return value >= observed


def _run_single(points: LabeledPointSet,
                statistic: StatisticSpec | Callable[[LabeledPointSet], float],
                config: McConfig, mode: str,
                two_sided: bool | None) -> McResult:
    n = points.n
    is_spec = isinstance(statistic, StatisticSpec)
    if is_spec:
        sided = statistic.two_sided if two_sided is None else bool(two_sided)
        foci = (statistic.focus,) if statistic.focus is not None else ()
        tester = _ContextTester.from_points(points, (statistic.family,), foci)
        observed = tester.eval_spec(statistic, tester.table(points.labels))
    else:
        if not callable(statistic):
            raise ValidationError("statistic must be a StatisticSpec or a callable")
        sided = bool(two_sided) if two_sided is not None else False
        observed = float(statistic(points))

    region = config.region
    if mode == "mc" and region is None:
        region = Rectangle.bounding(points.coords)

    sample = np.empty(config.n_rep, dtype=np.float64)
    n_exceed = 0
    for rep in range(config.n_rep):
        rng = replicate_rng(config.seed, rep)
        if mode == "rand":
            labels = rng.permutation(points.labels)
            if is_spec:
                value = tester.eval_spec(statistic, tester.table(labels))
            else:
                value = float(statistic(points.with_labels(labels)))
        else:
            replicate = LabeledPointSet(region.sample(rng, n), points.labels,
                                        points.class_names, points.units,
                                        _validate=False)
            if is_spec:
                foci = (statistic.focus,) if statistic.focus is not None else ()
                rep_tester = _ContextTester.from_points(
                    replicate, (statistic.family,), foci)
                value = rep_tester.eval_spec(statistic,
                                             rep_tester.table(replicate.labels))
            else:
                value = float(statistic(replicate))
        sample[rep] = value
        if _exceeds(value, observed, sided):
            n_exceed += 1
    p = (1.0 + n_exceed) / (config.n_rep + 1.0)
    return McResult(p=p, observed=observed, null_sample=sample,
                    n_exceed=n_exceed, two_sided=sided, mode=mode,
                    n_rep=config.n_rep, seed=config.seed)


def p_rand(points: LabeledPointSet,
           statistic: StatisticSpec | Callable[[LabeledPointSet], float],
           config: McConfig, two_sided: bool | None = None) -> McResult:
    """Label-randomization p-value (locations fixed, labels permuted).

    ``statistic`` is either a :class:`StatisticSpec` (its sidedness is
    implied: cells two-sided, overall one-sided) or any callable taking a
    point set, compared one-sided unless ``two_sided`` says otherwise.
    """
    return _run_single(points, statistic, config, "rand", two_sided)


def p_mc(points: LabeledPointSet,
         statistic: StatisticSpec | Callable[[LabeledPointSet], float],
         config: McConfig, two_sided: bool | None = None) -> McResult:
    """Resimulation p-value (labels fixed, locations redrawn uniformly).

    Locations are redrawn on ``config.region`` (data bounding box by
    default); the neighbor digraph and all moments are rebuilt for every
    replicate, so the shared/mutual pair counts vary as they should.
    """
    return _run_single(points, statistic, config, "mc", two_sided)


@dataclass(frozen=True)
class McPValues:
    """Monte Carlo p-values for a whole analysis in one sweep.

    ``cell[f]`` is the m x m matrix of two-sided cell p-values for
    family ``f``; ``overall[f]`` the one-sided overall p-value;
    ``ovr_cell[f][k]`` and ``ovr_overall[f][k]`` the collapsed pooled
    (rest, rest) cell and collapsed overall p-values with focus ``k``.
    Statistics that are degenerate on the observed data carry NaN.
    """

    mode: str
    n_rep: int
    seed: int
    foci: tuple[int, ...]
    cell: Mapping[str, np.ndarray]
    overall: Mapping[str, float]
    ovr_cell: Mapping[str, np.ndarray] = field(default_factory=dict)
    ovr_overall: Mapping[str, np.ndarray] = field(default_factory=dict)


def mc_pvalues(points: LabeledPointSet, families: tuple[str, ...],
               config: McConfig, mode: str,
               include_one_vs_rest: bool = True) -> McPValues:
    """All cell, overall, and one-vs-rest p-values from one set of draws.

    Far cheaper than separate :func:`p_rand`/:func:`p_mc` calls per
    statistic: each replicate's table is built once and every requested
    statistic is read off it. Counting exceedances is commutative, so the
    result is a pure function of ``(points, families, config, mode)``.
    A statistic that is degenerate on the observed data (for example a
    vanishing cell variance) is skipped and reported as NaN rather than
    failing the sweep.
    """
    if mode not in ("rand", "mc"):
        raise ValidationError(f"mode must be 'rand' or 'mc', got {mode!r}")
    families = tuple(dict.fromkeys(families))
    m = points.m
    foci = tuple(range(m)) if include_one_vs_rest and m >= 2 else ()
    tester = _ContextTester.from_points(points, families, foci)
    observed_table = tester.table(points.labels)

    def _observe(fn, *args):
        try:
            return fn(*args)
        except DegenerateStatisticError:
            return None

    obs_z = {f: _observe(tester.z_matrix, f, observed_table) for f in families}
    obs_x = {f: _observe(tester.x_statistic, f, observed_table) for f in families}
    obs_ovr_z = {f: [_observe(tester.ovr_z, f, observed_table, k) for k in foci]
                 for f in families}
    obs_ovr_x = {f: [_observe(tester.ovr_x, f, observed_table, k) for k in foci]
                 for f in families}

    exc_z = {f: np.zeros((m, m), dtype=np.int64) for f in families}
    exc_x = {f: 0 for f in families}
    exc_ovr_z = {f: np.zeros(len(foci), dtype=np.int64) for f in families}
    exc_ovr_x = {f: np.zeros(len(foci), dtype=np.int64) for f in families}

    region = config.region
    if mode == "mc" and region is None:
        region = Rectangle.bounding(points.coords)

    for rep in range(config.n_rep):
        rng = replicate_rng(config.seed, rep)
        if mode == "rand":
            rep_tester = tester
            table = tester.table(rng.permutation(points.labels))
        else:
            replicate = LabeledPointSet(region.sample(rng, points.n),
                                        points.labels, points.class_names,
                                        points.units, _validate=False)
            rep_graph = build_nn_digraph(replicate)
            rep_ctx = MomentContext.from_graph(replicate, rep_graph)
            rep_tester = _ContextTester(replicate, rep_graph.nn_index, rep_ctx,
                                        families, foci)
            table = rep_tester.table(replicate.labels)
        for f in families:
            if obs_z[f] is not None:
                z = rep_tester.z_matrix(f, table)
                exc_z[f] += np.abs(z) >= np.abs(obs_z[f])
            if obs_x[f] is not None and rep_tester.x_statistic(f, table) >= obs_x[f]:
                exc_x[f] += 1
            for ki, k in enumerate(foci):
                if obs_ovr_z[f][ki] is not None and \
                        abs(rep_tester.ovr_z(f, table, k)[1, 1]) >= \
                        abs(obs_ovr_z[f][ki][1, 1]):
                    exc_ovr_z[f][ki] += 1
                if obs_ovr_x[f][ki] is not None and \
                        rep_tester.ovr_x(f, table, k) >= obs_ovr_x[f][ki]:
                    exc_ovr_x[f][ki] += 1

    denom = config.n_rep + 1.0

    def _cell_p(f):
        if obs_z[f] is None:
            return np.full((m, m), np.nan)
        return (1.0 + exc_z[f]) / denom

    def _ovr_p(exc, obs, f):
        out = (1.0 + exc[f]) / denom
        return np.where([o is not None for o in obs[f]], out, np.nan)

    return McPValues(
        mode=mode,
        n_rep=config.n_rep,
        seed=config.seed,
        foci=foci,
        cell=MappingProxyType({f: _cell_p(f) for f in families}),
        overall=MappingProxyType({
            f: (1.0 + exc_x[f]) / denom if obs_x[f] is not None else float("nan")
            for f in families}),
        ovr_cell=MappingProxyType({f: _ovr_p(exc_ovr_z, obs_ovr_z, f)
                                   for f in families}),
        ovr_overall=MappingProxyType({f: _ovr_p(exc_ovr_x, obs_ovr_x, f)
                                      for f in families}),
    )
