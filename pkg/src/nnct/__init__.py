"""Nearest-neighbor contingency table tests of spatial segregation.

The package tests whether classes of points in the plane mix randomly,
using the m x m table that cross-classifies each point's class against
the class of its nearest neighbor. It provides five families of cell
and overall tests (D and I-IV), one-vs-rest post-hoc collapses, exact
table moments under random labeling, Monte Carlo p-values, synthetic
pattern generators, and an empirical size/power experiment harness.

Typical use::

    from nnct import load_points, analyze_points, report_text

    points = load_points("trees.csv")
    report = analyze_points(points, families=("D", "I", "III"))
    print(report_text(report))

Library indices (classes, cells, foci) are 0-based; the command line
and all rendered output are 1-based.
"""

from .contingency import (
    ClassPattern,
    Nnct,
    PairAssociation,
    SegregationProfile,
    build_nnct,
    classify_patterns,
    collapse_one_vs_rest,
    counts_from_labels,
)
from .errors import (
    ConsistencyError,
    DegenerateStatisticError,
    NnctError,
    PointParseError,
    ValidationError,
)
from .experiments import (
    THREE_CLASS_GRID,
    TWO_CLASS_GRID,
    ExperimentResult,
    ExperimentRow,
    ExperimentSpec,
    TestTarget,
    parse_target_list,
    run_experiment,
    size_thresholds,
)
from .inference import (
    McConfig,
    McPValues,
    McResult,
    StatisticSpec,
    derive_seed,
    mc_pvalues,
    p_mc,
    p_rand,
    replicate_rng,
)
from .moments import (
    FAMILIES,
    MomentContext,
    MomentSet,
    build_moments,
    covariance_counts,
    expected_counts,
    family_coefficients,
    family_expectation,
    sigma_for_family,
    variance_counts,
)
from .neighbors import (
    NnDigraph,
    NnDistanceSummary,
    build_nn_digraph,
    nn_distances,
)
from .patterns import (
    PATTERN_KINDS,
    PatternSpec,
    association2_radius,
    association3_radii,
    generate,
    relabel,
    rl_locations,
)
from .points import LabeledPointSet, Rectangle, load_points, save_points
from .report import analyze_points, report_json, report_text
from .stattests import (
    CellTestMatrix,
    OneVsRestResult,
    OverallTestResult,
    cell_tests,
    degrees_of_freedom,
    one_vs_rest,
    overall_test,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "NnctError", "PointParseError", "ValidationError",
    "DegenerateStatisticError", "ConsistencyError",
    # points and neighbors
    "LabeledPointSet", "Rectangle", "load_points", "save_points",
    "NnDigraph", "NnDistanceSummary", "build_nn_digraph", "nn_distances",
    # tables
    "Nnct", "build_nnct", "counts_from_labels", "collapse_one_vs_rest",
    "classify_patterns", "SegregationProfile", "ClassPattern",
    "PairAssociation",
    # moments
    "FAMILIES", "MomentContext", "MomentSet", "build_moments",
    "expected_counts", "variance_counts", "covariance_counts",
    "family_coefficients", "family_expectation", "sigma_for_family",
    # tests
    "CellTestMatrix", "OverallTestResult", "OneVsRestResult",
    "cell_tests", "overall_test", "one_vs_rest", "degrees_of_freedom",
    # Monte Carlo
    "McConfig", "McResult", "McPValues", "StatisticSpec",
    "p_rand", "p_mc", "mc_pvalues", "replicate_rng", "derive_seed",
    # patterns
    "PATTERN_KINDS", "PatternSpec", "generate", "rl_locations", "relabel",
    "association2_radius", "association3_radii",
    # experiments
    "TWO_CLASS_GRID", "THREE_CLASS_GRID", "TestTarget", "parse_target_list",
    "ExperimentSpec", "ExperimentRow", "ExperimentResult",
    "run_experiment", "size_thresholds",
    # reports
    "analyze_points", "report_json", "report_text",
]
