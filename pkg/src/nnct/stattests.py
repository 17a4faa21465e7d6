"""Cell-specific and overall tests on a nearest-neighbor contingency table.

Five statistic families are supported:

* ``D``  -- the classical standardized cell counts ``(N_ij - E)/sd``;
* ``I``  -- cells corrected by the random column sums, ``N_ij - n_i C_j / n``;
* ``II`` -- cells shifted by the fixed product margin, ``N_ij - n_i n_j / n``
  (cell-by-cell identical to ``D`` after standardization);
* ``III`` -- zero-mean column-corrected cells;
* ``IV`` -- a cellwise positive rescaling of ``III`` (identical z-scores).

Each family also yields one overall quadratic-form statistic using a
generalized (spectral) inverse of the family's covariance matrix,
referred to a chi-square law whose degrees of freedom come from theory:
``m(m-1)`` for D/II and ``(m-1)^2`` for I/III/IV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .contingency import Nnct, collapse_one_vs_rest
from .errors import DegenerateStatisticError, ValidationError
from .moments import (
    FAMILIES,
    MomentContext,
    MomentSet,
    build_moments,
    family_coefficients,
    family_expectation,
)

__all__ = [
    "CellTestMatrix",
    "OverallTestResult",
    "OneVsRestResult",
    "cell_tests",
    "overall_test",
    "one_vs_rest",
    "family_statistic",
    "degrees_of_freedom",
    "pseudo_inverse",
    "normal_sf",
    "chisq_sf",
]

_VAR_FLOOR = 1e-12
_RANK_TOL = 1e-8


def normal_sf(z):
    """Standard normal survival function ``P(Z >= z)``, vectorized."""
    return special.ndtr(-np.asarray(z, dtype=np.float64))


def chisq_sf(x, df: int):
    """Chi-square survival function via the regularized upper incomplete gamma."""
    if df < 1 or int(df) != df:
        raise ValueError(f"df must be a positive integer, got {df}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("chi-square statistic must be non-negative")
    out = special.gammaincc(df / 2.0, x / 2.0)
    return float(out) if out.ndim == 0 else out


def pseudo_inverse(matrix: np.ndarray, tol: float = _RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via its spectrum.

    Eigenvalues below ``tol`` times the largest eigenvalue are treated
    as exact zeros.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(matrix).max()))
    if float(np.abs(matrix - matrix.T).max()) > 1e-9 * scale:
        raise ValidationError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    lam_max = float(vals[-1]) if vals.size else 0.0
    cutoff = tol * lam_max
    safe = np.where(vals > cutoff, vals, 1.0)
    inv = np.where(vals > cutoff, 1.0 / safe, 0.0)
    return (vecs * inv) @ vecs.T


def degrees_of_freedom(family: str, m: int) -> int:
    """Reference chi-square degrees of freedom for a family's overall test."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if m < 2:
        raise ValueError("overall tests need at least 2 classes")
    if family in ("D", "II"):
        return m * (m - 1)
    return (m - 1) * (m - 1)


def family_statistic(family: str, nnct: Nnct, ctx: MomentContext) -> np.ndarray:
    """The family's cell-statistic matrix evaluated on an observed table."""
    counts = nnct.counts.astype(np.float64)
    sizes = np.asarray(ctx.class_sizes, dtype=np.float64)
    if family == "II":
        return counts - np.outer(sizes, sizes) / ctx.n
    a, b = family_coefficients(family, ctx)
    colsums = nnct.col_sums.astype(np.float64)
    return a * counts - b * colsums[None, :]


@dataclass(frozen=True)
class CellTestMatrix:
    """Cell-specific tests for one family, all m^2 cells at once."""

    family: str
    statistic: np.ndarray
    expected: np.ndarray
    variance: np.ndarray
    z: np.ndarray
    p_right: np.ndarray
    p_left: np.ndarray
    p_two: np.ndarray


@dataclass(frozen=True)
class OverallTestResult:
    """One family's overall quadratic-form test."""

    family: str
    statistic: float
    df: int
    p_asy: float
    rank: int

    @property
    def rank_matches_df(self) -> bool:
        return self.rank == self.df

    @property
    def rank_warning(self) -> str | None:
        if self.rank_matches_df:
            return None
        return (
            f"family {self.family}: covariance rank {self.rank} differs from "
            f"theoretical df {self.df}; statistic uses the generalized inverse"
        )


def _moments_for(nnct: Nnct, moments: MomentSet | MomentContext, family: str) -> MomentSet:
    if isinstance(moments, MomentContext):
        moments = build_moments(moments, families=(family,))
    if family not in moments.sigma:
        moments = build_moments(moments.context, families=(family,))
    if len(moments.context.class_sizes) != nnct.m:
        raise ValidationError("moment context and table disagree on class count")
    if moments.context.class_sizes != tuple(int(s) for s in nnct.row_sums):
        raise ValidationError("moment context class sizes must equal the table row sums")
    return moments


def cell_tests(family: str, nnct: Nnct, moments: MomentSet | MomentContext) -> CellTestMatrix:
    """Standardized cell-specific tests with asymptotic normal p-values.

    ``p_two`` is ``2 * min(p_left, p_right)`` exactly; a variance at or
    below 1e-12 makes the cell statistic undefined and raises.
    """
    moments = _moments_for(nnct, moments, family)
    ctx = moments.context
    stat = family_statistic(family, nnct, ctx)
    expect = family_expectation(family, ctx)
    variance = moments.cell_variance[family].copy()
    bad = np.argwhere(variance <= _VAR_FLOOR)
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise DegenerateStatisticError(
            f"family {family}: variance of cell ({i}, {j}) is "
            f"{variance[i, j]:g}; the cell statistic is undefined"
        )
    z = (stat - expect) / np.sqrt(variance)
    p_right = normal_sf(z)
    p_left = normal_sf(-z)
    p_two = 2.0 * np.minimum(p_left, p_right)
    return CellTestMatrix(family, stat, expect, variance, z, p_right, p_left, p_two)


def overall_test(family: str, nnct: Nnct, moments: MomentSet | MomentContext) -> OverallTestResult:
    """Quadratic-form test of the family's full cell-statistic vector.

    The quadratic form uses the spectral generalized inverse of the
    family covariance, so it is non-negative by construction. Degrees of
    freedom always come from theory; a rank mismatch is reported on the
    result, not silently absorbed.
    """
    moments = _moments_for(nnct, moments, family)
    ctx = moments.context
    df = degrees_of_freedom(family, ctx.m)
    stat = family_statistic(family, nnct, ctx)
    u = stat.ravel() - moments.expectation[family]
    vals, vecs = moments.sigma_eig[family]
    lam_max = float(vals[-1]) if vals.size else 0.0
    cutoff = _RANK_TOL * lam_max
    keep = vals > cutoff
    rank = int(keep.sum())
    y = vecs.T @ u
    x_stat = float(np.sum(np.where(keep, y * y / np.where(keep, vals, 1.0), 0.0)))
    if not np.isfinite(x_stat):
        raise DegenerateStatisticError(
            f"family {family}: overall statistic is not finite"
        )
    return OverallTestResult(family, x_stat, df, chisq_sf(x_stat, df), rank)


@dataclass(frozen=True)
class OneVsRestResult:
    """Post-hoc tests of one class against the pooled rest."""

    focus: int
    focus_name: str
    nnct: Nnct
    cell: dict[str, CellTestMatrix]
    overall: dict[str, OverallTestResult]

    @property
    def rest_cell_z(self) -> dict[str, float]:
        """z of the pooled (rest, rest) cell, the genuinely new quantity."""
        return {f: float(t.z[1, 1]) for f, t in self.cell.items()}


def one_vs_rest(
    nnct: Nnct,
    ctx: MomentContext,
    focus: int,
    families: tuple[str, ...] = ("D", "I", "III"),
) -> OneVsRestResult:
    """Collapse to focus-vs-rest and rerun the cell and overall tests.

    Pooling the non-focus classes relabels points without touching the
    digraph, so the collapsed table keeps the original shared/mutual
    pair counts.
    """
    collapsed = collapse_one_vs_rest(nnct, focus)
    n_focus = int(nnct.row_sums[focus])
    ctx2 = MomentContext(
        (n_focus, ctx.n - n_focus),
        ctx.shared_nn_pairs,
        ctx.mutual_nn_count,
    )
    moments2 = build_moments(ctx2, families=tuple(families))
    cell = {f: cell_tests(f, collapsed, moments2) for f in families}
    overall = {f: overall_test(f, collapsed, moments2) for f in families}
    return OneVsRestResult(focus, nnct.class_names[focus], collapsed, cell, overall)
