"""Exact moments of NNCT cell counts under random labeling.

Conditioning is on the labeled digraph's structure: the class sizes, the
shared-neighbor pair count and the mutual-pair count. Under random
labeling the probability that ``k`` specific distinct points carry a
given tuple of classes is a ratio of falling factorials, and every first
or second moment of the cell counts is a small linear combination of
such probabilities.

Covariances between cells come from enumerating ordered pairs of
nearest-neighbor arcs by how they overlap. Writing an arc as
(tail, head) and letting ``q = shared_nn_pairs``, ``r = mutual_nn_count``:

==========================  ==========================  =============
overlap pattern             occurrences                 label tuple
==========================  ==========================  =============
same arc twice              n                           (a, b)
mutual pair                 r                           (a, b)
same head                   q                           (a, c, b)
head of 1st = tail of 2nd   n - r                       (a, b, d)
tail of 1st = head of 2nd   n - r                       (c, a, b)
all four points distinct    n^2 - 3n - q + r            (a, b, c, d)
==========================  ==========================  =============

(Sharing a tail is impossible: each point has exactly one out-arc.)
``Cov[N_ab, N_cd]`` is the sum of the matching rows' occurrence counts
times the joint class probabilities, minus ``E[N_ab] E[N_cd]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ConsistencyError, DegenerateStatisticError, ValidationError
from .neighbors import NnDigraph
from .points import LabeledPointSet

__all__ = [
    "FAMILIES",
    "MomentContext",
    "MomentSet",
    "expected_counts",
    "variance_counts",
    "covariance_counts",
    "colsum_covariances",
    "family_coefficients",
    "family_expectation",
    "sigma_for_family",
    "overall_support_sigma",
    "build_moments",
]

FAMILIES = ("D", "I", "II", "III", "IV")

_NEG_VARIANCE_TOL = 1e-9
_ASYMMETRY_TOL = 1e-9
_PSD_TOL = 1e-8


@dataclass(frozen=True)
class MomentContext:
    """Everything the moment formulas need to know about a configuration.

    Parameters
    ----------
    class_sizes : tuple of int
        Number of points per class; at least 2 points in total.
    shared_nn_pairs : int
        Ordered pairs of distinct points sharing a nearest neighbor.
    mutual_nn_count : int
        Points in reciprocal nearest-neighbor pairs (always even).
    """

    class_sizes: tuple[int, ...]
    shared_nn_pairs: int
    mutual_nn_count: int

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.class_sizes)
        object.__setattr__(self, "class_sizes", sizes)
        if any(s < 0 for s in sizes):
            raise ValidationError("class sizes must be non-negative")
        n = sum(sizes)
        if n < 2:
            raise ValidationError("moment context needs at least 2 points")
        if self.shared_nn_pairs < 0:
            raise ValidationError("shared_nn_pairs must be non-negative")
        r = self.mutual_nn_count
        if r < 0 or r % 2 != 0 or r > n:
            raise ValidationError("mutual_nn_count must be an even count of points")

    @classmethod
    def from_graph(cls, points: LabeledPointSet, graph: NnDigraph) -> "MomentContext":
        return cls(points.class_sizes, graph.shared_nn_pairs, graph.mutual_nn_count)

    @property
    def n(self) -> int:
        return sum(self.class_sizes)

    @property
    def m(self) -> int:
        return len(self.class_sizes)

    def joint_prob(self, classes: tuple[int, ...]) -> float:
        """Probability that specific distinct points carry these classes."""
        return _joint_prob(self.class_sizes, tuple(sorted(classes)))


@lru_cache(maxsize=16384)
def _joint_prob(sizes: tuple[int, ...], classes: tuple[int, ...]) -> float:
    n = sum(sizes)
    k = len(classes)
    if k > n:
        # No way to pick that many distinct points; the structural
        # coefficient multiplying this term is zero in the same regime.
        return 0.0
    num = 1.0
    used: dict[int, int] = {}
    for c in classes:
        avail = sizes[c] - used.get(c, 0)
        if avail <= 0:
            return 0.0
        num *= avail
        used[c] = used.get(c, 0) + 1
    den = 1.0
    for t in range(k):
        den *= n - t
    return num / den


def expected_counts(ctx: MomentContext) -> np.ndarray:
    """Expected NNCT under random labeling.

    Diagonal cells: ``n_i (n_i - 1) / (n - 1)``; off-diagonal cells:
    ``n_i n_j / (n - 1)``. Rows sum to the class sizes.
    """
    sizes = np.asarray(ctx.class_sizes, dtype=np.float64)
    n = ctx.n
    exp = np.outer(sizes, sizes) / (n - 1)
    exp[np.diag_indices_from(exp)] = sizes * (sizes - 1) / (n - 1)
    return exp


def variance_counts(ctx: MomentContext) -> np.ndarray:
    """Variances of the NNCT cells, computed cell by cell.

    Diagonal: ``(n+r) p_ii + (2n-2r+q) p_iii + (n^2-3n-q+r) p_iiii - (n p_ii)^2``.
    Off-diagonal: ``n p_ij + q p_iij + (n^2-3n-q+r) p_iijj - (n p_ij)^2``.
    """
    n = ctx.n
    q = ctx.shared_nn_pairs
    r = ctx.mutual_nn_count
    m = ctx.m
    disjoint = n * n - 3.0 * n - q + r
    var = np.empty((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(m):
            if i == j:
                p2 = ctx.joint_prob((i, i))
                p3 = ctx.joint_prob((i, i, i))
                p4 = ctx.joint_prob((i, i, i, i))
                v = (n + r) * p2 + (2.0 * n - 2.0 * r + q) * p3 + disjoint * p4 \
                    - (n * p2) ** 2
            else:
                p2 = ctx.joint_prob((i, j))
                p3 = ctx.joint_prob((i, i, j))
                p4 = ctx.joint_prob((i, i, j, j))
                v = n * p2 + q * p3 + disjoint * p4 - (n * p2) ** 2
            var[i, j] = _check_variance(v, i, j)
    return var


def _check_variance(v: float, i: int, j: int) -> float:
    if v < -_NEG_VARIANCE_TOL:
        raise ConsistencyError(
            f"variance of cell ({i}, {j}) came out {v}; "
            "the shared/mutual pair counts are inconsistent with n"
        )
    return max(v, 0.0)


def _cov_cell_pair(ctx: MomentContext, a: int, b: int, c: int, d: int) -> float:
    """Cov[N_ab, N_cd] by arc-overlap enumeration (see module docstring)."""
    n = ctx.n
    q = ctx.shared_nn_pairs
    r = ctx.mutual_nn_count
    prob = ctx.joint_prob
    total = (n * n - 3.0 * n - q + r) * prob((a, b, c, d))
    if a == c and b == d:
        total += n * prob((a, b))
    if b == c and a == d:
        total += r * prob((a, b))
    if b == d:
        total += q * prob((a, c, b))
    if b == c:
        total += (n - r) * prob((a, b, d))
    if a == d:
        total += (n - r) * prob((c, a, b))
    return total - (n * prob((a, b))) * (n * prob((c, d)))


def covariance_counts(ctx: MomentContext) -> np.ndarray:
    """Full covariance matrix of the flattened NNCT.

    Cells are flattened row-wise: cell ``(i, j)`` maps to index
    ``i * m + j``. The matrix is symmetrized after an explicit asymmetry
    check, which would catch an inconsistent overlap enumeration.
    """
    m = ctx.m
    cov = np.empty((m * m, m * m), dtype=np.float64)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    cov[i * m + j, k * m + l] = _cov_cell_pair(ctx, i, j, k, l)
    asym = float(np.abs(cov - cov.T).max())
    if asym > _ASYMMETRY_TOL:
        raise ConsistencyError(f"covariance matrix asymmetric by {asym}")
    cov = (cov + cov.T) / 2.0
    for i in range(m):
        for j in range(m):
            cov[i * m + j, i * m + j] = _check_variance(
                cov[i * m + j, i * m + j], i, j
            )
    return cov


def colsum_covariances(ctx: MomentContext, cov: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Covariances involving the random column sums.

    Returns
    -------
    cov_count_colsum : ndarray of shape (m, m, m)
        ``[i, j, l]`` = Cov[N_ij, C_l], obtained by summing Cov[N_ij, N_kl]
        over the column's rows ``k``.
    cov_colsums : ndarray of shape (m, m)
        ``[j, l]`` = Cov[C_j, C_l]. Because the column sums add up to the
        fixed total ``n``, each row of this matrix sums to zero.
    """
    m = ctx.m
    if cov is None:
        cov = covariance_counts(ctx)
    tensor = cov.reshape(m, m, m, m)
    cov_count_colsum = tensor.sum(axis=2)
    cov_colsums = tensor.sum(axis=(0, 2))
    return cov_count_colsum, cov_colsums


def family_coefficients(family: str, ctx: MomentContext) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell coefficients (a, b) of the statistic ``a N_ij - b C_j``.

    Every supported family's cell statistic is of this bilinear form
    (families D and II shift by constants only, so their covariance
    coefficients are ``a = 1, b = 0``).
    """
    _check_family(family)
    m = ctx.m
    n = ctx.n
    sizes = np.asarray(ctx.class_sizes, dtype=np.float64)
    a = np.ones((m, m), dtype=np.float64)
    b = np.zeros((m, m), dtype=np.float64)
    if family in ("D", "II"):
        return a, b
    if family == "I":
        b[:] = sizes[:, None] / n
        return a, b
    if family == "III":
        b[:] = sizes[:, None] / (n - 1)
        b[np.diag_indices(m)] = (sizes - 1) / (n - 1)
        return a, b
    # family IV rescales type III cell by cell; the diagonal needs n_i >= 2
    if np.any(sizes <= 1):
        small = [i for i, s in enumerate(ctx.class_sizes) if s <= 1]
        raise DegenerateStatisticError(
            f"family IV needs every class size >= 2; classes {small} are too small"
        )
    a[:] = (n - 1.0) / n
    a[np.diag_indices(m)] = sizes * (n - 1.0) / (n * (sizes - 1.0))
    b[:] = sizes[:, None] / n
    return a, b


def family_expectation(family: str, ctx: MomentContext) -> np.ndarray:
    """Expected value of the family's cell statistic matrix."""
    _check_family(family)
    m = ctx.m
    n = ctx.n
    sizes = np.asarray(ctx.class_sizes, dtype=np.float64)
    if family == "D":
        return expected_counts(ctx)
    if family in ("I", "II"):
        exp = np.outer(sizes, sizes) / (n * (n - 1.0))
        exp[np.diag_indices(m)] = sizes * (sizes - n) / (n * (n - 1.0))
        return exp
    return np.zeros((m, m), dtype=np.float64)


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def sigma_for_family(
    family: str,
    ctx: MomentContext,
    cov: np.ndarray,
    cov_count_colsum: np.ndarray,
    cov_colsums: np.ndarray,
) -> np.ndarray:
    """Covariance matrix of the family's flattened cell-statistic vector.

    Expands ``Cov[a_ij N_ij - b_ij C_j, a_kl N_kl - b_kl C_l]`` term by
    term from the count covariances. The result must be positive
    semidefinite up to spectral noise; a genuinely negative eigenvalue
    signals inconsistent inputs.
    """
    m = ctx.m
    a, b = family_coefficients(family, ctx)
    af = a.ravel()
    bf = b.ravel()
    col = np.tile(np.arange(m), m)
    nc = cov_count_colsum.reshape(m * m, m)[:, col]
    cross = np.outer(af, bf) * nc
    sigma = np.outer(af, af) * cov - cross - cross.T \
        + np.outer(bf, bf) * cov_colsums[np.ix_(col, col)]
    sigma = (sigma + sigma.T) / 2.0
    eigvals = np.linalg.eigvalsh(sigma)
    lam_max = float(eigvals[-1]) if eigvals.size else 0.0
    if lam_max > 0 and float(eigvals[0]) < -_PSD_TOL * lam_max:
        raise ConsistencyError(
            f"family {family} covariance has eigenvalue {eigvals[0]} "
            f"(largest {lam_max}); inputs are inconsistent"
        )
    return sigma


def overall_support_sigma(family: str, sigma: np.ndarray, m: int) -> np.ndarray:
    """Covariance restricted to the cells that enter the overall test.

    For families III and IV every column of the centered cell-statistic
    table sums to zero exactly, and the overall quadratic form is defined
    on the leading ``(m-1) x (m-1)`` sub-table of cells -- one row and one
    column dropped, matching the ``(m-1)^2`` degrees of freedom of the
    reference distribution. This returns the covariance of those kept
    cells embedded back into the full layout (zeros elsewhere), so that a
    generalized inverse of the result reproduces the reduced-vector
    quadratic form while indexing stays uniform across families.

    For the other families every cell participates and the covariance is
    returned unchanged.
    """
    _check_family(family)
    if family not in ("III", "IV"):
        return sigma
    keep = np.zeros(m * m, dtype=bool)
    for i in range(m - 1):
        for j in range(m - 1):
            keep[i * m + j] = True
    restricted = np.zeros_like(sigma)
    kept_idx = np.flatnonzero(keep)
    restricted[np.ix_(kept_idx, kept_idx)] = sigma[np.ix_(kept_idx, kept_idx)]
    return restricted


@dataclass(frozen=True)
class MomentSet:
    """Precomputed moments for one configuration.

    ``sigma[f]`` and ``expectation[f]`` hold the covariance matrix and
    flattened expectation of family ``f``'s cell-statistic vector, with
    ``sigma[f]`` already restricted to the cells that enter the overall
    quadratic form (see :func:`overall_support_sigma`).
    ``cell_variance[f]`` holds the exact per-cell variances used by the
    cell-specific tests; for families III and IV these cover every cell,
    including the ones outside the overall support. ``sigma_eig[f]``
    caches the eigendecomposition used for generalized inverses.
    """

    context: MomentContext
    exp_counts: np.ndarray
    var_counts: np.ndarray
    cov_counts: np.ndarray
    cov_count_colsum: np.ndarray
    cov_colsums: np.ndarray
    sigma: Mapping[str, np.ndarray]
    cell_variance: Mapping[str, np.ndarray]
    expectation: Mapping[str, np.ndarray]
    sigma_eig: Mapping[str, tuple[np.ndarray, np.ndarray]] = field(repr=False)

    @property
    def families(self) -> tuple[str, ...]:
        return tuple(self.sigma)


def build_moments(ctx: MomentContext, families: tuple[str, ...] = FAMILIES) -> MomentSet:
    """Compute every moment needed to test the given families."""
    for f in families:
        _check_family(f)
    m = ctx.m
    exp = expected_counts(ctx)
    var = variance_counts(ctx)
    cov = covariance_counts(ctx)
    cov_nc, cov_cc = colsum_covariances(ctx, cov)
    sigma: dict[str, np.ndarray] = {}
    cell_variance: dict[str, np.ndarray] = {}
    expectation: dict[str, np.ndarray] = {}
    eig: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for f in families:
        exact = sigma_for_family(f, ctx, cov, cov_nc, cov_cc)
        cell_variance[f] = np.diag(exact).reshape(m, m).copy()
        s = overall_support_sigma(f, exact, m)
        sigma[f] = s
        expectation[f] = family_expectation(f, ctx).ravel()
        eig[f] = np.linalg.eigh(s)
    return MomentSet(
        context=ctx,
        exp_counts=exp,
        var_counts=var,
        cov_counts=cov,
        cov_count_colsum=cov_nc,
        cov_colsums=cov_cc,
        sigma=MappingProxyType(sigma),
        cell_variance=MappingProxyType(cell_variance),
        expectation=MappingProxyType(expectation),
        sigma_eig=MappingProxyType(eig),
    )
