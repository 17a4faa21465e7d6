"""Nearest-neighbor contingency tables and observed-pattern reading.

The table ``counts[i, j]`` holds the number of points of class ``i``
whose nearest neighbor belongs to class ``j``. Row sums equal the class
sizes (every point has exactly one nearest neighbor); column sums count
how often each class serves as a neighbor and are random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .neighbors import NnDigraph
from .points import LabeledPointSet

__all__ = [
    "Nnct",
    "build_nnct",
    "collapse_one_vs_rest",
    "classify_patterns",
    "SegregationProfile",
    "ClassPattern",
    "PairAssociation",
]


@dataclass(frozen=True)
class Nnct:
    """An m-by-m nearest-neighbor contingency table."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError("counts must be a square matrix")
        if counts.shape[0] != len(self.class_names):
            raise ValidationError("need one class name per row")
        if (counts < 0).any():
            raise ValidationError("counts must be non-negative")
        counts.setflags(write=False)

    @classmethod
    def from_counts(cls, counts, class_names=None) -> "Nnct":
        counts = np.asarray(counts)
        if class_names is None:
            class_names = tuple(str(i + 1) for i in range(counts.shape[0]))
        return cls(counts, tuple(class_names))

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def pi_hat(self) -> np.ndarray:
        """Observed cell proportions ``counts / n``."""
        return self.counts / self.n


def counts_from_labels(labels: np.ndarray, nn_index: np.ndarray, m: int) -> np.ndarray:
    """Tally (base class, neighbor class) pairs into an m-by-m table."""
    codes = labels * m + labels[nn_index]
    return np.bincount(codes, minlength=m * m).reshape(m, m).astype(np.int64)


def build_nnct(points: LabeledPointSet, graph: NnDigraph) -> Nnct:
    """Cross-tabulate each point's class against its neighbor's class."""
    if graph.n != points.n:
        raise ValidationError(
            f"digraph has {graph.n} points but the point set has {points.n}"
        )
    counts = counts_from_labels(points.labels, graph.nn_index, points.m)
    return Nnct(counts, points.class_names)


def collapse_one_vs_rest(nnct: Nnct, focus: int) -> Nnct:
    """Collapse to a 2x2 table: the focus class against all others pooled.

    Pooling labels leaves the underlying digraph untouched, so the
    collapsed table shares the original's ``shared_nn_pairs`` and
    ``mutual_nn_count``.
    """
    m = nnct.m
    if not 0 <= focus < m:
        raise ValidationError(f"focus must be in 0..{m - 1}, got {focus}")
    c = nnct.counts
    keep = np.arange(m) != focus
    collapsed = np.array(
        [
            [c[focus, focus], int(c[focus, keep].sum())],
            [int(c[keep, focus].sum()), int(c[np.ix_(keep, keep)].sum())],
        ],
        dtype=np.int64,
    )
    names = (nnct.class_names[focus], "rest")
    return Nnct(collapsed, names)


@dataclass(frozen=True)
class ClassPattern:
    """Observed niche/segregation reading for one class."""

    index: int
    name: str
    total_segregation: bool
    strong_segregation: bool
    segregated_from: tuple[int, ...]
    associated_with: tuple[int, ...]
    label: str


@dataclass(frozen=True)
class PairAssociation:
    """Association of class ``neighbor`` with class ``base`` (ordered)."""

    base: int
    neighbor: int
    total: bool
    strong: bool
    label: str


@dataclass(frozen=True)
class SegregationProfile:
    pi_hat: np.ndarray
    classes: tuple[ClassPattern, ...]
    associations: tuple[PairAssociation, ...]
    strict: bool


def classify_patterns(nnct: Nnct, strict: bool = False) -> SegregationProfile:
    """Read off segregation/association patterns from cell proportions.

    For class ``i`` with off-diagonal proportions ``p[i, j]``:

    * total segregation: ``p[i, i] >= sum_{j != i} p[i, j]``;
    * strong segregation: ``p[i, i] >= p[i, j]`` for every ``j != i``
      (implied by total);
    * otherwise the classes split into those ``i`` is segregated from
      (``p[i, i] >= p[i, j]``) and those it is associated with; both
      nonempty reads as partial segregation.

    Association of class ``j`` with class ``i`` mirrors this on the
    ``p[i, j]`` column entries of row ``i``. With ``strict=True`` the
    comparisons use ``>`` instead of ``>=``.
    """
    p = nnct.pi_hat
    m = nnct.m

    def ge(a: float, b: float) -> bool:
        return a > b if strict else a >= b

    classes = []
    for i in range(m):
        others = [j for j in range(m) if j != i]
        seg = tuple(j for j in others if ge(p[i, i], p[i, j]))
        assoc = tuple(j for j in others if j not in seg)
        total = ge(p[i, i], float(sum(p[i, j] for j in others)))
        strong = len(assoc) == 0
        if total:
            label = "total segregation"
        elif strong:
            label = "strong segregation"
        elif seg and assoc:
            label = "partial segregation"
        else:
            label = "none"
        classes.append(
            ClassPattern(i, nnct.class_names[i], total, strong, seg, assoc, label)
        )

    associations = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            others = [k for k in range(m) if k != j]
            total = ge(p[i, j], float(sum(p[i, k] for k in others)))
            strong = all(ge(p[i, j], p[i, k]) for k in others)
            label = "total association" if total else (
                "strong association" if strong else "none"
            )
            associations.append(PairAssociation(i, j, total, strong, label))

    return SegregationProfile(p, tuple(classes), tuple(associations), strict)
