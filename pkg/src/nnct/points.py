"""Labeled planar point sets and delimited-file I/O.

The on-disk format is a CSV file with a mandatory ``x,y,label`` header.
Coordinates are written with ``repr`` so a save/load round trip is
bit-exact; labels are arbitrary strings (quoting is handled by the csv
module).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PointParseError, ValidationError

__all__ = ["LabeledPointSet", "Rectangle", "load_points", "save_points"]

_HEADER = ("x", "y", "label")


@dataclass(frozen=True)
class Rectangle:
    """An axis-aligned rectangle ``(xmin, xmax) x (ymin, ymax)``.

    Used both as a sampling window (uniform draws) and as the support of
    a pattern's class. Degenerate (zero-area) rectangles are rejected.
    """

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("rectangle bounds must be finite")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValidationError(
                f"rectangle must have positive area, got x=({self.xmin}, {self.xmax}) "
                f"y=({self.ymin}, {self.ymax})"
            )

    @classmethod
    def unit(cls) -> "Rectangle":
        return cls(0.0, 0.0, 1.0, 1.0)

    @classmethod
    def bounding(cls, coords: np.ndarray) -> "Rectangle":
        """Smallest rectangle containing the points (inflated if flat)."""
        coords = np.asarray(coords, dtype=np.float64)
        xmin, ymin = coords.min(axis=0)
        xmax, ymax = coords.max(axis=0)
        # A single point or collinear-on-an-axis input has a flat bounding
        # box; widen it so the rectangle stays a valid sampling window.
        if xmax <= xmin:
            pad = max(1.0, abs(xmin)) * 1e-6
            xmin, xmax = xmin - pad, xmax + pad
        if ymax <= ymin:
            pad = max(1.0, abs(ymin)) * 1e-6
            ymin, ymax = ymin - pad, ymax + pad
        return cls(float(xmin), float(ymin), float(xmax), float(ymax))

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Draw ``k`` i.i.d. uniform points; x drawn first, then y."""
        xs = self.xmin + self.width * rng.random(k)
        ys = self.ymin + self.height * rng.random(k)
        return np.column_stack([xs, ys])

    def contains(self, coords: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed rectangle."""
        coords = np.asarray(coords, dtype=np.float64)
        return (
            (coords[:, 0] >= self.xmin)
            & (coords[:, 0] <= self.xmax)
            & (coords[:, 1] >= self.ymin)
            & (coords[:, 1] <= self.ymax)
        )


@dataclass(frozen=True)
class LabeledPointSet:
    """An immutable set of planar points, each carrying a class label.

    Parameters
    ----------
    coords : ndarray of shape (n, 2)
        Point coordinates. Must be finite, with no exact duplicate rows.
    labels : ndarray of shape (n,)
        Integer class index per point, in ``0..m-1`` where
        ``m = len(class_names)``.
    class_names : tuple of str
        Distinct display names, one per class. Index ``i`` in ``labels``
        refers to ``class_names[i]``.
    units : str
        Optional length unit of the coordinates (metadata only).
    """

    coords: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    units: str = ""
    _validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if self._validate:
            self._check()
        coords.setflags(write=False)
        labels.setflags(write=False)

    def _check(self):
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValidationError(f"coords must have shape (n, 2), got {self.coords.shape}")
        n = self.coords.shape[0]
        if n == 0:
            raise ValidationError("point set is empty")
        if self.labels.shape != (n,):
            raise ValidationError("labels must be one integer per point")
        if not np.all(np.isfinite(self.coords)):
            raise ValidationError("coordinates must be finite")
        m = len(self.class_names)
        if m == 0:
            raise ValidationError("at least one class is required")
        if len(set(self.class_names)) != m:
            raise ValidationError("class names must be distinct")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= m):
            raise ValidationError("labels reference a class outside 0..m-1")
        seen: dict[tuple[float, float], int] = {}
        for i, (x, y) in enumerate(self.coords):
            key = (float(x), float(y))
            if key in seen:
                raise ValidationError(
                    f"duplicate coordinates {key} at rows {seen[key]} and {i}"
                )
            seen[key] = i

    @property
    def n(self) -> int:
        """Number of points."""
        return self.coords.shape[0]

    @property
    def m(self) -> int:
        """Number of classes."""
        return len(self.class_names)

    @property
    def class_sizes(self) -> tuple[int, ...]:
        """Count of points per class, indexed like ``class_names``."""
        return tuple(int(c) for c in np.bincount(self.labels, minlength=self.m))

    def with_labels(self, labels: np.ndarray) -> "LabeledPointSet":
        """Return a copy sharing these coordinates but with new labels."""
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if labels.shape != (self.n,):
            raise ValidationError("labels must be one integer per point")
        if labels.min() < 0 or labels.max() >= self.m:
            raise ValidationError("labels reference a class outside 0..m-1")
        return LabeledPointSet(self.coords, labels, self.class_names, self.units,
                               _validate=False)


def load_points(path: str | Path) -> LabeledPointSet:
    """Read a labeled point set from a ``x,y,label`` CSV file.

    Class indices are assigned by first appearance of each label string,
    so the mapping ``class_names[i] -> i`` is deterministic for a given
    file. Malformed rows and exact duplicate coordinates raise with the
    offending line number.
    """
    path = Path(path)
    xs: list[float] = []
    ys: list[float] = []
    labels: list[int] = []
    name_index: dict[str, int] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PointParseError("file is empty, expected header x,y,label") from None
        if [h.strip().lower() for h in header] != list(_HEADER):
            raise PointParseError(
                f"expected header x,y,label, got {','.join(header)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise PointParseError(
                    f"expected 3 fields, got {len(row)}", line=lineno
                )
            try:
                x = float(row[0])
                y = float(row[1])
            except ValueError:
                raise PointParseError(
                    f"non-numeric coordinate in row {row!r}", line=lineno
                ) from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise PointParseError(
                    f"non-finite coordinate in row {row!r}", line=lineno
                )
            name = row[2]
            if name not in name_index:
                name_index[name] = len(name_index)
            xs.append(x)
            ys.append(y)
            labels.append(name_index[name])
    if not xs:
        raise PointParseError("no data rows found")
    coords = np.column_stack([xs, ys])
    return LabeledPointSet(coords, np.asarray(labels), tuple(name_index))


def save_points(points: LabeledPointSet, path: str | Path) -> None:
    """Write a point set to CSV; ``load_points`` restores it bit-exactly."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HEADER)
        for (x, y), lab in zip(points.coords, points.labels):
            writer.writerow([repr(float(x)), repr(float(y)),
                             points.class_names[int(lab)]])
