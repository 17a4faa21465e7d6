"""Synthetic point patterns for size and power experiments.

Six generator kinds:

* ``csr`` -- every class i.i.d. uniform on the unit square.
* ``rl_fixed`` -- locations drawn once, uniform on per-class rectangles,
  then class labels assigned by a uniform random permutation. Numbered
  presets reproduce the standard location layouts (overlapping clusters,
  disjoint clusters, and so on).
* ``segregation2`` / ``segregation3`` -- classes uniform on squares slid
  apart by a shift ``s``; larger ``s`` means stronger segregation.
* ``association2`` / ``association3`` -- class 1 are "parents", uniform
  on the unit square; each point of the other classes picks a uniformly
  random parent and lands within distance ``r`` of it (radius uniform on
  ``(0, r)``, angle uniform on ``(0, 2*pi)``, no clipping to the unit
  square). Smaller ``r`` means stronger association.

The named alternative levels used throughout the experiments are
exposed as constants (segregation shifts) and small helper functions
(association radii, which scale with the total sample size).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .points import LabeledPointSet, Rectangle

__all__ = [
    "PATTERN_KINDS",
    "PatternSpec",
    "generate",
    "rl_rectangles",
    "rl_locations",
    "relabel",
    "pattern_rng",
    "SEGREGATION2_LEVELS",
    "SEGREGATION3_LEVELS",
    "ASSOCIATION2_DIVISORS",
    "ASSOCIATION3_DIVISORS",
    "association2_radius",
    "association3_radii",
]

PATTERN_KINDS = (
    "csr",
    "rl_fixed",
    "segregation2",
    "segregation3",
    "association2",
    "association3",
)

# Two-class segregation alternatives, weakest to strongest.
SEGREGATION2_LEVELS = {"I": 1.0 / 6.0, "II": 1.0 / 4.0, "III": 1.0 / 3.0}
# Three-class segregation alternatives, weakest to strongest.
SEGREGATION3_LEVELS = {"1": 1.0 / 12.0, "2": 1.0 / 8.0, "3": 1.0 / 6.0}
# Two-class association alternatives: r = 1 / (c * sqrt(n_t)); a larger
# divisor c gives a tighter cluster, hence stronger association.
ASSOCIATION2_DIVISORS = {"I": 2.0, "II": 3.0, "III": 4.0}
# Three-class association alternatives: (c_y, c_z) divisor pairs for the
# two offspring classes.
ASSOCIATION3_DIVISORS = {"1": (2.0, 3.0), "2": (2.0, 4.0), "3": (3.0, 4.0)}

_UNIT = Rectangle.unit()

# Random-labeling location presets: per-class rectangles keyed by
# (class count, case number). Case 1 is always the fully mixed layout;
# later cases pull the classes onto overlapping or disjoint supports.
_RL_PRESETS: dict[tuple[int, int], tuple[Rectangle, ...]] = {
    (2, 1): (_UNIT, _UNIT),
    (2, 2): (Rectangle(0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0),
             Rectangle(1.0 / 3.0, 1.0 / 3.0, 1.0, 1.0)),
    (2, 3): (_UNIT, Rectangle(2.0, 0.0, 3.0, 1.0)),
    (3, 1): (_UNIT, _UNIT, _UNIT),
    (3, 2): (_UNIT, Rectangle(2.0, 0.0, 3.0, 1.0),
             Rectangle(1.0, 2.0, 2.0, 3.0)),
}


def association2_radius(n_t: int, level: str = "I") -> float:
    """Offspring radius for a two-class association alternative."""
    if level not in ASSOCIATION2_DIVISORS:
        raise ValidationError(f"unknown association level {level!r}")
    return 1.0 / (ASSOCIATION2_DIVISORS[level] * np.sqrt(n_t))


def association3_radii(n_t: int, level: str = "1") -> tuple[float, float]:
    """Offspring radii (class 2, class 3) for a three-class association alternative."""
    if level not in ASSOCIATION3_DIVISORS:
        raise ValidationError(f"unknown association level {level!r}")
    cy, cz = ASSOCIATION3_DIVISORS[level]
    return 1.0 / (cy * np.sqrt(n_t)), 1.0 / (cz * np.sqrt(n_t))


@dataclass(frozen=True)
class PatternSpec:
    """A fully parameterized pattern to draw samples from.

    Parameters
    ----------
    kind : str
        One of :data:`PATTERN_KINDS`.
    sizes : tuple of int
        Points per class. Segregation/association kinds fix the class
        count (2 or 3 as the name says); ``csr`` allows any count.
    s : float, optional
        Segregation shift; ``0 <= s < 1`` for two classes (0 being no
        shift at all, i.e. plain CSR) and ``0 <= s < 1/2`` for three.
    radii : tuple of float, optional
        Association radii: ``(r,)`` for two classes, ``(r_y, r_z)`` for
        three.
    rectangles : tuple of Rectangle, optional
        Per-class supports for ``rl_fixed`` (overrides ``rl_case``).
    rl_case : int, optional
        Numbered ``rl_fixed`` preset (cases 1-3 for two classes,
        1-2 for three).
    seed : int, optional
        Seeds :func:`generate` when no generator is passed explicitly.
    class_names : tuple of str, optional
        Display names; defaults to "1", "2", ...
    """

    kind: str
    sizes: tuple[int, ...]
    s: float | None = None
    radii: tuple[float, ...] | None = None
    rectangles: tuple[Rectangle, ...] | None = None
    rl_case: int | None = None
    seed: int | None = None
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValidationError(
                f"unknown pattern kind {self.kind!r}; expected one of {PATTERN_KINDS}"
            )
        sizes = tuple(int(v) for v in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes or any(v < 1 for v in sizes):
            raise ValidationError("every class size must be at least 1")
        if self.radii is not None:
            object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        m = len(sizes)
        if self.kind == "segregation2":
            self._need_classes(2)
            if self.s is None or not 0.0 <= self.s < 1.0:
                raise ValidationError("segregation2 needs a shift 0 <= s < 1")
        elif self.kind == "segregation3":
            self._need_classes(3)
            if self.s is None or not 0.0 <= self.s < 0.5:
                raise ValidationError("segregation3 needs a shift 0 <= s < 1/2")
        elif self.kind == "association2":
            self._need_classes(2)
            if self.radii is None or len(self.radii) != 1 or self.radii[0] <= 0:
                raise ValidationError("association2 needs radii=(r,) with r > 0")
        elif self.kind == "association3":
            self._need_classes(3)
            if self.radii is None or len(self.radii) != 2 or min(self.radii) <= 0:
                raise ValidationError(
                    "association3 needs radii=(r_y, r_z), both positive"
                )
        elif self.kind == "rl_fixed":
            if self.rectangles is not None:
                if len(self.rectangles) != m:
                    raise ValidationError("need one rectangle per class")
            else:
                case = 1 if self.rl_case is None else int(self.rl_case)
                if (m, case) not in _RL_PRESETS:
                    known = sorted(c for mm, c in _RL_PRESETS if mm == m)
                    raise ValidationError(
                        f"no random-labeling preset case {case} for {m} classes; "
                        f"known cases: {known or 'none'}"
                    )
                object.__setattr__(self, "rl_case", case)
        if self.class_names is not None:
            names = tuple(str(c) for c in self.class_names)
            if len(names) != m:
                raise ValidationError("need one class name per class")
            object.__setattr__(self, "class_names", names)

    def _need_classes(self, m: int) -> None:
        if len(self.sizes) != m:
            raise ValidationError(
                f"{self.kind} is a {m}-class pattern, got {len(self.sizes)} sizes"
            )

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def names(self) -> tuple[str, ...]:
        if self.class_names is not None:
            return self.class_names
        return tuple(str(i + 1) for i in range(self.m))

    def with_sizes(self, sizes: tuple[int, ...]) -> "PatternSpec":
        """The same pattern at a different class-size combination."""
        return replace(self, sizes=tuple(int(v) for v in sizes))


def pattern_rng(seed: int | None) -> np.random.Generator:
    """Counter-based generator used everywhere a seed is given."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def rl_rectangles(spec: PatternSpec) -> tuple[Rectangle, ...]:
    """The per-class supports an ``rl_fixed`` spec draws locations from."""
    if spec.kind != "rl_fixed":
        raise ValidationError("only rl_fixed patterns have location rectangles")
    if spec.rectangles is not None:
        return spec.rectangles
    return _RL_PRESETS[(spec.m, spec.rl_case)]


def rl_locations(spec: PatternSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw the fixed locations of an ``rl_fixed`` pattern (labels pending).

    Exposed separately so an experiment can fix one location
    configuration and re-run :func:`relabel` many times against it; the
    neighbor digraph, and hence the shared/mutual pair counts, stay
    constant across those relabelings.
    """
    rects = rl_rectangles(spec)
    blocks = [rect.sample(rng, size) for rect, size in zip(rects, spec.sizes)]
    return np.concatenate(blocks, axis=0)


def relabel(coords: np.ndarray, sizes: tuple[int, ...],
            rng: np.random.Generator,
            class_names: tuple[str, ...] | None = None) -> LabeledPointSet:
    """Assign class labels to fixed locations by a uniform random permutation."""
    sizes = tuple(int(v) for v in sizes)
    n = sum(sizes)
    if coords.shape[0] != n:
        raise ValidationError(
            f"have {coords.shape[0]} locations but sizes sum to {n}"
        )
    labels = rng.permutation(np.repeat(np.arange(len(sizes)), sizes))
    names = class_names or tuple(str(i + 1) for i in range(len(sizes)))
    return LabeledPointSet(coords, labels, names)


def _offspring(parents: np.ndarray, count: int, radius: float,
               rng: np.random.Generator) -> np.ndarray:
    """Scatter ``count`` points, each within ``radius`` of a random parent."""
    idx = rng.integers(0, parents.shape[0], size=count)
    r = radius * rng.random(count)
    theta = 2.0 * np.pi * rng.random(count)
    return parents[idx] + np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate(spec: PatternSpec, rng: np.random.Generator | None = None) -> LabeledPointSet:
    """Draw one labeled point set from the pattern.

    ``rng`` overrides ``spec.seed``; passing neither gives a fresh
    nondeterministic draw. Labels are in class-block order except for
    ``rl_fixed``, whose whole point is the random label permutation.
    """
    if rng is None:
        rng = pattern_rng(spec.seed)
    names = spec.names()
    sizes = spec.sizes
    labels = np.repeat(np.arange(spec.m), sizes)

    if spec.kind == "csr":
        coords = _UNIT.sample(rng, spec.n)
        return LabeledPointSet(coords, labels, names)

    if spec.kind == "rl_fixed":
        coords = rl_locations(spec, rng)
        return relabel(coords, sizes, rng, names)

    if spec.kind == "segregation2":
        s = float(spec.s)
        supports = (Rectangle(0.0, 0.0, 1.0 - s, 1.0 - s) if s > 0 else _UNIT,
                    Rectangle(s, s, 1.0, 1.0) if s > 0 else _UNIT)
        coords = np.concatenate(
            [rect.sample(rng, size) for rect, size in zip(supports, sizes)])
        return LabeledPointSet(coords, labels, names)

    if spec.kind == "segregation3":
        s = float(spec.s)
        if s > 0:
            supports = (Rectangle(0.0, 0.0, 1.0 - 2 * s, 1.0 - 2 * s),
                        Rectangle(2 * s, 2 * s, 1.0, 1.0),
                        Rectangle(s, s, 1.0 - s, 1.0 - s))
        else:
            supports = (_UNIT, _UNIT, _UNIT)
        coords = np.concatenate(
            [rect.sample(rng, size) for rect, size in zip(supports, sizes)])
        return LabeledPointSet(coords, labels, names)

    # Association: class 1 parents first, then one offspring class (two
    # classes) or two offspring classes (three classes), all around the
    # same parents.
    parents = _UNIT.sample(rng, sizes[0])
    blocks = [parents]
    for class_index, radius in enumerate(spec.radii, start=1):
        blocks.append(_offspring(parents, sizes[class_index], radius, rng))
    coords = np.concatenate(blocks, axis=0)
    return LabeledPointSet(coords, labels, names)
