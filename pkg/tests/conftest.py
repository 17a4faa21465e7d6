"""Shared fixtures: the benchmark table and the random identity suite."""

from __future__ import annotations

import numpy as np
import pytest

from nnct.contingency import Nnct, build_nnct
from nnct.moments import FAMILIES, MomentContext, build_moments
from nnct.neighbors import build_nn_digraph
from nnct.points import LabeledPointSet
from nnct.stattests import cell_tests, overall_test

# Benchmark three-class table (golden reference dataset): counts,
# class sizes, and the digraph pair statistics Q and R.
BENCH_COUNTS = np.array([[142, 40, 23], [34, 97, 25], [38, 32, 28]])
BENCH_SIZES = (205, 156, 98)
BENCH_Q = 282
BENCH_R = 288
BENCH_NAMES = ("B.G.", "C.A.", "B.C.")


@pytest.fixture(scope="session")
def bench_table():
    """The benchmark NNCT plus its moment context."""
    nnct = Nnct(BENCH_COUNTS.copy(), BENCH_NAMES)
    ctx = MomentContext(BENCH_SIZES, BENCH_Q, BENCH_R)
    return nnct, ctx


@pytest.fixture(scope="session")
def bench_moments(bench_table):
    _, ctx = bench_table
    return build_moments(ctx)


def make_dataset(rng: np.random.Generator, m: int,
                 lo: int = 5, hi: int = 100) -> LabeledPointSet:
    sizes = rng.integers(lo, hi + 1, size=m)
    labels = np.repeat(np.arange(m), sizes)
    coords = rng.random((int(sizes.sum()), 2))
    names = tuple(f"c{k + 1}" for k in range(m))
    return LabeledPointSet(coords, labels, names)


def empirical_moments(ctx: MomentContext, nn_index: np.ndarray,
                      n_rep: int, seed: int):
    """Count-table moments over uniform random relabelings of a fixed graph.

    The oracle against which the closed-form moment formulas are judged:
    all ``n_rep`` label permutations are drawn at once and the full m^2
    table of each is read off the fixed nearest-neighbor index vector.

    Returns ``(mean, cov, col_var, mean_se, cov_se, col_var_se)`` where
    each ``*_se`` is the Monte Carlo standard error of the corresponding
    estimate (for the covariances, from the empirical fourth moments).
    """
    m = ctx.m
    n = ctx.n
    rng = np.random.default_rng(seed)
    base = np.repeat(np.arange(m), ctx.class_sizes)
    labels = rng.permuted(np.tile(base, (n_rep, 1)), axis=1)
    codes = labels * m + labels[:, nn_index]
    offsets = (np.arange(n_rep) * m * m)[:, None]
    flat = (codes + offsets).ravel()
    tables = np.bincount(flat, minlength=n_rep * m * m).reshape(n_rep, m * m)
    tables = tables.astype(np.float64)

    mean = tables.mean(axis=0)
    centered = tables - mean
    cov = centered.T @ centered / n_rep
    mean_se = tables.std(axis=0, ddof=1) / np.sqrt(n_rep)
    prod = centered[:, :, None] * centered[:, None, :]
    cov_se = prod.std(axis=0, ddof=1) / np.sqrt(n_rep)

    colsums = tables.reshape(n_rep, m, m).sum(axis=1)
    col_var = colsums.var(axis=0)
    sq = (colsums - colsums.mean(axis=0)) ** 2
    col_var_se = sq.std(axis=0, ddof=1) / np.sqrt(n_rep)
    return mean, cov, col_var, mean_se, cov_se, col_var_se


@pytest.fixture(scope="session")
def identity_suite():
    """102 random datasets over m in {2,3,4}, sizes 5-100, fully tested.

    Each entry carries the point set, table, context, moment set, all
    five families' z matrices and overall results -- shared between the
    structural-identity and rank criteria and the unit tests.
    """
    rng = np.random.default_rng(20260819)
    suite = []
    for i in range(102):
        m = (2, 3, 4)[i % 3]
        points = make_dataset(rng, m)
        graph = build_nn_digraph(points)
        nnct = build_nnct(points, graph)
        ctx = MomentContext.from_graph(points, graph)
        moments = build_moments(ctx)
        z = {f: cell_tests(f, nnct, moments).z for f in FAMILIES}
        overall = {f: overall_test(f, nnct, moments) for f in FAMILIES}
        suite.append({
            "points": points, "graph": graph, "nnct": nnct, "ctx": ctx,
            "moments": moments, "z": z, "overall": overall,
        })
    return suite
