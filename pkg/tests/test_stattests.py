import numpy as np
import pytest

from nnct.contingency import build_nnct
from nnct.errors import ValidationError
from nnct.moments import MomentContext, build_moments
from nnct.neighbors import build_nn_digraph
from nnct.points import LabeledPointSet
from nnct.stattests import (
    OverallTestResult,
    cell_tests,
    chisq_sf,
    degrees_of_freedom,
    family_statistic,
    normal_sf,
    one_vs_rest,
    overall_test,
    pseudo_inverse,
)


def _random_points(rng, sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    coords = rng.random((sum(sizes), 2))
    names = tuple(f"k{v}" for v in range(len(sizes)))
    return LabeledPointSet(coords, labels, names)


class TestDistributions:
    def test_chisq_sf_reference_quantile(self):
        assert chisq_sf(12.592, 6) == pytest.approx(0.05, abs=1e-4)
        assert chisq_sf(0.0, 3) == 1.0

    def test_chisq_sf_monotone_in_x(self):
        xs = np.linspace(0.0, 30.0, 40)
        vals = chisq_sf(xs, 4)
        assert np.all(np.diff(vals) < 0)

    def test_chisq_sf_validation(self):
        with pytest.raises(ValueError):
            chisq_sf(1.0, 0)
        with pytest.raises(ValueError):
            chisq_sf(1.0, 2.5)
        with pytest.raises(ValueError):
            chisq_sf(-0.5, 2)

    def test_normal_sf_values(self):
        assert normal_sf(0.0) == pytest.approx(0.5)
        assert normal_sf(1.959964) == pytest.approx(0.025, abs=1e-6)
        z = np.array([-2.0, -0.5, 0.0, 1.3, 4.0])
        assert np.allclose(normal_sf(z) + normal_sf(-z), 1.0)


class TestPseudoInverse:
    def test_penrose_identities_rank_deficient(self):
        rng = np.random.default_rng(5)
        b = rng.standard_normal((6, 3))
        a = b @ b.T  # rank 3 PSD
        ap = pseudo_inverse(a)
        assert np.allclose(a @ ap @ a, a, atol=1e-9)
        assert np.allclose(ap @ a @ ap, ap, atol=1e-9)
        assert np.allclose(ap, ap.T, atol=1e-12)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.ones((2, 3)))
        with pytest.raises(ValidationError):
            pseudo_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestDegreesOfFreedom:
    @pytest.mark.parametrize("family,expected", [
        ("D", 12), ("II", 12), ("I", 9), ("III", 9), ("IV", 9),
    ])
    def test_four_class_values(self, family, expected):
        assert degrees_of_freedom(family, 4) == expected

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            degrees_of_freedom("X", 3)
        with pytest.raises(ValueError):
            degrees_of_freedom("D", 1)


class TestFamilyStatistic:
    def test_shift_families_reduce_to_counts(self, bench_table):
        nnct, ctx = bench_table
        d = family_statistic("D", nnct, ctx)
        assert np.array_equal(d, nnct.counts)

    def test_type_ii_removes_product_term(self, bench_table):
        nnct, ctx = bench_table
        sizes = np.asarray(ctx.class_sizes, dtype=np.float64)
        expected = nnct.counts - np.outer(sizes, sizes) / ctx.n
        assert np.allclose(family_statistic("II", nnct, ctx), expected)

    def test_column_sum_families_center_to_zero_mean(self, bench_table):
        # Families III and IV have exactly zero expectation, so their
        # statistic already carries the centering.
        nnct, ctx = bench_table
        moments = build_moments(ctx, ("III",))
        t = cell_tests("III", nnct, moments)
        assert np.allclose(t.expected, 0.0)
        assert np.allclose(t.statistic - t.expected, t.z * np.sqrt(t.variance))


class TestBenchIdentities:
    def test_type_ii_matches_base_z(self, bench_table, bench_moments):
        nnct, _ = bench_table
        z_d = cell_tests("D", nnct, bench_moments).z
        z_ii = cell_tests("II", nnct, bench_moments).z
        assert np.allclose(z_d, z_ii, rtol=1e-10)

    def test_type_iv_matches_type_iii_z(self, bench_table, bench_moments):
        nnct, _ = bench_table
        z3 = cell_tests("III", nnct, bench_moments).z
        z4 = cell_tests("IV", nnct, bench_moments).z
        assert np.allclose(z3, z4, rtol=1e-10)

    def test_overall_pairs_coincide(self, bench_table, bench_moments):
        nnct, _ = bench_table
        x = {f: overall_test(f, nnct, bench_moments)
             for f in ("D", "I", "II", "III", "IV")}
        assert x["D"].statistic == pytest.approx(x["II"].statistic, rel=1e-10)
        assert x["III"].statistic == pytest.approx(x["IV"].statistic, rel=1e-10)
        assert x["D"].df == 6 and x["III"].df == 4 and x["I"].df == 4

    def test_rank_warning_silent_when_rank_is_df(self, bench_table,
                                                 bench_moments):
        nnct, _ = bench_table
        for f in ("D", "I", "III"):
            res = overall_test(f, nnct, bench_moments)
            assert res.rank == res.df
            assert res.rank_matches_df
            assert res.rank_warning is None

    def test_rank_warning_text_when_deficient(self):
        res = OverallTestResult("D", 1.0, df=6, p_asy=0.5, rank=5)
        assert not res.rank_matches_df
        assert "rank 5" in res.rank_warning
        assert "df 6" in res.rank_warning


class TestTwoClassSymmetries:
    def test_antisymmetric_structure(self):
        rng = np.random.default_rng(42)
        pts = _random_points(rng, (18, 23))
        graph = build_nn_digraph(pts)
        nnct = build_nnct(pts, graph)
        ctx = MomentContext.from_graph(pts, graph)
        moments = build_moments(ctx)
        z_d = cell_tests("D", nnct, moments).z
        z_i = cell_tests("I", nnct, moments).z
        z_iii = cell_tests("III", nnct, moments).z
        # base family: each row is its own mirror
        assert np.allclose(z_d[:, 0], -z_d[:, 1], atol=1e-10)
        # type III: each column is its own mirror
        assert np.allclose(z_iii[0, :], -z_iii[1, :], atol=1e-10)
        # type I: one free value with alternating signs
        a = z_i[0, 0]
        assert np.allclose(z_i, [[a, -a], [-a, a]], atol=1e-10)

    def test_one_vs_rest_is_identity_for_two_classes(self):
        rng = np.random.default_rng(99)
        pts = _random_points(rng, (15, 20))
        graph = build_nn_digraph(pts)
        nnct = build_nnct(pts, graph)
        ctx = MomentContext.from_graph(pts, graph)
        moments = build_moments(ctx)
        ovr = one_vs_rest(nnct, ctx, focus=0)
        for f in ("D", "I", "III"):
            direct = cell_tests(f, nnct, moments)
            assert ovr.rest_cell_z[f] == pytest.approx(
                float(direct.z[1, 1]), rel=1e-10)
            assert ovr.overall[f].statistic == pytest.approx(
                overall_test(f, nnct, moments).statistic, rel=1e-10)


class TestClassPermutation:
    """Behaviour of the tests when the classes are renumbered.

    Cell z matrices ride along with the permutation for every family.
    The overall statistics of D, I and II are exactly invariant.  The
    III/IV overall statistic inverts the covariance of the contrast
    with the last class's row and column removed; the removed column
    carries real variation, so the value depends on (exactly) which
    class is listed last.
    """

    def test_z_matrices_are_equivariant(self):
        import itertools

        rng = np.random.default_rng(7)
        pts = _random_points(rng, (12, 17, 9))
        graph = build_nn_digraph(pts)
        nnct = build_nnct(pts, graph)
        moments = build_moments(MomentContext.from_graph(pts, graph))
        base_z = {f: cell_tests(f, nnct, moments).z
                  for f in ("D", "I", "II", "III", "IV")}

        for perm in itertools.permutations(range(3)):
            perm = np.asarray(perm)
            relabeled = LabeledPointSet(
                pts.coords, perm[pts.labels],
                tuple(pts.class_names[k] for k in np.argsort(perm)))
            nnct2 = build_nnct(relabeled, graph)
            moments2 = build_moments(MomentContext.from_graph(relabeled, graph))
            for f, z1 in base_z.items():
                z2 = cell_tests(f, nnct2, moments2).z
                # new cell (perm[i], perm[j]) holds the old cell (i, j)
                assert np.allclose(z2[np.ix_(perm, perm)], z1, atol=1e-10), f

    def test_overall_invariance_and_last_class_dependence(self):
        import itertools

        rng = np.random.default_rng(7)
        pts = _random_points(rng, (12, 17, 9))
        graph = build_nn_digraph(pts)
        nnct = build_nnct(pts, graph)
        moments = build_moments(MomentContext.from_graph(pts, graph))
        base = {f: overall_test(f, nnct, moments).statistic
                for f in ("D", "I", "II", "III", "IV")}

        by_last_class: dict[int, list[float]] = {}
        for perm in itertools.permutations(range(3)):
            perm = np.asarray(perm)
            relabeled = LabeledPointSet(
                pts.coords, perm[pts.labels],
                tuple(pts.class_names[k] for k in np.argsort(perm)))
            nnct2 = build_nnct(relabeled, graph)
            moments2 = build_moments(MomentContext.from_graph(relabeled, graph))
            for f in ("D", "I", "II"):
                x2 = overall_test(f, nnct2, moments2).statistic
                assert x2 == pytest.approx(base[f], rel=1e-10), f
            x_iii = overall_test("III", nnct2, moments2).statistic
            x_iv = overall_test("IV", nnct2, moments2).statistic
            # the IV == III identity survives any renumbering
            assert x_iv == pytest.approx(x_iii, rel=1e-10)
            last = int(np.flatnonzero(perm == 2)[0])  # class now listed last
            by_last_class.setdefault(last, []).append(x_iii)

        # every class takes a turn in the last slot (two permutations each)
        assert sorted(by_last_class) == [0, 1, 2]
        for last, values in by_last_class.items():
            assert values[0] == pytest.approx(values[1], rel=1e-10), last
        # the identity permutation reproduces the direct statistic
        assert by_last_class[2][0] == pytest.approx(base["III"], rel=1e-10)
        # ...and the choice of last class genuinely moves the statistic
        distinct = {round(v[0], 6) for v in by_last_class.values()}
        assert len(distinct) > 1


class TestNullCalibration:
    def test_type_iii_cell_z_is_near_standard_normal(self):
        # Complete spatial randomness should make the (1,1) z-score behave
        # like a standard normal once n is moderately large.
        rng = np.random.default_rng(20260819)
        n_rep = 2000
        vals = np.empty(n_rep)
        for k in range(n_rep):
            pts = _random_points(rng, (30, 30))
            graph = build_nn_digraph(pts)
            nnct = build_nnct(pts, graph)
            ctx = MomentContext.from_graph(pts, graph)
            moments = build_moments(ctx, ("III",))
            vals[k] = cell_tests("III", nnct, moments).z[0, 0]
        assert abs(vals.mean()) < 0.1
        assert abs(vals.std() - 1.0) < 0.1
