import json

import numpy as np
import pytest

from nnct.errors import ValidationError
from nnct.patterns import PatternSpec, generate
from nnct.points import LabeledPointSet, Rectangle
from nnct.report import SCHEMA_VERSION, analyze_points, report_json, report_text


@pytest.fixture(scope="module")
def csr_points():
    return generate(PatternSpec("csr", (15, 12, 9), seed=2))


@pytest.fixture(scope="module")
def seg_points():
    # heavy two-class segregation: plenty of significant cells
    return generate(PatternSpec("segregation2", (60, 60), s=1 / 3, seed=4))


@pytest.fixture(scope="module")
def singleton_points():
    rng = np.random.default_rng(10)
    labels = np.repeat([0, 1], [8, 1])
    return LabeledPointSet(rng.random((9, 2)), labels, ("big", "solo"))


class TestStructure:
    def test_top_level_shape(self, csr_points):
        rep = analyze_points(csr_points)
        assert rep["schema_version"] == SCHEMA_VERSION
        assert rep["alpha"] == 0.05
        assert rep["input"]["n"] == 36
        assert rep["input"]["m"] == 3
        assert rep["input"]["class_sizes"] == [15, 12, 9]
        assert sorted(rep["families"]) == ["D", "I", "III"]
        assert len(rep["one_vs_rest"]) == 3
        assert "mc" not in rep  # no resampling was requested

    def test_family_block_carries_matrices(self, csr_points):
        rep = analyze_points(csr_points, families=("D",))
        blk = rep["families"]["D"]
        for key in ("Z", "expected", "p_asy", "p_left", "p_right"):
            assert len(blk[key]) == 3
            assert all(len(row) == 3 for row in blk[key])
        assert blk["overall"]["df"] == 6
        assert blk["overall"]["rank"] == 6
        assert blk["overall"]["warning"] is None
        assert 0.0 <= blk["overall"]["p_asy"] <= 1.0

    def test_table_block_is_consistent(self, csr_points):
        rep = analyze_points(csr_points)
        counts = np.asarray(rep["nnct"]["counts"])
        assert counts.sum() == 36
        assert rep["nnct"]["row_sums"] == [15, 12, 9]
        assert sum(rep["nnct"]["col_sums"]) == 36
        assert np.isclose(np.sum(rep["nnct"]["pi_hat"]), 1.0)

    def test_one_vs_rest_blocks_are_one_based(self, csr_points):
        rep = analyze_points(csr_points)
        foci = [b["focus"] for b in rep["one_vs_rest"]]
        assert foci == [1, 2, 3]
        blk = rep["one_vs_rest"][0]
        assert blk["class_name"] == rep["input"]["class_names"][0]
        fam = blk["families"]["D"]
        assert isinstance(fam["Z_rest"], float)
        assert fam["overall"]["df"] == 2

    def test_one_vs_rest_can_be_disabled(self, csr_points):
        rep = analyze_points(csr_points, include_one_vs_rest=False)
        assert "one_vs_rest" not in rep

    def test_significant_cells_on_segregated_data(self, seg_points):
        rep = analyze_points(seg_points, families=("III",))
        sig = rep["families"]["III"]["significant"]
        # diagonal excess: both (1,1) and (2,2) positive
        assert [1, 1, "+"] in sig and [2, 2, "+"] in sig
        profile = rep["segregation_profile"]["classes"]
        assert all(p["label"] == "total segregation" for p in profile)
        assert profile[0]["segregated_from"] == [2]
        assert profile[1]["segregated_from"] == [1]


class TestMonteCarlo:
    def test_requires_seed(self, csr_points):
        with pytest.raises(ValidationError):
            analyze_points(csr_points, nmc=9)

    def test_mc_mode_keys(self, csr_points):
        rep = analyze_points(csr_points, nmc=19, seed=1, null="csr")
        assert rep["mc"]["mode"] == "mc"
        blk = rep["families"]["D"]
        assert len(blk["p_mc"]) == 3
        assert "p_rand" not in blk
        assert 0.05 <= blk["overall"]["p_mc"] <= 1.0
        assert "p_mc" in rep["one_vs_rest"][0]["families"]["D"]

    def test_rand_mode_keys(self, csr_points):
        rep = analyze_points(csr_points, nmc=19, seed=1, null="rl")
        assert rep["mc"]["mode"] == "rand"
        blk = rep["families"]["D"]
        assert "p_rand" in blk and "p_mc" not in blk
        assert "p_rand" in blk["overall"]

    def test_region_is_recorded(self, csr_points):
        rep = analyze_points(csr_points, nmc=9, seed=1,
                             region=Rectangle(0, 0, 2, 2))
        assert rep["mc"]["region"] == [0.0, 0.0, 2.0, 2.0]

    def test_same_seed_same_json(self, csr_points):
        a = report_json(analyze_points(csr_points, nmc=29, seed=6))
        b = report_json(analyze_points(csr_points, nmc=29, seed=6))
        assert a == b


class TestDegradation:
    def test_cell_error_keeps_overall(self, singleton_points):
        rep = analyze_points(singleton_points, families=("D", "III"))
        blk = rep["families"]["III"]
        assert "cell_error" in blk
        assert "Z" not in blk
        assert np.isfinite(blk["overall"]["X"])

    def test_infeasible_family_reports_error(self, singleton_points):
        rep = analyze_points(singleton_points, families=("IV",))
        assert set(rep["families"]["IV"]) == {"error"}

    def test_rank_warning_surfaces(self, singleton_points):
        rep = analyze_points(singleton_points, families=("D",))
        overall = rep["families"]["D"]["overall"]
        # the constant diagonal cell drops the rank below m(m-1)
        assert overall["rank"] < overall["df"]
        assert "generalized inverse" in overall["warning"]


class TestRendering:
    def test_json_round_trip_preserves_text(self, csr_points):
        rep = analyze_points(csr_points, nmc=19, seed=3)
        text_direct = report_text(rep)
        text_via_json = report_text(json.loads(report_json(rep)))
        assert text_direct == text_via_json

    def test_json_is_sorted_and_newline_terminated(self, csr_points):
        out = report_json(analyze_points(csr_points))
        assert out.endswith("\n")
        parsed = json.loads(out)
        assert list(parsed) == sorted(parsed)

    def test_text_mentions_key_results(self, seg_points):
        rep = analyze_points(seg_points, families=("D", "III"))
        text = report_text(rep)
        assert "overall: X =" in text
        assert "family III" in text
        assert "segregation" in text

    def test_text_renders_degraded_blocks(self, singleton_points):
        text = report_text(analyze_points(singleton_points,
                                          families=("D", "IV")))
        # cells degraded but overall still printed for family D
        assert "cell tests not available" in text
        assert "overall: X =" in text
        # family IV cannot run at all with a singleton class
        assert "family IV needs every class size >= 2" in text

    def test_nan_becomes_null_in_json(self, csr_points):
        rep = analyze_points(csr_points, families=("D",))
        out = report_json(rep)
        assert "NaN" not in out  # json module would emit bare NaN otherwise
