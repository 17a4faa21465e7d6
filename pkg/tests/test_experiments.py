import numpy as np
import pytest

from nnct.errors import ValidationError
from nnct.experiments import (
    CSV_HEADER,
    THREE_CLASS_GRID,
    TWO_CLASS_GRID,
    ExperimentRow,
    ExperimentSpec,
    TestTarget,
    parse_target_list,
    run_experiment,
    size_thresholds,
)
from nnct.patterns import PatternSpec


def _spec(**kw):
    defaults = dict(
        pattern=PatternSpec("csr", (8, 8)),
        combos=((8, 8),),
        targets=(TestTarget("overall"),),
        families=("D",),
        n_rep=10,
        seed=3,
    )
    defaults.update(kw)
    return ExperimentSpec(**defaults)


class TestThresholds:
    def test_reference_band(self):
        lo, hi = size_thresholds(0.05, 10_000)
        assert (round(lo, 4), round(hi, 4)) == (0.0464, 0.0536)

    def test_two_sided_band_is_wider(self):
        lo1, hi1 = size_thresholds(0.05, 1000)
        lo2, hi2 = size_thresholds(0.05, 1000, two_sided=True)
        assert lo2 < lo1 < hi1 < hi2
        assert lo1 + hi1 == pytest.approx(0.1)

    def test_half_width_scales_with_replicates(self):
        lo1, hi1 = size_thresholds(0.05, 1000)
        lo4, hi4 = size_thresholds(0.05, 4000)
        assert (hi4 - lo4) == pytest.approx((hi1 - lo1) / 2.0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            size_thresholds(0.0, 100)
        with pytest.raises(ValidationError):
            size_thresholds(1.0, 100)
        with pytest.raises(ValidationError):
            size_thresholds(0.05, 0)


class TestTargets:
    @pytest.mark.parametrize("text,kind,cell,focus", [
        ("cell(1,2)", "cell", (0, 1), None),
        ("overall", "overall", None, None),
        ("ovr_cell(2)", "ovr_cell", (1, 1), 1),
        ("ovr_overall(3)", "ovr_overall", None, 2),
    ])
    def test_parse_and_label_round_trip(self, text, kind, cell, focus):
        t = TestTarget.parse(text)
        assert t.kind == kind and t.cell == cell and t.focus == focus
        assert t.label() == text
        assert TestTarget.parse(t.label()) == t

    @pytest.mark.parametrize("bad", [
        "cell(0,1)", "ovr_cell(0)", "cell(1)", "overall(1)", "junk", "",
    ])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValidationError):
            TestTarget.parse(bad)

    def test_constructor_validation(self):
        with pytest.raises(ValidationError):
            TestTarget("cell")
        with pytest.raises(ValidationError):
            TestTarget("overall", cell=(0, 0))
        with pytest.raises(ValidationError):
            TestTarget("ovr_overall")

    def test_list_parsing_is_paren_aware(self):
        out = parse_target_list("cell(1,1), overall ,ovr_overall(2)")
        assert [t.label() for t in out] == ["cell(1,1)", "overall",
                                            "ovr_overall(2)"]
        with pytest.raises(ValidationError):
            parse_target_list(" , ")


class TestSpecValidation:
    def test_combo_shapes(self):
        with pytest.raises(ValidationError):
            _spec(combos=())
        with pytest.raises(ValidationError):
            _spec(combos=((8, 8), (8, 8, 8)))

    def test_family_checks(self):
        with pytest.raises(ValidationError):
            _spec(families=("D", "X"))
        with pytest.raises(ValidationError):
            _spec(families=("D", "D"))
        with pytest.raises(ValidationError):
            _spec(families=())

    def test_target_checks(self):
        with pytest.raises(ValidationError):
            _spec(targets=())
        with pytest.raises(ValidationError):
            _spec(targets=(TestTarget("overall"), TestTarget("overall")))
        with pytest.raises(ValidationError):
            _spec(targets=(TestTarget("cell", cell=(2, 2)),))  # outside 2x2
        with pytest.raises(ValidationError):
            _spec(targets=(TestTarget("ovr_overall", focus=2),))

    def test_scalar_checks(self):
        with pytest.raises(ValidationError):
            _spec(alpha=1.0)
        with pytest.raises(ValidationError):
            _spec(n_rep=0)
        with pytest.raises(ValidationError):
            _spec(mode="study")
        with pytest.raises(ValidationError):
            _spec(route="bootstrap")
        with pytest.raises(ValidationError):
            _spec(route="rand", route_n_rep=0)

    def test_pattern_template_mismatch_fails_eagerly(self):
        seg = PatternSpec("segregation2", (8, 8), s=0.25)
        with pytest.raises(ValidationError):
            _spec(pattern=seg, combos=((8, 8, 8),))
        with pytest.raises(ValidationError):
            _spec(pattern_level="II")  # csr has no levels
        with pytest.raises(ValidationError):
            _spec(pattern=seg, combos=((8, 8),), pattern_level="4")

    def test_grids_have_expected_shape(self):
        assert len(TWO_CLASS_GRID) == 8
        assert all(len(c) == 2 for c in TWO_CLASS_GRID)
        assert len(THREE_CLASS_GRID) == 13
        assert all(len(c) == 3 for c in THREE_CLASS_GRID)
        assert TWO_CLASS_GRID[-1] == (100, 100)
        assert THREE_CLASS_GRID[-1] == (100, 100, 100)


class TestVerdicts:
    def _row(self, n_reject, lower=0.0464, upper=0.0536, n_valid=10_000):
        return ExperimentRow(
            pattern="csr", params="", sizes=(50, 50), family="D",
            target="overall", alpha=0.05, n_valid=n_valid,
            n_reject=n_reject, seed=0, lower=lower, upper=upper,
        )

    def test_band_edges_are_inclusive(self):
        assert self._row(464).verdict == "ok"
        assert self._row(536).verdict == "ok"
        assert self._row(463).verdict == "conservative"
        assert self._row(537).verdict == "liberal"

    def test_power_rows_have_no_verdict(self):
        row = self._row(464, lower=None, upper=None)
        assert row.verdict is None

    def test_all_degenerate_has_no_rate(self):
        row = self._row(0, n_valid=0)
        assert row.reject_rate is None
        assert row.verdict is None


class TestRuns:
    def test_csv_header_and_shape(self):
        spec = _spec(targets=(TestTarget("overall"),
                              TestTarget("cell", cell=(0, 0))),
                     families=("D", "III"))
        res = run_experiment(spec)
        text = res.to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        # one combo x two families x two targets
        assert len(lines) == 1 + 1 * 2 * 2
        assert len(res.rows) == 4

    def test_runs_are_deterministic_across_workers(self):
        spec = _spec(n_rep=40, families=("D", "III"),
                     targets=(TestTarget("overall"),
                              TestTarget("cell", cell=(1, 1))),
                     combos=((8, 8), (10, 6)))
        a = run_experiment(spec, workers=1).to_csv()
        b = run_experiment(spec, workers=1).to_csv()
        c = run_experiment(spec, workers=2).to_csv()
        assert a == b == c

    def test_seed_changes_results(self):
        base = _spec(n_rep=60)
        alt = _spec(n_rep=60, seed=4)
        a = run_experiment(base)
        b = run_experiment(alt)
        assert a.rows[0].n_reject != b.rows[0].n_reject or \
            a.rows[0].seed != b.rows[0].seed

    def test_fully_degenerate_family_yields_empty_cells(self):
        spec = _spec(families=("IV",), combos=((6, 1),),
                     pattern=PatternSpec("csr", (6, 1)))
        res = run_experiment(spec)
        row = res.rows[0]
        assert row.n_valid == 0 and row.reject_rate is None
        line = res.to_csv().splitlines()[1]
        fields = line.split(",")
        assert fields[8] == "0"      # no valid replicates
        assert fields[9] == ""       # no rate
        assert fields[10] == ""      # no verdict

    def test_size_rows_carry_band_power_rows_do_not(self):
        size_res = run_experiment(_spec(n_rep=25))
        assert size_res.rows[0].lower is not None
        pow_spec = _spec(
            pattern=PatternSpec("segregation2", (30, 30), s=1 / 3),
            combos=((30, 30),), mode="power", n_rep=25,
            families=("III",),
        )
        pow_res = run_experiment(pow_spec)
        row = pow_res.rows[0]
        assert row.lower is None and row.verdict is None
        # strong segregation at n=60 rejects most of the time
        assert row.reject_rate > 0.5

    def test_pattern_level_recomputes_radii_per_combo(self):
        spec = _spec(
            pattern=PatternSpec("association2", (10, 10), radii=(0.1,)),
            combos=((10, 10), (30, 30)), pattern_level="II",
            families=("III",), n_rep=5,
        )
        res = run_experiment(spec)
        by_combo = {r.sizes: r.params for r in res.rows}
        assert by_combo[(10, 10)] == "level=II;r=0.0745356"
        assert by_combo[(30, 30)] == "level=II;r=0.0430331"

    def test_rl_redraw_alters_the_tally(self):
        base = dict(
            pattern=PatternSpec("rl_fixed", (12, 12), rl_case=2),
            combos=((12, 12),), n_rep=80, families=("D",),
            targets=(TestTarget("cell", cell=(0, 0)),), seed=9,
        )
        fixed = run_experiment(ExperimentSpec(**base))
        redraw = run_experiment(ExperimentSpec(**base, rl_redraw=True))
        assert "redraw=1" in redraw.rows[0].params
        assert "redraw" not in fixed.rows[0].params
        assert fixed.rows[0].n_reject != redraw.rows[0].n_reject or \
            fixed.rows[0].params != redraw.rows[0].params

    def test_resampling_route_matches_inline_runs(self):
        spec = _spec(route="rand", route_n_rep=19, n_rep=12,
                     families=("D", "I"))
        a = run_experiment(spec, workers=1).to_csv()
        b = run_experiment(spec, workers=3).to_csv()
        assert a == b

    def test_find_filters_rows(self):
        spec = _spec(targets=(TestTarget("overall"),
                              TestTarget("ovr_overall", focus=0)),
                     families=("D", "III"), combos=((8, 8), (6, 10)))
        res = run_experiment(spec)
        assert len(res.find(sizes=(8, 8))) == 4
        assert len(res.find(family="D")) == 4
        assert len(res.find(target="ovr_overall(1)")) == 4
        only = res.find(sizes=(6, 10), family="III", target="overall")
        assert len(only) == 1

    def test_save_csv_round_trips(self, tmp_path):
        res = run_experiment(_spec())
        path = tmp_path / "out.csv"
        res.save_csv(path)
        assert path.read_text() == res.to_csv()
