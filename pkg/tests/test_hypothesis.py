import math
from pathlib import Path

import mpmath
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from markerlens.exceptions import DomainError, ValidationError
from markerlens.hypothesis import (Outcome, WelchResult, run_comparison, t_two_sided_p, verdict, welch_test)
from markerlens.markers import MarkerMatrix
from markerlens.regions import RegionKind, ScoreTable
from markerlens.reporting import Report, ReportRenderer
from markerlens.simlab import SimulationParams, generate_dataset

PUBLISHED = Path(__file__).parent / "fixtures" / "published_verdicts.csv"


def welch_oracle(a, b, dps=40):
    """Welch t, df and two-sided p in extended precision."""
    with mpmath.workdps(dps):
        a = [mpmath.mpf(float(x)) for x in a]
        b = [mpmath.mpf(float(x)) for x in b]
        n_a, n_b = len(a), len(b)
        mean_a = mpmath.fsum(a) / n_a
        mean_b = mpmath.fsum(b) / n_b
        var_a = mpmath.fsum((x - mean_a) ** 2 for x in a) / (n_a - 1)
        var_b = mpmath.fsum((x - mean_b) ** 2 for x in b) / (n_b - 1)
        se_a, se_b = var_a / n_a, var_b / n_b
        t = (mean_a - mean_b) / mpmath.sqrt(se_a + se_b)
        df = (se_a + se_b) ** 2 / (se_a ** 2 / (n_a - 1) + se_b ** 2 / (n_b - 1))
        p = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
        return float(t), float(df), float(p)


class TestWelchTest:

    def test_reference_example(self):
        result = welch_test([1, 2, 3, 4], [2, 3, 4, 5])
        assert result.t == pytest.approx(-1.095445, abs=1e-6)
        assert result.df == pytest.approx(6.0)
        assert result.p == pytest.approx(0.3153, abs=1e-4)

    def test_identical_samples(self):
        result = welch_test([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
        assert result.t == 0.0
        assert result.p == pytest.approx(1.0)

    def test_constant_unequal(self):
        result = welch_test([0, 0, 0], [1, 1, 1])
        assert result.p == 0.0
        assert result.t == -math.inf
        assert result.df is None
        assert result.mean_a < result.mean_b

    def test_constant_equal_is_undefined(self):
        result = welch_test([0.5, 0.5], [0.5, 0.5, 0.5])
        assert not result.defined
        assert result.t is None and result.df is None and result.p is None

    def test_constant_inexact_reals_are_undefined(self):
        result = welch_test([0.1] * 10, [0.1] * 7)
        assert result.mean_a == result.mean_b == 0.1
        assert result.var_a == 0.0 and result.var_b == 0.0
        assert result.p is None
        assert verdict(RegionKind.TOP_K, result) is Outcome.UNDETERMINED

    def test_constant_inexact_reals_unequal(self):
        result = welch_test([0.1] * 10, [0.3] * 7)
        assert result.p == 0.0
        assert result.t == -math.inf

    def test_single_element_sample(self):
        result = welch_test([1.0], [0.0, 2.0])
        assert result.var_a == 0.0
        assert result.df == pytest.approx(1.0)
        assert result.t == pytest.approx(0.0)

    def test_empty_sample(self):
        with pytest.raises(DomainError):
            welch_test([], [1.0])

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            welch_test([1.0, math.inf], [1.0, 2.0])

    @pytest.mark.parametrize("t", [0.3, 1.0, 2.5, 10.0])
    def test_closed_forms(self, t):
        assert t_two_sided_p(t, 1.0) == pytest.approx(1 - 2 / math.pi * math.atan(t), rel=1e-12)
        assert t_two_sided_p(t, 2.0) == pytest.approx(1 - t / math.sqrt(2 + t * t), rel=1e-12)

    def test_matches_high_precision_oracle(self):
        rng = np.random.default_rng(20240917)
        for _ in range(1000):
            n_a, n_b = rng.integers(2, 201, size=2)
            scale_a, scale_b = rng.uniform(0.1, 5.0, size=2)
            a = rng.normal(0.0, scale_a, size=n_a)
            b = rng.normal(rng.uniform(-1.0, 1.0), scale_b, size=n_b)
            result = welch_test(a, b)
            t, df, p = welch_oracle(a, b)
            assert abs(result.p - p) <= 1e-9
            assert abs(result.df - df) <= 1e-9
            assert result.t == pytest.approx(t, rel=1e-9)

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=30),
           st.lists(st.floats(-100, 100), min_size=2, max_size=30))
    def test_symmetry(self, a, b):
        forward = welch_test(a, b)
        backward = welch_test(b, a)
        if forward.p is None:
            assert backward.p is None
            return
        assert backward.p == pytest.approx(forward.p, abs=1e-12)
        assert (forward.t == 0 and backward.t == 0) or forward.t == pytest.approx(-backward.t)
        if forward.df is not None:
            assert backward.df == pytest.approx(forward.df)


def as_result(mean_a, mean_b, p):
    return WelchResult(mean_a, mean_b, 0.0, 0.0, 1, 1, None, None, p)


class TestVerdict:

    def test_published_tables(self):
        table = pd.read_csv(PUBLISHED)
        for row in table.itertuples(index=False):
            p = None if pd.isna(row.p_value) else float(row.p_value)
            outcome = verdict(RegionKind.parse(row.test), as_result(row.mean_a, row.mean_b, p))
            assert outcome.value == row.result, row

    @pytest.mark.parametrize("kind,mean_a,mean_b,expected", [
        (RegionKind.TOP_K, 0.617138, 0.516348, Outcome.FAILURE),
        (RegionKind.MOVERS, 0.00036, 0.00016, Outcome.UNDETERMINED),
        (RegionKind.BOTTOM_K, 0.09788, -0.16862, Outcome.SUCCESS),
    ])
    def test_examples(self, kind, mean_a, mean_b, expected):
        p = 0.296 if kind is RegionKind.MOVERS else 1e-20
        assert verdict(kind, as_result(mean_a, mean_b, p)) is expected

    def test_boundary_is_significant(self):
        assert verdict(RegionKind.TOP_K, as_result(0.1, 0.2, 0.05), 0.05) is Outcome.SUCCESS

    @given(st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
    def test_level_monotonicity(self, p, mean_a, mean_b, low, high):
        low, high = sorted((low, high))
        for kind in RegionKind:
            strict = verdict(kind, as_result(mean_a, mean_b, p), low)
            loose = verdict(kind, as_result(mean_a, mean_b, p), high)
            if strict is not Outcome.UNDETERMINED:
                assert loose is strict


class TestRunComparison:

    def test_toy_fixture(self, toy_scores, toy_reconciled, toy_expected):
        results = run_comparison(toy_scores, toy_reconciled, [2])
        assert [r.kind for r in results] == list(RegionKind)
        rows = [(r.kind.label, row) for r in results for row in r.rows]
        assert len(rows) == len(toy_expected["details"])
        for (label, row), expected in zip(rows, toy_expected["details"]):
            assert label == expected["test"]
            assert row.marker == expected["marker"]
            assert row.result.mean_a == pytest.approx(expected["mean_a"])
            assert row.result.mean_b == pytest.approx(expected["mean_b"])
            assert row.outcome.value == expected["result"]
            if expected["p_value"] is None:
                assert row.result.p is None
            else:
                assert row.result.p == pytest.approx(expected["p_value"], abs=1e-12)
            if isinstance(expected["t"], str):
                assert row.result.t == float(expected["t"])
            elif expected["t"] is not None:
                assert row.result.t == pytest.approx(expected["t"])
            if expected["df"] is not None:
                assert row.result.df == pytest.approx(expected["df"])

    def test_all_abstain(self, toy_scores):
        markers = MarkerMatrix(toy_scores.sample_ids, ["Silent"])
        results = run_comparison(toy_scores, markers, [1, 2, 3])
        assert all(r.verdict is Outcome.UNDETERMINED for r in results)
        assert all(not r.combined.defined for r in results)

    def test_identical_models(self, toy_scores, toy_reconciled):
        same = ScoreTable(toy_scores.sample_ids, toy_scores.score_ref, toy_scores.score_ref)
        results = run_comparison(same, toy_reconciled, [2, 3], [RegionKind.TOP_K, RegionKind.BOTTOM_K])
        assert all(r.verdict is Outcome.UNDETERMINED for r in results)

    def test_order_kind_then_k(self, toy_scores, toy_reconciled):
        results = run_comparison(toy_scores, toy_reconciled, [3, 1, 3], [RegionKind.MOVERS, RegionKind.TOP_K])
        assert [(r.kind, r.k) for r in results] == [
            (RegionKind.TOP_K, 1), (RegionKind.TOP_K, 3), (RegionKind.MOVERS, 1), (RegionKind.MOVERS, 3)]

    def test_swap_flips_verdicts(self, toy_scores, toy_reconciled):
        forward = run_comparison(toy_scores, toy_reconciled, [2])
        backward = run_comparison(toy_scores.swapped(), toy_reconciled, [2])
        flip = {Outcome.SUCCESS: Outcome.FAILURE, Outcome.FAILURE: Outcome.SUCCESS,
                Outcome.UNDETERMINED: Outcome.UNDETERMINED}
        for f, b in zip(forward, backward):
            assert b.verdict is flip[f.verdict]
            assert b.combined.p == f.combined.p

    def test_mismatched_universe(self, toy_scores, toy_markers):
        with pytest.raises(ValidationError):
            run_comparison(toy_scores, toy_markers, [2])

    def test_k_too_large(self, toy_scores, toy_reconciled):
        with pytest.raises(DomainError):
            run_comparison(toy_scores, toy_reconciled, [10])

    def test_movers_limit_only_with_movers(self, toy_scores, toy_reconciled):
        results = run_comparison(toy_scores, toy_reconciled, [6], [RegionKind.TOP_K])
        assert results[0].k == 6
        with pytest.raises(DomainError):
            run_comparison(toy_scores, toy_reconciled, [4])

    def test_rank_invariance(self):
        renderer = ReportRenderer()
        for seed in range(100):
            dataset = generate_dataset(SimulationParams(n=300, k=30, seed=seed))
            markers = dataset.marker_matrix()
            base = dataset.score_table()
            transformed = ScoreTable(base.sample_ids, np.exp(7 * base.score_ref), base.score_test)
            a = renderer.render(Report(run_comparison(base, markers, [30])), "csv")
            b = renderer.render(Report(run_comparison(transformed, markers, [30])), "csv")
            assert a == b
