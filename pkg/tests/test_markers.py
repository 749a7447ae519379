import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markerlens.exceptions import DomainError, FormatError, UnknownIdError
from markerlens.markers import (MarkerMatrix, Verdict, average_marker_score, combined_score, load_marker_file,
                                per_marker_average)


def matrix_from(rows):
    """rows: {sample: [verdicts]} over markers m0..m{M-1}"""
    samples = sorted(rows)
    width = len(next(iter(rows.values())))
    return MarkerMatrix.from_dense(samples, [f"m{j}" for j in range(width)], [rows[s] for s in samples])


class TestCombinedScore:

    def test_majority_malicious(self):
        matrix = matrix_from({"s": [1, 1, -1]})
        assert combined_score(matrix, "s") is Verdict.MALICIOUS

    def test_tie_abstains(self):
        matrix = matrix_from({"s": [1, -1, 0]})
        assert combined_score(matrix, "s") is Verdict.ABSTAIN

    def test_all_abstain(self):
        matrix = matrix_from({"s": [0, 0, 0]})
        assert combined_score(matrix, "s") is Verdict.ABSTAIN

    def test_majority_benign(self):
        matrix = matrix_from({"s": [-1, -1, 0, 1]})
        assert combined_score(matrix, "s") is Verdict.BENIGN

    def test_unknown_sample(self):
        matrix = matrix_from({"s": [1]})
        with pytest.raises(UnknownIdError):
            combined_score(matrix, "nope")

    def test_sum_aggregation(self):
        matrix = matrix_from({"a": [1, 1, -1], "b": [-1, -1, -1]})
        assert list(matrix.combined_scores("sum")) == [1, -3]
        assert list(matrix.combined_scores("majority")) == [1, -1]

    def test_unknown_aggregation(self):
        with pytest.raises(DomainError):
            matrix_from({"a": [1]}).combined_scores("mean")

    @given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3), min_size=1, max_size=20))
    def test_negation_antisymmetry(self, rows):
        samples = [f"s{i:02d}" for i in range(len(rows))]
        matrix = MarkerMatrix.from_dense(samples, ["a", "b", "c"], rows)
        negated = matrix.negated()
        for sample in samples:
            assert combined_score(negated, sample) == -combined_score(matrix, sample)

    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=8), st.randoms())
    def test_marker_order_invariance(self, verdicts, rnd):
        names = [f"m{j}" for j in range(len(verdicts))]
        order = list(range(len(verdicts)))
        rnd.shuffle(order)
        a = MarkerMatrix.from_dense(["s"], names, [verdicts])
        b = MarkerMatrix.from_dense(["s"], [names[j] for j in order], [[verdicts[j] for j in order]])
        assert combined_score(a, "s") == combined_score(b, "s")


class TestAverageMarkerScore:

    def test_toy_cms(self, toy_reconciled, toy_expected):
        for sample, value in toy_expected["combined_scores"].items():
            assert combined_score(toy_reconciled, sample) == value

    def test_average(self, toy_reconciled):
        assert average_marker_score(toy_reconciled, ["s3", "s4"]) == 1.0
        assert average_marker_score(toy_reconciled, ["s5", "s6"]) == -0.5

    def test_duplicates_collapse(self, toy_reconciled):
        assert average_marker_score(toy_reconciled, ["s3", "s3", "s6"]) == 0.0

    def test_empty_set(self, toy_reconciled):
        with pytest.raises(DomainError):
            average_marker_score(toy_reconciled, [])

    def test_bounds(self, toy_reconciled):
        value = average_marker_score(toy_reconciled, toy_reconciled.sample_ids)
        assert -1.0 <= value <= 1.0

    def test_per_marker_average(self, toy_reconciled):
        assert per_marker_average(toy_reconciled, ["s1", "s2"], "SuspiciousImports") == 0.5
        assert per_marker_average(toy_reconciled, ["s1", "s2"], "DomainPopularity") == -0.5

    @given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=2, max_size=2), min_size=1, max_size=20))
    def test_negation_antisymmetry(self, rows):
        samples = [f"s{i:02d}" for i in range(len(rows))]
        matrix = MarkerMatrix.from_dense(samples, ["a", "b"], rows)
        negated = matrix.negated()
        for aggregation in ("majority", "sum"):
            assert average_marker_score(negated, samples, aggregation) == \
                -average_marker_score(matrix, samples, aggregation)
        assert per_marker_average(negated, samples, "a") == -per_marker_average(matrix, samples, "a")

    @given(st.lists(st.tuples(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3), st.booleans()),
                    min_size=2, max_size=20))
    def test_partition_weighted_mean(self, rows):
        samples = [f"s{i:02d}" for i in range(len(rows))]
        matrix = MarkerMatrix.from_dense(samples, ["a", "b", "c"], [verdicts for verdicts, _ in rows])
        left = [s for s, (_, side) in zip(samples, rows) if side]
        right = [s for s, (_, side) in zip(samples, rows) if not side]
        parts = [part for part in (left, right) if part]
        weighted = sum(len(part) * average_marker_score(matrix, part) for part in parts) / len(samples)
        assert average_marker_score(matrix, samples) == pytest.approx(weighted, abs=1e-12)


class TestMarkerMatrix:

    def test_from_records_sorted(self):
        matrix = MarkerMatrix.from_records([("b", "y", 1), ("a", "x", -1)])
        assert matrix.sample_ids == ("a", "b")
        assert matrix.marker_names == ("x", "y")
        assert matrix.verdict("a", "x") is Verdict.BENIGN
        assert matrix.verdict("a", "y") is Verdict.ABSTAIN

    def test_from_records_duplicate(self):
        with pytest.raises(FormatError):
            MarkerMatrix.from_records([("a", "x", 1), ("a", "x", -1)])

    def test_from_records_bad_verdict(self):
        with pytest.raises(FormatError):
            MarkerMatrix.from_records([("a", "x", 2)])

    def test_coverage(self, toy_reconciled):
        # s1 has only an explicit abstain, s5 has nothing
        assert toy_reconciled.coverage == pytest.approx(4 / 6)

    def test_reindex(self, toy_markers):
        matrix, dropped = toy_markers.reindex(["s1", "s3", "zz"])
        assert dropped == ["s2", "s4", "s6"]
        assert matrix.sample_ids == ("s1", "s3", "zz")
        assert list(matrix.row("zz")) == [0, 0]
        assert matrix.verdict("s3", "SuspiciousImports") is Verdict.MALICIOUS

    def test_join(self):
        a = MarkerMatrix.from_dense(["s1", "s2"], ["a"], [[1], [0]])
        b = MarkerMatrix.from_dense(["s1", "s2"], ["b"], [[1], [-1]])
        joined = a.join(b)
        assert joined.marker_names == ("a", "b")
        assert list(joined.combined_scores()) == [1, -1]

    def test_combined_scores_read_only(self, toy_reconciled):
        scores = toy_reconciled.combined_scores()
        with pytest.raises(ValueError):
            scores[0] = 5

    @given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3), min_size=1, max_size=20))
    def test_silent_marker_changes_nothing(self, rows):
        samples = [f"s{i:02d}" for i in range(len(rows))]
        matrix = MarkerMatrix.from_dense(samples, ["a", "b", "c"], rows)
        joined = matrix.join(MarkerMatrix(samples, ["Silent"]))
        for aggregation in ("majority", "sum"):
            assert list(joined.combined_scores(aggregation)) == list(matrix.combined_scores(aggregation))

    def test_combined_scores_fixed_at_construction(self, toy_reconciled):
        first = toy_reconciled.combined_scores("sum")
        assert toy_reconciled.combined_scores("sum") is first
        assert not first.flags.writeable

    def test_from_dense_rejects_values(self):
        with pytest.raises(DomainError):
            MarkerMatrix.from_dense(["s"], ["m"], [[3]])


class TestLoadMarkerFile:

    def test_csv_and_jsonl_agree(self, fixtures_dir):
        csv_matrix = load_marker_file(fixtures_dir / "toy_markers.csv")
        jsonl_matrix = load_marker_file(fixtures_dir / "toy_markers.jsonl")
        assert csv_matrix.sample_ids == jsonl_matrix.sample_ids
        assert csv_matrix.marker_names == jsonl_matrix.marker_names
        assert np.array_equal(csv_matrix.combined_scores(), jsonl_matrix.combined_scores())

    def test_row_order_irrelevant(self, fixtures_dir):
        lines = (fixtures_dir / "toy_markers.csv").read_text().splitlines()
        shuffled = "\n".join([lines[0]] + list(reversed(lines[1:]))) + "\n"
        a = load_marker_file(fixtures_dir / "toy_markers.csv")
        b = load_marker_file(io.StringIO(shuffled), name="shuffled.csv")
        assert a.sample_ids == b.sample_ids
        assert np.array_equal(a.combined_scores("sum"), b.combined_scores("sum"))

    def test_empty_file(self):
        matrix = load_marker_file(io.StringIO(""), name="empty.csv")
        assert matrix.shape == (0, 0)

    def test_bad_verdict_reports_line(self):
        text = "sample_id,marker,verdict\ns1,m,1\ns2,m,7\n"
        with pytest.raises(FormatError) as info:
            load_marker_file(io.StringIO(text), name="bad.csv")
        assert info.value.line == 3
        assert "bad.csv:3" in str(info.value)

    def test_duplicate_pair_reports_line(self):
        text = "sample_id,marker,verdict\ns1,m,1\ns1,m,-1\n"
        with pytest.raises(FormatError) as info:
            load_marker_file(io.StringIO(text), name="dup.csv")
        assert info.value.line == 3

    def test_missing_column(self):
        with pytest.raises(FormatError):
            load_marker_file(io.StringIO("sample_id,verdict\ns1,1\n"), name="cols.csv")
