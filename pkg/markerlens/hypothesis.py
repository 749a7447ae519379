"""
Welch's unequal-variance t-test over region pairs and the S/F/U verdicts.

Every test is two-sided at a configurable level (0.05 by default); the sign
of the mean difference then decides between Success and Failure according
to the region kind.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .exceptions import DomainError, ValidationError
from .markers import COMBINED_SCORE_NAME, MarkerMatrix
from .regions import RegionKind, ScoreTable, rank_table, region_indices

logger = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.05


class Outcome(str, Enum):
    """Verdict of one region test."""

    SUCCESS = "S"
    FAILURE = "F"
    UNDETERMINED = "U"


@dataclass(frozen=True)
class WelchResult:
    """
    Summary of one Welch test.

    ``t``, ``df`` and ``p`` are None when undefined (both samples constant
    with equal means). When both samples are constant with different means
    ``p`` is 0, ``t`` is +/-inf and ``df`` is None.
    """

    mean_a: float
    mean_b: float
    var_a: float
    var_b: float
    n_a: int
    n_b: int
    t: Optional[float]
    df: Optional[float]
    p: Optional[float]

    @property
    def defined(self) -> bool:
        return self.p is not None


@dataclass(frozen=True)
class MarkerTestRow:
    """Welch test and verdict of a single marker within one region test."""

    marker: str
    result: WelchResult
    outcome: Outcome


@dataclass(frozen=True)
class TestResult:
    """Outcome of one region test: the combined score plus the per-marker breakdown."""

    __test__ = False

    kind: RegionKind
    k: int
    combined: WelchResult
    verdict: Outcome
    per_marker: List[MarkerTestRow] = field(default_factory=list)
    level: float = DEFAULT_LEVEL

    @property
    def rows(self) -> List[MarkerTestRow]:
        """Per-marker rows followed by the CombinedMarkerScore row."""
        return list(self.per_marker) + [MarkerTestRow(COMBINED_SCORE_NAME, self.combined, self.verdict)]


def _as_values(values: Iterable[float], label: str) -> np.ndarray:
    array = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64).ravel()
    if array.size == 0:
        raise DomainError(f"{label} must not be empty")
    if not np.isfinite(array).all():
        raise ValidationError(f"{label} contains non-finite values")
    return array


def _moments(values: np.ndarray) -> Tuple[float, float]:
    # Constant samples are exact; summation would leave ulp-sized means and variances.
    if (values == values[0]).all():
        return float(values[0]), 0.0
    return float(values.mean()), float(values.var(ddof=1))


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom, via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def welch_test(values_a: Sequence[float], values_b: Sequence[float]) -> WelchResult:
    """
    Two-sample t-test with unequal variances (Welch-Satterthwaite df).

    Args:
        values_a: First sample (n >= 1)
        values_b: Second sample (n >= 1)

    Returns:
        WelchResult; a sample of size 1 has variance 0

    Raises:
        DomainError: an empty sample
        ValidationError: a non-finite value
    """
    a = _as_values(values_a, "values_a")
    b = _as_values(values_b, "values_b")
    n_a, n_b = a.size, b.size
    mean_a, var_a = _moments(a)
    mean_b, var_b = _moments(b)

    se_a = var_a / n_a
    se_b = var_b / n_b
    se2 = se_a + se_b

    if se2 == 0.0:
        if mean_a == mean_b:
            return WelchResult(mean_a, mean_b, var_a, var_b, n_a, n_b, None, None, None)
        t = math.inf if mean_a > mean_b else -math.inf
        return WelchResult(mean_a, mean_b, var_a, var_b, n_a, n_b, t, None, 0.0)

    t = (mean_a - mean_b) / math.sqrt(se2)
    # Shares of se2 keep the Welch-Satterthwaite ratio clear of underflow.
    share_a, share_b = se_a / se2, se_b / se2
    denominator = 0.0
    if n_a > 1:
        denominator += share_a * share_a / (n_a - 1)
    if n_b > 1:
        denominator += share_b * share_b / (n_b - 1)
    df = 1.0 / denominator
    return WelchResult(mean_a, mean_b, var_a, var_b, n_a, n_b, t, df, t_two_sided_p(t, df))


def verdict(kind: RegionKind, result: WelchResult, level: float = DEFAULT_LEVEL) -> Outcome:
    """
    Map a Welch result onto Success / Failure / Undetermined.

    TopK succeeds when the test model's region scores higher (mean_b > mean_a),
    BottomK when it scores lower (mean_b < mean_a), Movers when up-movers score
    higher than down-movers (mean_a > mean_b). Not significant or undefined p
    gives U.
    """
    if result.p is None or result.p > level or result.mean_a == result.mean_b:
        return Outcome.UNDETERMINED

    if kind is RegionKind.TOP_K:
        better = result.mean_b > result.mean_a
    elif kind is RegionKind.BOTTOM_K:
        better = result.mean_b < result.mean_a
    else:
        better = result.mean_a > result.mean_b
    return Outcome.SUCCESS if better else Outcome.FAILURE


def _check_universe(scores: ScoreTable, markers: MarkerMatrix) -> None:
    if tuple(scores.sample_ids) == tuple(markers.sample_ids):
        return
    missing = sorted(set(scores.sample_ids) ^ set(markers.sample_ids))
    witness = missing[0] if missing else None
    raise ValidationError(
        "score and marker sample universes differ"
        + (f" (e.g. {witness!r})" if witness is not None else " in order")
        + "; reconcile them first"
    )


def _check_ks(ks: Sequence[int], kinds: Sequence[RegionKind], n: int) -> List[int]:
    if not ks:
        raise DomainError("at least one k is required")
    checked = []
    for k in ks:
        if isinstance(k, bool) or int(k) != k or int(k) < 1:
            raise DomainError(f"k must be a positive integer, got {k!r}")
        k = int(k)
        limit = n // 2 if RegionKind.MOVERS in kinds else n
        if k > limit:
            raise DomainError(f"k={k} is too large for N={n} (limit {limit})")
        checked.append(k)
    return sorted(set(checked))


def run_comparison(scores: ScoreTable,
                   markers: MarkerMatrix,
                   ks: Sequence[int],
                   kinds: Iterable[RegionKind] = tuple(RegionKind),
                   level: float = DEFAULT_LEVEL,
                   aggregation: str = "majority") -> List[TestResult]:
    """
    Run the region tests for every (kind, k).

    Args:
        scores: Reference and test model scores
        markers: Marker verdicts over exactly the same samples (see cli.reconcile_samples)
        ks: Region sizes
        kinds: Region kinds to run
        level: Significance level
        aggregation: CMS aggregation passed to MarkerMatrix.combined_scores

    Returns:
        TestResults ordered by kind (TopK, BottomK, Movers) then ascending k
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    selected = [kind for kind in RegionKind if kind in set(kinds)]
    if not selected:
        raise DomainError("at least one test kind is required")
    _check_universe(scores, markers)
    ks = _check_ks(ks, selected, len(scores))

    ranks_ref, ranks_test = rank_table(scores)
    cms = markers.combined_scores(aggregation)
    columns = [(name, markers.marker_column(name)) for name in markers.marker_names]

    results = []
    for kind in selected:
        for k in ks:
            idx_a, idx_b = region_indices(kind, ranks_ref, ranks_test, k)
            combined = welch_test(cms[idx_a], cms[idx_b])
            per_marker = []
            for name, column in columns:
                marker_result = welch_test(column[idx_a], column[idx_b])
                per_marker.append(MarkerTestRow(name, marker_result, verdict(kind, marker_result, level)))
            result = TestResult(kind, k, combined, verdict(kind, combined, level), per_marker, level)
            logger.debug("%s k=%d: Z_a=%.6g Z_b=%.6g p=%s -> %s",
                         kind.label, k, combined.mean_a, combined.mean_b, combined.p, result.verdict.value)
            results.append(result)
    return results
