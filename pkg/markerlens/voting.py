"""
Majority-voting analysis for combined markers.

Accuracy of a majority vote over k independent markers of equal accuracy
(the Condorcet jury setting), its Poisson-binomial generalization to
heterogeneous accuracies, combined coverage, and the curve tables used to
compare marker sets.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VoteOutcome:
    """Probabilities that the majority vote is correct, tied or wrong."""

    p_correct: float
    p_tie: float
    p_wrong: float

    @property
    def total(self) -> float:
        return self.p_correct + self.p_tie + self.p_wrong


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_probabilities(values: Iterable[float], name: str) -> np.ndarray:
    array = np.asarray([_check_probability(v, name) for v in values], dtype=np.float64)
    if array.size == 0:
        raise DomainError(f"{name} must not be empty")
    return array


def _check_k(k: int) -> int:
    if isinstance(k, bool) or int(k) != k or int(k) < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    return int(k)


def majority_accuracy(k: int, alpha: float) -> VoteOutcome:
    """
    Outcome of a majority vote over k independent markers of accuracy alpha.

    The vote is correct when more than k/2 markers are correct and tied when
    exactly k/2 are (even k only).

    Args:
        k: Number of voting markers (>= 1)
        alpha: Accuracy of each marker

    Returns:
        VoteOutcome
    """
    k = _check_k(k)
    alpha = _check_probability(alpha, "alpha")
    binom = stats.binom(k, alpha)
    p_correct = float(binom.sf(k // 2))
    p_tie = float(binom.pmf(k // 2)) if k % 2 == 0 else 0.0
    p_wrong = float(binom.cdf((k - 1) // 2))
    return VoteOutcome(p_correct, p_tie, p_wrong)


def poisson_binomial_pmf(probabilities: Sequence[float]) -> np.ndarray:
    """
    Probability mass function of the number of successes among independent
    Bernoulli trials with the given success probabilities.

    Computed as the coefficients of prod_j (1 - p_j + p_j x), one trial at a time.
    """
    probs = _check_probabilities(probabilities, "probabilities")
    pmf = np.array([1.0])
    for p in probs:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def majority_accuracy_hetero(alphas: Sequence[float]) -> VoteOutcome:
    """Majority-vote outcome for independent markers with individual accuracies."""
    pmf = poisson_binomial_pmf(alphas)
    k = len(pmf) - 1
    p_correct = float(pmf[k // 2 + 1:].sum())
    p_tie = float(pmf[k // 2]) if k % 2 == 0 else 0.0
    p_wrong = float(pmf[:(k - 1) // 2 + 1].sum())
    return VoteOutcome(p_correct, p_tie, p_wrong)


def combined_coverage(betas: Sequence[float]) -> float:
    """Probability that at least one of several independent markers votes: 1 - prod(1 - beta_j)."""
    array = _check_probabilities(betas, "betas")
    return float(1.0 - np.prod(1.0 - array))


def accuracy_curves(k_values: Sequence[int], alpha_values: Sequence[float]) -> pd.DataFrame:
    """
    Tabulate majority_accuracy over a k x alpha grid.

    Returns:
        DataFrame with columns k, alpha, p_correct, p_tie, p_wrong
    """
    if not len(k_values) or not len(alpha_values):
        raise DomainError("k_values and alpha_values must not be empty")
    rows = []
    for k in k_values:
        for alpha in alpha_values:
            outcome = majority_accuracy(k, alpha)
            rows.append({"k": int(k), "alpha": float(alpha), "p_correct": outcome.p_correct,
                         "p_tie": outcome.p_tie, "p_wrong": outcome.p_wrong})
    return pd.DataFrame(rows, columns=["k", "alpha", "p_correct", "p_tie", "p_wrong"])


def marginal_marker_impact(base_alphas: Sequence[float], new_alpha_values: Sequence[float]) -> pd.DataFrame:
    """
    Effect of adding one marker of accuracy alpha' to an existing marker set.

    Returns:
        DataFrame with columns alpha_new, p_correct_with, p_correct_without
    """
    base = list(_check_probabilities(base_alphas, "base_alphas"))
    if not len(new_alpha_values):
        raise DomainError("new_alpha_values must not be empty")
    without = majority_accuracy_hetero(base).p_correct
    rows = []
    for alpha in new_alpha_values:
        alpha = _check_probability(alpha, "new_alpha_values")
        rows.append({"alpha_new": alpha,
                     "p_correct_with": majority_accuracy_hetero(base + [alpha]).p_correct,
                     "p_correct_without": without})
    return pd.DataFrame(rows, columns=["alpha_new", "p_correct_with", "p_correct_without"])


def monte_carlo_accuracy(k: int, alpha: float, trials: int = 1_000_000, seed: Optional[int] = 0) -> VoteOutcome:
    """
    Estimate majority_accuracy by simulating votes.

    Args:
        k: Number of voting markers
        alpha: Accuracy of each marker
        trials: Number of simulated samples
        seed: Seed for numpy's default generator

    Returns:
        VoteOutcome of empirical frequencies
    """
    k = _check_k(k)
    alpha = _check_probability(alpha, "alpha")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    correct_votes = rng.binomial(k, alpha, size=trials)
    doubled = 2 * correct_votes
    return VoteOutcome(float(np.mean(doubled > k)), float(np.mean(doubled == k)), float(np.mean(doubled < k)))
