"""
Rank transformation of model scores and the three regions of interest.

Scores of different models are not comparable, their ranks are. Ranks run
from 1 (lowest score, most benign) to N (highest score, most malicious);
ties are broken by ascending sample id so every rank vector is a
permutation of 1..N and independent of input row order.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import DomainError, FormatError, UnknownIdError, ValidationError
from .utils import LINE_COLUMN, TableSource, read_table, source_name

logger = logging.getLogger(__name__)

SCORE_FILE_COLUMNS = ("sample_id", "score_ref", "score_test")


class RegionKind(Enum):
    """The three regions of interest, in report order."""

    TOP_K = "top"
    BOTTOM_K = "bottom"
    MOVERS = "movers"

    @property
    def label(self) -> str:
        return {"top": "TopK", "bottom": "BottomK", "movers": "Movers"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "RegionKind":
        key = str(text).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.label.lower()):
                return kind
        raise DomainError(f"unknown test kind {text!r}; expected one of top, bottom, movers")


def _canonical_order(sample_ids: Sequence[str]) -> np.ndarray:
    ids = np.asarray(sample_ids, dtype=str)
    return np.argsort(ids, kind="stable")


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """
    Reference and test model scores for one sample universe.

    Rows are kept in ascending sample id order.
    """

    sample_ids: Tuple[str, ...]
    score_ref: np.ndarray
    score_test: np.ndarray

    def __post_init__(self):
        ids = tuple(str(s) for s in self.sample_ids)
        ref = np.asarray(self.score_ref, dtype=np.float64)
        test = np.asarray(self.score_test, dtype=np.float64)
        if not (len(ids) == len(ref) == len(test)):
            raise ValidationError("sample_ids, score_ref and score_test must have the same length")
        if len(set(ids)) != len(ids):
            raise FormatError(f"duplicate sample id: {_first_duplicate(ids)!r}")
        for column, values in (("score_ref", ref), ("score_test", test)):
            bad = ~np.isfinite(values)
            if bad.any():
                raise ValidationError(f"non-finite {column} for sample {ids[int(np.argmax(bad))]!r}")

        order = _canonical_order(ids)
        ref = ref[order]
        test = test[order]
        ref.flags.writeable = False
        test.flags.writeable = False
        object.__setattr__(self, "sample_ids", tuple(ids[i] for i in order))
        object.__setattr__(self, "score_ref", ref)
        object.__setattr__(self, "score_test", test)

    def __len__(self) -> int:
        return len(self.sample_ids)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "ScoreTable":
        """Build from a DataFrame with sample_id, score_ref and score_test columns."""
        return cls(tuple(df["sample_id"].astype(str)),
                   df["score_ref"].to_numpy(dtype=np.float64),
                   df["score_test"].to_numpy(dtype=np.float64))

    def swapped(self) -> "ScoreTable":
        """Same table with the reference and test models exchanged."""
        return ScoreTable(self.sample_ids, self.score_test, self.score_ref)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"sample_id": list(self.sample_ids),
                             "score_ref": self.score_ref,
                             "score_test": self.score_test})


def _first_duplicate(ids: Sequence[str]) -> Optional[str]:
    seen = set()
    for sid in ids:
        if sid in seen:
            return sid
        seen.add(sid)
    return None


@dataclass(frozen=True, eq=False)
class RankVector:
    """Ordinal ranks 1..N aligned with ascending ``sample_ids``."""

    sample_ids: Tuple[str, ...]
    ranks: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankVector):
            return NotImplemented
        return self.sample_ids == other.sample_ids and np.array_equal(self.ranks, other.ranks)

    def __len__(self) -> int:
        return len(self.sample_ids)

    def rank_of(self, sample: str) -> int:
        try:
            return int(self.ranks[self.sample_ids.index(sample)])
        except ValueError:
            raise UnknownIdError("sample id", sample)

    def as_dict(self) -> dict:
        return dict(zip(self.sample_ids, (int(r) for r in self.ranks)))


@dataclass(frozen=True)
class RegionPair:
    """
    Two sample sets compared by one test.

    For TopK/BottomK ``set_a`` is the reference model's region and ``set_b``
    the test model's; for Movers they are the up-movers and down-movers.
    """

    kind: RegionKind
    k: int
    set_a: FrozenSet[str]
    set_b: FrozenSet[str]


def _ordinal_ranks(values: np.ndarray) -> np.ndarray:
    # Callers pass values aligned with ascending ids, so a stable sort breaks ties by id.
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def rank_scores(scores: Iterable[Tuple[str, float]]) -> RankVector:
    """
    Rank (sample_id, score) pairs.

    Args:
        scores: Iterable of (sample_id, score) pairs, N >= 1

    Returns:
        RankVector with rank N for the highest score; ties broken by ascending sample id

    Raises:
        FormatError: duplicate sample id
        ValidationError: non-finite score
    """
    pairs = [(str(sid), float(score)) for sid, score in scores]
    if not pairs:
        raise DomainError("cannot rank an empty score list")
    ids = [sid for sid, _ in pairs]
    if len(set(ids)) != len(ids):
        raise FormatError(f"duplicate sample id: {_first_duplicate(ids)!r}")
    for sid, score in pairs:
        if not math.isfinite(score):
            raise ValidationError(f"non-finite score for sample {sid!r}")

    order = _canonical_order(ids)
    values = np.fromiter((pairs[i][1] for i in order), dtype=np.float64, count=len(pairs))
    return RankVector(tuple(ids[i] for i in order), _ordinal_ranks(values))


def rank_table(scores: ScoreTable) -> Tuple[RankVector, RankVector]:
    """Rank vectors of the reference and test models of a ScoreTable."""
    if len(scores) == 0:
        raise DomainError("cannot rank an empty score table")
    return (RankVector(scores.sample_ids, _ordinal_ranks(scores.score_ref)),
            RankVector(scores.sample_ids, _ordinal_ranks(scores.score_test)))


def _check_k(k: int, limit: int, what: str) -> int:
    if isinstance(k, bool) or int(k) != k:
        raise DomainError(f"k must be an integer, got {k!r}")
    k = int(k)
    if k <= 0 or k > limit:
        raise DomainError(f"k={k} is out of range for {what} (1 <= k <= {limit})")
    return k


def top_k_indices(ranks: RankVector, k: int) -> np.ndarray:
    """Positions (in ``ranks.sample_ids``) of the k highest-ranked samples."""
    k = _check_k(k, len(ranks), "TopK")
    return np.flatnonzero(ranks.ranks > len(ranks) - k)


def bottom_k_indices(ranks: RankVector, k: int) -> np.ndarray:
    """Positions (in ``ranks.sample_ids``) of the k lowest-ranked samples."""
    k = _check_k(k, len(ranks), "BottomK")
    return np.flatnonzero(ranks.ranks <= k)


def top_k(ranks: RankVector, k: int) -> FrozenSet[str]:
    """The k samples with the largest ranks (highest scores)."""
    return frozenset(ranks.sample_ids[i] for i in top_k_indices(ranks, k))


def bottom_k(ranks: RankVector, k: int) -> FrozenSet[str]:
    """The k samples with the smallest ranks (lowest scores)."""
    return frozenset(ranks.sample_ids[i] for i in bottom_k_indices(ranks, k))


def _check_same_samples(ranks_ref: RankVector, ranks_test: RankVector) -> None:
    if ranks_ref.sample_ids == ranks_test.sample_ids:
        return
    witness = sorted(set(ranks_ref.sample_ids) ^ set(ranks_test.sample_ids))
    raise ValidationError(
        f"rank vectors cover different samples (e.g. {witness[0]!r})" if witness
        else "rank vectors cover different samples"
    )


def movers_indices(ranks_ref: RankVector, ranks_test: RankVector, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positions of the up-movers and down-movers.

    Samples are totally ordered by (rank_test - rank_ref, sample id); the
    down-movers are the first k of that order and the up-movers the last k.
    """
    _check_same_samples(ranks_ref, ranks_test)
    k = _check_k(k, len(ranks_ref) // 2, "Movers")
    delta = ranks_test.ranks - ranks_ref.ranks
    # Positions already follow ascending sample id, a stable sort keeps that for equal deltas.
    order = np.argsort(delta, kind="stable")
    return np.sort(order[-k:]), np.sort(order[:k])


def movers(ranks_ref: RankVector, ranks_test: RankVector, k: int) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    """
    The k largest rank increases (up) and decreases (down) from R to T.

    Raises:
        ValidationError: the rank vectors cover different samples
        DomainError: k > N // 2
    """
    up, down = movers_indices(ranks_ref, ranks_test, k)
    ids = ranks_ref.sample_ids
    return frozenset(ids[i] for i in up), frozenset(ids[i] for i in down)


def region_indices(kind: RegionKind, ranks_ref: RankVector, ranks_test: RankVector,
                   k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Positions of set_a and set_b for one region kind."""
    if kind is RegionKind.TOP_K:
        _check_same_samples(ranks_ref, ranks_test)
        return top_k_indices(ranks_ref, k), top_k_indices(ranks_test, k)
    if kind is RegionKind.BOTTOM_K:
        _check_same_samples(ranks_ref, ranks_test)
        return bottom_k_indices(ranks_ref, k), bottom_k_indices(ranks_test, k)
    return movers_indices(ranks_ref, ranks_test, k)


def build_region_pair(kind: RegionKind, ranks_ref: RankVector, ranks_test: RankVector, k: int) -> RegionPair:
    """Select the two sample sets of one region of interest."""
    idx_a, idx_b = region_indices(kind, ranks_ref, ranks_test, k)
    ids = ranks_ref.sample_ids
    return RegionPair(kind, int(k),
                      frozenset(ids[i] for i in idx_a),
                      frozenset(ids[i] for i in idx_b))


def _parse_scores(values: pd.Series, lines: pd.Series, ids: pd.Series, column: str, display: str) -> np.ndarray:
    parsed = pd.to_numeric(values, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.isnan(parsed)
    if bad.any():
        i = int(np.argmax(bad))
        raw = str(values.iloc[i]).strip()
        if raw.lower() == "nan":
            raise ValidationError(f"non-finite {column} for sample {ids.iloc[i]!r}")
        raise FormatError(f"{column} is not a number: {raw!r}", source=display, line=int(lines.iloc[i]))
    return parsed


def load_score_file(source: TableSource, name: Optional[str] = None) -> ScoreTable:
    """
    Load a score file (CSV or JSONL with sample_id, score_ref, score_test).

    Raises:
        FormatError: malformed rows or duplicate sample ids (with line numbers)
        ValidationError: non-finite scores
    """
    display = source_name(source, name)
    df = read_table(source, SCORE_FILE_COLUMNS, name=display)
    if df.empty:
        raise DomainError(f"{display}: score file has no rows")

    ids = df["sample_id"].astype(str).str.strip()
    duplicated = ids.duplicated()
    if duplicated.any():
        i = int(np.argmax(duplicated.to_numpy()))
        raise FormatError(f"duplicate sample id {ids.iloc[i]!r}", source=display, line=int(df[LINE_COLUMN].iloc[i]))
    empty = ids == ""
    if empty.any():
        i = int(np.argmax(empty.to_numpy()))
        raise FormatError("sample_id must not be empty", source=display, line=int(df[LINE_COLUMN].iloc[i]))

    ref = _parse_scores(df["score_ref"], df[LINE_COLUMN], ids, "score_ref", display)
    test = _parse_scores(df["score_test"], df[LINE_COLUMN], ids, "score_test", display)
    return ScoreTable(tuple(ids), ref, test)
