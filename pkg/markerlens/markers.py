"""
Marker verdict algebra.

A marker is a weak signal m_j(s) in {-1, 0, +1}: -1 votes benign, +1 votes
malicious and 0 abstains. A MarkerMatrix stores the verdicts of M named
markers over N samples sparsely (absent entries are abstains) and combines
them per sample by majority vote into the combined marker score (CMS).
"""

import logging
from enum import IntEnum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .exceptions import DomainError, FormatError, UnknownIdError
from .utils import LINE_COLUMN, TableSource, read_table, source_name

logger = logging.getLogger(__name__)

COMBINED_SCORE_NAME = "CombinedMarkerScore"
AGGREGATIONS = ("majority", "sum")
MARKER_FILE_COLUMNS = ("sample_id", "marker", "verdict")


class Verdict(IntEnum):
    """A single marker vote."""

    BENIGN = -1
    ABSTAIN = 0
    MALICIOUS = 1


def _check_unique(values: Sequence[str], what: str) -> None:
    seen = set()
    for value in values:
        if value in seen:
            raise DomainError(f"duplicate {what}: {value!r}")
        seen.add(value)


class MarkerMatrix:
    """
    Immutable sparse matrix of marker verdicts.

    Rows follow ``sample_ids`` and columns follow ``marker_names``. Entries
    that were never set are abstains, exactly like an explicit 0.
    """

    def __init__(self,
                 sample_ids: Iterable[str],
                 marker_names: Iterable[str],
                 verdicts: Optional[Mapping[Tuple[str, str], int]] = None):
        """
        Build a matrix from a (sample, marker) -> verdict mapping.

        Args:
            sample_ids: Unique sample identifiers
            marker_names: Unique marker names
            verdicts: Mapping of (sample_id, marker_name) to -1, 0 or +1
        """
        self._sample_ids = tuple(str(s) for s in sample_ids)
        self._marker_names = tuple(str(m) for m in marker_names)
        _check_unique(self._sample_ids, "sample id")
        _check_unique(self._marker_names, "marker name")

        self._sample_index = {sid: i for i, sid in enumerate(self._sample_ids)}
        self._marker_index = {name: j for j, name in enumerate(self._marker_names)}

        rows: List[int] = []
        cols: List[int] = []
        vals: List[int] = []
        for (sample, marker), value in (verdicts or {}).items():
            verdict = _as_verdict(value)
            i = self._row(str(sample))
            j = self._column(str(marker))
            if verdict != Verdict.ABSTAIN:
                rows.append(i)
                cols.append(j)
                vals.append(int(verdict))

        self._set_data(sparse.csr_matrix(
            (np.asarray(vals, dtype=np.int8), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(len(self._sample_ids), len(self._marker_names)),
            dtype=np.int8,
        ))

    def _set_data(self, data: sparse.csr_matrix) -> None:
        self._data = data
        sums = np.asarray(data.sum(axis=1, dtype=np.int64)).ravel()
        signs = np.sign(sums)
        sums.flags.writeable = False
        signs.flags.writeable = False
        self._combined: Dict[str, np.ndarray] = {"majority": signs, "sum": sums}

    @classmethod
    def _from_csr(cls, sample_ids: Sequence[str], marker_names: Sequence[str],
                  data: sparse.csr_matrix) -> "MarkerMatrix":
        matrix = cls(sample_ids, marker_names)
        data = sparse.csr_matrix(data, dtype=np.int8)
        data.eliminate_zeros()
        matrix._set_data(data)
        return matrix

    @classmethod
    def from_dense(cls, sample_ids: Sequence[str], marker_names: Sequence[str], array) -> "MarkerMatrix":
        """
        Build a matrix from a dense (N x M) array of verdicts.

        Args:
            sample_ids: N unique sample identifiers
            marker_names: M unique marker names
            array: Array-like of shape (N, M) with values in {-1, 0, 1}

        Returns:
            MarkerMatrix
        """
        dense = np.asarray(array)
        if dense.ndim == 1:
            dense = dense.reshape(-1, 1)
        expected = (len(sample_ids), len(marker_names))
        if dense.shape != expected:
            raise DomainError(f"verdict array has shape {dense.shape}, expected {expected}")
        if dense.size and not np.isin(dense, (-1, 0, 1)).all():
            raise DomainError("verdicts must be -1, 0 or +1")
        return cls._from_csr(sample_ids, marker_names, sparse.csr_matrix(dense.astype(np.int8)))

    @classmethod
    def from_records(cls,
                     records: Iterable[Tuple[str, str, int]],
                     sample_ids: Optional[Sequence[str]] = None,
                     marker_names: Optional[Sequence[str]] = None) -> "MarkerMatrix":
        """
        Build a matrix from (sample_id, marker, verdict) rows.

        Sample ids and marker names default to the sorted distinct values seen
        in the records, so the result does not depend on row order.

        Raises:
            FormatError: duplicate (sample, marker) pair or a verdict outside {-1, 0, 1}
        """
        verdicts: Dict[Tuple[str, str], int] = {}
        for sample, marker, value in records:
            key = (str(sample), str(marker))
            if key in verdicts:
                raise FormatError(f"duplicate verdict for sample {key[0]!r} and marker {key[1]!r}")
            try:
                verdicts[key] = int(_as_verdict(value))
            except DomainError as e:
                raise FormatError(str(e))

        if sample_ids is None:
            sample_ids = sorted({sample for sample, _ in verdicts})
        if marker_names is None:
            marker_names = sorted({marker for _, marker in verdicts})
        return cls(sample_ids, marker_names, verdicts)

    @property
    def sample_ids(self) -> Tuple[str, ...]:
        return self._sample_ids

    @property
    def marker_names(self) -> Tuple[str, ...]:
        return self._marker_names

    @property
    def shape(self) -> Tuple[int, int]:
        return self._data.shape

    @property
    def coverage(self) -> float:
        """Fraction of samples on which at least one marker votes."""
        if not self._sample_ids:
            return 0.0
        return float(np.count_nonzero(self._data.getnnz(axis=1)) / len(self._sample_ids))

    def __contains__(self, sample: str) -> bool:
        return sample in self._sample_index

    def __repr__(self) -> str:
        n, m = self.shape
        return f"MarkerMatrix(samples={n}, markers={m}, votes={self._data.nnz})"

    def _row(self, sample: str) -> int:
        try:
            return self._sample_index[sample]
        except KeyError:
            raise UnknownIdError("sample id", sample)

    def _column(self, marker: str) -> int:
        try:
            return self._marker_index[marker]
        except KeyError:
            raise UnknownIdError("marker", marker)

    def indices_of(self, samples: Iterable[str]) -> np.ndarray:
        """Row indices of the given sample ids, in the given order."""
        return np.fromiter((self._row(str(s)) for s in samples), dtype=np.int64)

    def verdict(self, sample: str, marker: str) -> Verdict:
        return Verdict(int(self._data[self._row(sample), self._column(marker)]))

    def row(self, sample: str) -> np.ndarray:
        """All verdicts of one sample, in marker order."""
        return self._data[self._row(sample)].toarray().ravel().astype(np.int64)

    def marker_column(self, marker: str) -> np.ndarray:
        """All verdicts of one marker, in sample order."""
        return self._data[:, self._column(marker)].toarray().ravel().astype(np.int64)

    def combined_scores(self, aggregation: str = "majority") -> np.ndarray:
        """
        Combined marker score of every sample, in sample order.

        Args:
            aggregation: 'majority' (sign of the verdict sum, ties abstain) or
                'sum' (the raw verdict sum)

        Returns:
            Integer array of length N
        """
        if aggregation not in AGGREGATIONS:
            raise DomainError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
        return self._combined[aggregation]

    def negated(self) -> "MarkerMatrix":
        """Matrix with every verdict flipped."""
        return MarkerMatrix._from_csr(self._sample_ids, self._marker_names, -self._data)

    def join(self, other: "MarkerMatrix") -> "MarkerMatrix":
        """Append the markers of ``other``; both matrices must cover the same samples in the same order."""
        if other.sample_ids != self._sample_ids:
            raise DomainError("cannot join marker matrices over different samples")
        names = self._marker_names + other.marker_names
        return MarkerMatrix._from_csr(self._sample_ids, names, sparse.hstack([self._data, other._data], format="csr"))

    def reindex(self, sample_ids: Sequence[str]) -> Tuple["MarkerMatrix", List[str]]:
        """
        Re-express the matrix over another sample universe.

        Samples unknown to this matrix get all-abstain rows; samples of this
        matrix that are not in ``sample_ids`` are dropped.

        Returns:
            (new matrix, sorted list of dropped sample ids)
        """
        target = [str(s) for s in sample_ids]
        position = {sid: i for i, sid in enumerate(target)}
        mapping = np.fromiter((position.get(sid, -1) for sid in self._sample_ids),
                              dtype=np.int64, count=len(self._sample_ids))
        dropped = sorted(sid for sid, new in zip(self._sample_ids, mapping) if new < 0)

        coo = self._data.tocoo()
        new_rows = mapping[coo.row] if coo.nnz else np.zeros(0, dtype=np.int64)
        keep = new_rows >= 0
        data = sparse.csr_matrix(
            (coo.data[keep], (new_rows[keep], coo.col[keep])),
            shape=(len(target), len(self._marker_names)),
            dtype=np.int8,
        )
        return MarkerMatrix._from_csr(target, self._marker_names, data), dropped


def _as_verdict(value) -> Verdict:
    try:
        number = int(value)
        if number != value and not isinstance(value, str):
            raise ValueError
        return Verdict(number)
    except (TypeError, ValueError):
        raise DomainError(f"verdict must be -1, 0 or +1, got {value!r}")


def _unique_ids(samples: Iterable[str]) -> List[str]:
    ids = sorted({str(s) for s in samples})
    if not ids:
        raise DomainError("sample set must not be empty")
    return ids


def combined_score(matrix: MarkerMatrix, sample: str) -> Verdict:
    """
    Majority vote of one sample's markers.

    Returns +1 when malicious votes outnumber benign votes, -1 when they are
    outnumbered and 0 on a tie (including when every marker abstains).
    """
    return Verdict(int(np.sign(matrix.row(sample).sum())))


def average_marker_score(matrix: MarkerMatrix, samples: Iterable[str], aggregation: str = "majority") -> float:
    """
    Mean combined marker score Z over a set of samples.

    Abstaining samples contribute 0 and are counted in the denominator.
    """
    idx = matrix.indices_of(_unique_ids(samples))
    return float(matrix.combined_scores(aggregation)[idx].mean())


def per_marker_average(matrix: MarkerMatrix, samples: Iterable[str], marker: str) -> float:
    """Mean of a single marker's raw verdicts over a set of samples."""
    column = matrix.marker_column(marker)
    idx = matrix.indices_of(_unique_ids(samples))
    return float(column[idx].mean())


def _parse_verdict(value, display: str, line: int) -> int:
    text = str(value).strip()
    try:
        number = int(text)
    except ValueError:
        raise FormatError(f"verdict must be an integer, got {text!r}", source=display, line=line)
    if number not in (-1, 0, 1):
        raise FormatError(f"verdict must be -1, 0 or 1, got {number}", source=display, line=line)
    return number


def load_marker_file(source: TableSource, name: Optional[str] = None) -> MarkerMatrix:
    """
    Load a marker file (CSV or JSONL with sample_id, marker, verdict).

    Args:
        source: File path or readable buffer
        name: Display name for buffers (also selects CSV vs JSONL)

    Returns:
        MarkerMatrix over the samples and markers named in the file, both sorted

    Raises:
        FormatError: malformed rows, bad verdicts or duplicate (sample, marker) pairs
    """
    display = source_name(source, name)
    df = read_table(source, MARKER_FILE_COLUMNS, name=display)

    verdicts: Dict[Tuple[str, str], int] = {}
    for sample, marker, value, line in zip(df["sample_id"], df["marker"], df["verdict"], df[LINE_COLUMN]):
        line = int(line)
        sample = str(sample).strip()
        marker = str(marker).strip()
        if not sample or not marker:
            raise FormatError("sample_id and marker must not be empty", source=display, line=line)
        key = (sample, marker)
        if key in verdicts:
            raise FormatError(f"duplicate verdict for sample {sample!r} and marker {marker!r}",
                              source=display, line=line)
        verdicts[key] = _parse_verdict(value, display, line)

    matrix = MarkerMatrix(
        sorted({sample for sample, _ in verdicts}),
        sorted({marker for _, marker in verdicts}),
        verdicts,
    )
    logger.info("Marker matrix from %s: %r", display, matrix)
    return matrix
