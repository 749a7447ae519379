"""
Simulation lab: synthetic labels, markers and model scores with known
accuracies and performances, single-run region tests and (alpha, beta) sweeps.

Generative chain per sample:
  y_true   = +1 w.p. pi, else -1
  marker   = a * y_true if b else 0,        b ~ Bern(beta),      a = +1 w.p. alpha else -1
  y_train  = a' * y_true if b' else 0,      b' ~ Bern(beta_bar), a' = +1 w.p. alpha_bar else -1
  score    = f if c else 1 - f (per model, independent draws)
             f ~ U(0.51, 1) when the reference label is +1, U(0, 0.49) otherwise,
             the reference label being y_train when labeled, y_true when not;
             c ~ Bern(P_train) when labeled, Bern(P_true) when not.

Samples are drawn in fixed blocks of BLOCK_SIZE from SeedSequence([seed, block]),
so sample i depends only on (seed, i).
"""

import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .exceptions import DomainError
from .hypothesis import DEFAULT_LEVEL, Outcome, TestResult, run_comparison
from .markers import MarkerMatrix
from .regions import RegionKind, ScoreTable

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
_DRAWS_PER_SAMPLE = 9
_UINT64_MASK = (1 << 64) - 1

# Score half-intervals; the gap around 0.5 keeps every score decidable.
NEGATIVE_HIGH = 0.49
POSITIVE_LOW = 0.51

SWEEP_COLUMNS = ["alpha", "beta", "test", "s_count", "f_count", "u_count"]


@dataclass(frozen=True)
class SimulationParams:
    """Parameters of the generative process (defaults follow the reference setup)."""

    pi: float = 0.5
    alpha: float = 0.9
    beta: float = 0.8
    alpha_bar: float = 0.95
    beta_bar: float = 0.10
    p_true_ref: float = 0.90
    p_true_test: float = 0.95
    p_train_ref: float = 0.98
    p_train_test: float = 0.97
    n: int = 1_000_000
    k: int = 10_000
    seed: int = 0

    PROBABILITY_FIELDS = ("alpha", "beta", "alpha_bar", "beta_bar",
                          "p_true_ref", "p_true_test", "p_train_ref", "p_train_test")

    def validate(self) -> "SimulationParams":
        """
        Check every field against its range.

        Returns:
            self, for chaining

        Raises:
            DomainError: naming the first offending field
        """
        if not 0.0 < self.pi <= 1.0:
            raise DomainError(f"pi must lie in (0, 1], got {self.pi}")
        for name in self.PROBABILITY_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be an integer >= 1, got {self.n}")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k}")
        if self.k > self.n // 2:
            raise DomainError(f"k={self.k} exceeds n // 2 = {self.n // 2}")
        if int(self.seed) != self.seed or not -(1 << 63) <= self.seed <= _UINT64_MASK:
            raise DomainError(f"seed must be a 64-bit integer, got {self.seed}")
        return self

    def replace(self, **changes) -> "SimulationParams":
        return dataclasses.replace(self, **changes)


def _seed_entropy(seed: int) -> int:
    return int(seed) & _UINT64_MASK


def _block_uniforms(seed: int, n: int, width: int, stream: int = 0) -> np.ndarray:
    """Uniforms of shape (n, width); row i depends only on (seed, stream, i)."""
    out = np.empty((n, width), dtype=np.float64)
    spawn_key = (stream,) if stream else ()
    for block, start in enumerate(range(0, n, BLOCK_SIZE)):
        stop = min(n, start + BLOCK_SIZE)
        sequence = np.random.SeedSequence([_seed_entropy(seed), block], spawn_key=spawn_key)
        draws = np.random.default_rng(sequence).random((BLOCK_SIZE, width))
        out[start:stop] = draws[:stop - start]
    return out


def _clamp_to_halves(scores: np.ndarray) -> np.ndarray:
    low = scores < 0.5
    return np.where(
        low,
        np.clip(scores, 2.0 ** -52, np.nextafter(NEGATIVE_HIGH, 0.0)),
        np.clip(scores, np.nextafter(POSITIVE_LOW, 1.0), 1.0 - 2.0 ** -53),
    )


def _model_scores(reference_label: np.ndarray, labeled: np.ndarray, u_f: np.ndarray, u_c: np.ndarray,
                  p_train: float, p_true: float) -> np.ndarray:
    f = np.where(reference_label > 0, POSITIVE_LOW + (1.0 - POSITIVE_LOW) * u_f, NEGATIVE_HIGH * u_f)
    correct = np.where(labeled, u_c < p_train, u_c < p_true)
    return _clamp_to_halves(np.where(correct, f, 1.0 - f))


def _sample_ids(n: int) -> Tuple[str, ...]:
    width = max(7, len(str(max(n - 1, 0))))
    return tuple(f"s{i:0{width}d}" for i in range(n))


@dataclass(eq=False)
class SimulatedDataset:
    """Per-sample draws of one simulation run, as parallel arrays."""

    params: SimulationParams
    y_true: np.ndarray
    y_train: np.ndarray
    marker: np.ndarray
    score_ref: np.ndarray
    score_test: np.ndarray

    def __len__(self) -> int:
        return len(self.y_true)

    @cached_property
    def sample_ids(self) -> Tuple[str, ...]:
        return _sample_ids(len(self))

    def marker_matrix(self, name: str = "Marker") -> MarkerMatrix:
        """The simulated marker as a single-column MarkerMatrix."""
        return MarkerMatrix.from_dense(self.sample_ids, [name], self.marker)

    def score_table(self) -> ScoreTable:
        return ScoreTable(self.sample_ids, self.score_ref, self.score_test)


def generate_dataset(params: SimulationParams) -> SimulatedDataset:
    """
    Draw N samples from the generative process.

    Args:
        params: Simulation parameters (validated here)

    Returns:
        SimulatedDataset; identical params give bit-identical arrays

    Raises:
        DomainError: invalid parameter ranges
    """
    params.validate()
    u = _block_uniforms(params.seed, int(params.n), _DRAWS_PER_SAMPLE)

    y_true = np.where(u[:, 0] < params.pi, 1, -1).astype(np.int8)

    votes = u[:, 1] < params.beta
    marker = np.where(votes, np.where(u[:, 2] < params.alpha, 1, -1) * y_true, 0).astype(np.int8)

    labeled = u[:, 3] < params.beta_bar
    y_train = np.where(labeled, np.where(u[:, 4] < params.alpha_bar, 1, -1) * y_true, 0).astype(np.int8)

    reference_label = np.where(labeled, y_train, y_true)
    score_ref = _model_scores(reference_label, labeled, u[:, 5], u[:, 6], params.p_train_ref, params.p_true_ref)
    score_test = _model_scores(reference_label, labeled, u[:, 7], u[:, 8], params.p_train_test, params.p_true_test)

    return SimulatedDataset(params, y_true, y_train, marker, score_ref, score_test)


def simulate_markers(dataset: SimulatedDataset,
                     marker_specs: Sequence[Tuple[float, float]],
                     seed: Optional[int] = None,
                     names: Optional[Sequence[str]] = None) -> MarkerMatrix:
    """
    Draw additional independent markers over a dataset's ground truth.

    Args:
        dataset: Dataset providing y_true
        marker_specs: (alpha_j, beta_j) per extra marker
        seed: Seed of the extra markers (defaults to the dataset seed)
        names: Marker names (default Marker1, Marker2, ...)

    Returns:
        MarkerMatrix with one column per spec
    """
    if not marker_specs:
        raise DomainError("at least one marker spec is required")
    names = list(names) if names is not None else [f"Marker{j + 1}" for j in range(len(marker_specs))]
    if len(names) != len(marker_specs):
        raise DomainError("names and marker_specs must have the same length")
    seed = dataset.params.seed if seed is None else seed

    columns = []
    for j, (alpha, beta) in enumerate(marker_specs):
        for label, value in (("alpha", alpha), ("beta", beta)):
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"marker {names[j]}: {label} must lie in [0, 1], got {value}")
        u = _block_uniforms(seed, len(dataset), 2, stream=j + 1)
        votes = u[:, 0] < beta
        columns.append(np.where(votes, np.where(u[:, 1] < alpha, 1, -1) * dataset.y_true, 0))
    return MarkerMatrix.from_dense(dataset.sample_ids, names, np.column_stack(columns))


def run_region_tests(dataset: SimulatedDataset,
                     k: Optional[int] = None,
                     level: float = DEFAULT_LEVEL,
                     markers: Optional[MarkerMatrix] = None,
                     kinds: Iterable[RegionKind] = tuple(RegionKind)) -> List[TestResult]:
    """
    Apply the three region tests to a simulated dataset.

    Args:
        dataset: Generated dataset
        k: Region size (defaults to params.k)
        level: Significance level
        markers: Marker matrix to use (defaults to the dataset's single marker)
        kinds: Region kinds to run

    Returns:
        One TestResult per kind
    """
    if len(dataset) == 0:
        raise DomainError("dataset is empty")
    k = dataset.params.k if k is None else k
    if k > len(dataset) // 2:
        raise DomainError(f"k={k} exceeds N // 2 = {len(dataset) // 2}")
    markers = dataset.marker_matrix() if markers is None else markers
    return run_comparison(dataset.score_table(), markers, [k], kinds, level)


@dataclass
class Tally:
    """Verdict counts of one (alpha, beta, test) cell."""

    s_count: int = 0
    f_count: int = 0
    u_count: int = 0

    def add(self, outcome: Outcome) -> None:
        if outcome is Outcome.SUCCESS:
            self.s_count += 1
        elif outcome is Outcome.FAILURE:
            self.f_count += 1
        else:
            self.u_count += 1

    @property
    def total(self) -> int:
        return self.s_count + self.f_count + self.u_count

    def summary(self) -> str:
        return f"{self.s_count}/{self.f_count}/{self.u_count}"


@dataclass
class SweepGrid:
    """
    (alpha, beta) tiling with per-cell, per-test verdict tallies.

    ``cells`` maps (alpha index, beta index, RegionKind) to a Tally and is
    empty until the grid is swept.
    """

    alphas: Tuple[float, ...]
    betas: Tuple[float, ...]
    repeats: int = 1
    base: SimulationParams = field(default_factory=SimulationParams)
    level: float = DEFAULT_LEVEL
    cells: Dict[Tuple[int, int, RegionKind], Tally] = field(default_factory=dict)

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in self.alphas)
        self.betas = tuple(float(b) for b in self.betas)

    def validate(self) -> "SweepGrid":
        for name, grid in (("alphas", self.alphas), ("betas", self.betas)):
            if not grid:
                raise DomainError(f"{name} must not be empty")
            if any(not 0.0 <= v <= 1.0 for v in grid):
                raise DomainError(f"{name} must lie in [0, 1]")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise DomainError(f"{name} must be strictly ascending")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise DomainError(f"repeats must be an integer >= 1, got {self.repeats}")
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {self.level}")
        self.base.replace(alpha=self.alphas[0], beta=self.betas[0]).validate()
        return self

    def cell_params(self, alpha_index: int, beta_index: int, repeat: int) -> SimulationParams:
        """Parameters of one run, with its derived seed."""
        return self.base.replace(
            alpha=self.alphas[alpha_index],
            beta=self.betas[beta_index],
            seed=derive_seed(self.base.seed, alpha_index, beta_index, repeat),
        )


def derive_seed(base_seed: int, alpha_index: int, beta_index: int, repeat: int) -> int:
    """Seed of one sweep run, a pure function of its cell coordinates."""
    sequence = np.random.SeedSequence([_seed_entropy(base_seed), alpha_index, beta_index, repeat])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _run_task(task: Tuple[int, int, int, SimulationParams, float]) -> Tuple[int, int, List[Tuple[RegionKind, Outcome]]]:
    alpha_index, beta_index, _, params, level = task
    results = run_region_tests(generate_dataset(params), params.k, level)
    return alpha_index, beta_index, [(result.kind, result.verdict) for result in results]


def sweep(grid: SweepGrid, max_workers: Optional[int] = None, progress: bool = False) -> SweepGrid:
    """
    Run every (alpha, beta, repeat) simulation of a grid and tally the verdicts.

    Args:
        grid: Grid to sweep (its cells are ignored)
        max_workers: Worker processes; None or 1 runs in-process. Output does not depend on it.
        progress: Show a tqdm progress bar on standard error

    Returns:
        Copy of the grid with filled cells
    """
    grid.validate()
    tasks = [
        (ai, bi, r, grid.cell_params(ai, bi, r), grid.level)
        for ai in range(len(grid.alphas))
        for bi in range(len(grid.betas))
        for r in range(grid.repeats)
    ]
    cells: Dict[Tuple[int, int, RegionKind], Tally] = {
        (ai, bi, kind): Tally()
        for ai in range(len(grid.alphas))
        for bi in range(len(grid.betas))
        for kind in RegionKind
    }
    logger.info("Sweeping %d x %d grid, %d repeats (%d runs)",
                len(grid.alphas), len(grid.betas), grid.repeats, len(tasks))

    bar = tqdm(total=len(tasks), desc="sweep", unit="run", file=sys.stderr, disable=not progress)
    pending = {(ai, bi): grid.repeats for ai in range(len(grid.alphas)) for bi in range(len(grid.betas))}

    def record(ai: int, bi: int, outcomes: List[Tuple[RegionKind, Outcome]]) -> None:
        for kind, outcome in outcomes:
            cells[(ai, bi, kind)].add(outcome)
        bar.update()
        pending[(ai, bi)] -= 1
        if pending[(ai, bi)] == 0:
            counts = ", ".join(f"{kind.label} {cells[(ai, bi, kind)].summary()}" for kind in RegionKind)
            logger.info("Cell alpha=%g beta=%g done (S/F/U): %s", grid.alphas[ai], grid.betas[bi], counts)

    try:
        if max_workers is not None and max_workers > 1:
            with ProcessPoolExecutor(max_workers=max_workers) as pool:
                for ai, bi, outcomes in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * max_workers))):
                    record(ai, bi, outcomes)
        else:
            for task in tasks:
                record(*_run_task(task))
    finally:
        bar.close()

    logger.info("Sweep finished")
    return dataclasses.replace(grid, cells=cells)


def sweep_to_frame(grid: SweepGrid) -> pd.DataFrame:
    """Tallies as a table with columns alpha, beta, test, s_count, f_count, u_count."""
    rows = []
    for ai, alpha in enumerate(grid.alphas):
        for bi, beta in enumerate(grid.betas):
            for kind in RegionKind:
                tally = grid.cells.get((ai, bi, kind))
                if tally is None:
                    continue
                rows.append([alpha, beta, kind.label, tally.s_count, tally.f_count, tally.u_count])
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


# Parameter studies of the reference evaluation: each entry is a list of overrides.
PRESET_STUDIES: Dict[str, List[Dict[str, float]]] = {
    "p_true": [
        {"p_true_test": 0.95, "p_true_ref": 0.90},
        {"p_true_test": 0.95, "p_true_ref": 0.80},
        {"p_true_test": 0.95, "p_true_ref": 0.94},
        {"p_true_test": 0.75, "p_true_ref": 0.70},
    ],
    "alpha_bar": [{"alpha_bar": 0.95}, {"alpha_bar": 0.85}, {"alpha_bar": 0.70}],
    "pi": [{"pi": 0.5}, {"pi": 0.25}, {"pi": 0.05}],
    "k": [{"k": 10_000}, {"k": 1_000}, {"k": 100}],
}


def variant_label(overrides: Mapping[str, float]) -> str:
    """Stable text label of a parameter override ('p_true_ref=0.8;p_true_test=0.95')."""
    return ";".join(f"{key}={overrides[key]}" for key in sorted(overrides))


def run_study(grid: SweepGrid,
              variants: Sequence[Mapping[str, float]],
              max_workers: Optional[int] = None,
              progress: bool = False) -> List[Tuple[str, SweepGrid]]:
    """
    Sweep the same grid once per parameter override.

    Args:
        grid: Base grid; each variant replaces fields of ``grid.base``
        variants: Overrides, e.g. PRESET_STUDIES["pi"]

    Returns:
        (variant label, swept grid) pairs in variant order
    """
    if not variants:
        raise DomainError("a study needs at least one variant")
    known = {f.name for f in dataclasses.fields(SimulationParams)} - {"alpha", "beta", "seed"}
    studies = []
    for overrides in variants:
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise DomainError(f"cannot vary {', '.join(unknown)}")
        variant = dataclasses.replace(grid, base=grid.base.replace(**overrides), cells={})
        label = variant_label(overrides)
        logger.info("Study variant %s", label)
        studies.append((label, sweep(variant, max_workers=max_workers, progress=progress)))
    return studies


def study_to_frame(studies: Sequence[Tuple[str, SweepGrid]]) -> pd.DataFrame:
    """Concatenate study sweeps with a leading 'variant' column."""
    frames = []
    for label, grid in studies:
        frame = sweep_to_frame(grid)
        frame.insert(0, "variant", label)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
