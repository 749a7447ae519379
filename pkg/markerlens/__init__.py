"""
markerlens: label-free comparison of two models with weak-signal markers.

This package contains:
- markers: marker verdict matrix, majority-vote combined score, marker file loading
- regions: score ranking and the TopK / BottomK / Movers regions
- hypothesis: Welch's t-test and the Success / Failure / Undetermined verdicts
- simlab: simulation of labels, markers and scores, (alpha, beta) sweeps
- voting: majority-vote accuracy and coverage calculators
- reporting, analytics, config, cli: report rendering, sweep crosstabs, configuration, command line
"""

__version__ = "1.0.0"

from .exceptions import ConfigError, DomainError, FormatError, MarkerLensError, UnknownIdError, ValidationError
from .hypothesis import Outcome, TestResult, WelchResult, run_comparison, verdict, welch_test
from .markers import MarkerMatrix, Verdict, average_marker_score, combined_score, load_marker_file
from .regions import RankVector, RegionKind, RegionPair, ScoreTable, load_score_file, rank_scores
from .simlab import SimulationParams, SweepGrid, generate_dataset, run_region_tests, sweep
from .voting import combined_coverage, majority_accuracy, majority_accuracy_hetero

__all__ = [
    'ConfigError',
    'DomainError',
    'FormatError',
    'MarkerLensError',
    'UnknownIdError',
    'ValidationError',
    'Outcome',
    'TestResult',
    'WelchResult',
    'run_comparison',
    'verdict',
    'welch_test',
    'MarkerMatrix',
    'Verdict',
    'average_marker_score',
    'combined_score',
    'load_marker_file',
    'RankVector',
    'RegionKind',
    'RegionPair',
    'ScoreTable',
    'load_score_file',
    'rank_scores',
    'SimulationParams',
    'SweepGrid',
    'generate_dataset',
    'run_region_tests',
    'sweep',
    'combined_coverage',
    'majority_accuracy',
    'majority_accuracy_hetero',
]
