"""
Command-line entry points: compare, simulate and voting.

    markerlens compare --scores scores.csv --markers markers.csv --k 1000,10000
    markerlens simulate --config sweep.cfg --out sweep.csv --workers 4
    markerlens voting accuracy --k 3 --alpha 0.6
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence, Tuple

import pandas as pd

from . import __version__
from .config import OUTPUT_FORMATS, UNMATCHED_POLICIES, ComparisonConfig, ConfigManager
from .exceptions import ConfigError, MarkerLensError, ValidationError
from .hypothesis import DEFAULT_LEVEL, run_comparison
from .markers import AGGREGATIONS, MarkerMatrix, load_marker_file
from .regions import RegionKind, ScoreTable, load_score_file
from .reporting import Report, ReportRenderer
from .simlab import run_study, study_to_frame, sweep, sweep_to_frame
from .utils import atomic_write_text, parse_float_list, parse_int_list
from .voting import (accuracy_curves, combined_coverage, majority_accuracy, majority_accuracy_hetero,
                     marginal_marker_impact)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

DEFAULT_CURVE_KS = "1,3,5,7,9,11,13,15"
DEFAULT_CURVE_ALPHAS = "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95"


def reconcile_samples(scores: ScoreTable, markers: MarkerMatrix, policy: str = "strict") -> Tuple[MarkerMatrix, List[str]]:
    """
    Align a marker matrix with the scored sample universe.

    Scored samples without markers get all-abstain rows. Samples that only
    the marker file knows are an error under ``strict`` and are dropped with
    a warning under ``abstain``.

    Args:
        scores: Loaded score table (defines the universe)
        markers: Loaded marker matrix
        policy: strict or abstain

    Returns:
        (marker matrix over exactly scores.sample_ids, sorted dropped sample ids)
    """
    if policy not in UNMATCHED_POLICIES:
        raise ConfigError("unmatched", f"must be one of {', '.join(UNMATCHED_POLICIES)}")

    reconciled, dropped = markers.reindex(scores.sample_ids)
    if dropped and policy == "strict":
        raise ValidationError(
            f"{len(dropped)} marker sample(s) have no scores (e.g. {dropped[0]!r}); "
            "use --unmatched abstain to drop them"
        )
    if dropped:
        logger.warning("Dropped %d marker sample(s) without scores", len(dropped))

    filled = len(set(scores.sample_ids) - set(markers.sample_ids))
    if filled:
        logger.info("Filled %d scored sample(s) without markers with abstains", filled)
    return reconciled, dropped


def cmd_compare(config: ComparisonConfig) -> Report:
    """
    Load both files, reconcile them and run the region tests.

    Args:
        config: Comparison settings

    Returns:
        Report over every (test, k)
    """
    config.validate()
    scores = load_score_file(config.scores_path)
    markers = load_marker_file(config.markers_path)
    filled = len(set(scores.sample_ids) - set(markers.sample_ids))
    reconciled, dropped = reconcile_samples(scores, markers, config.unmatched_policy)

    results = run_comparison(scores, reconciled, config.ks, config.kinds, config.level, config.aggregation)

    notes = []
    if filled:
        notes.append(f"{filled} scored sample(s) had no markers and were treated as abstaining")
    if dropped:
        notes.append(f"{len(dropped)} marker sample(s) had no scores and were dropped")
    logger.info("Compared %d samples over %d marker(s)", len(scores), len(reconciled.marker_names))
    return Report(results, level=config.level, notes=notes)


def cmd_simulate(config_path: str, max_workers: Optional[int] = None, progress: bool = False) -> pd.DataFrame:
    """
    Run the sweep (or parameter study) a config file describes.

    Returns:
        Sweep table; studies carry a leading 'variant' column
    """
    manager = ConfigManager()
    values = manager.load_key_value_file(config_path)
    grid = manager.build_sweep_grid(values)
    variants = manager.build_study_variants(values)
    if variants:
        return study_to_frame(run_study(grid, variants, max_workers=max_workers, progress=progress))
    return sweep_to_frame(sweep(grid, max_workers=max_workers, progress=progress))


def _parse_list(text: str, name: str, kind=float) -> list:
    try:
        return parse_float_list(text, name) if kind is float else parse_int_list(text, name)
    except ValueError as e:
        raise ConfigError(name, str(e).split(": ", 1)[-1])


def cmd_voting(args: argparse.Namespace) -> pd.DataFrame:
    """Dispatch a voting subcommand and return its result table."""
    if args.voting_command == "accuracy":
        if args.alphas:
            alphas = _parse_list(args.alphas, "alphas")
            outcome = majority_accuracy_hetero(alphas)
            row = {"k": len(alphas), "alphas": args.alphas}
        else:
            if args.k is None or args.alpha is None:
                raise ConfigError("k", "voting accuracy needs --k and --alpha, or --alphas")
            outcome = majority_accuracy(args.k, args.alpha)
            row = {"k": args.k, "alpha": args.alpha}
        row.update(p_correct=outcome.p_correct, p_tie=outcome.p_tie, p_wrong=outcome.p_wrong)
        return pd.DataFrame([row])

    if args.voting_command == "coverage":
        betas = _parse_list(args.betas, "betas")
        return pd.DataFrame([{"betas": args.betas, "coverage": combined_coverage(betas)}])

    if args.voting_command == "curves":
        return accuracy_curves(_parse_list(args.ks, "ks", int), _parse_list(args.alpha_values, "alpha_values"))

    return marginal_marker_impact(_parse_list(args.base_alphas, "base_alphas"),
                                  _parse_list(args.new_alphas, "new_alphas"))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markerlens",
                                     description="Compare two models without labels using weak-signal markers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str.upper, default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level (default: $MARKERLENS_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    compare = commands.add_parser("compare", help="Run the region tests on a scores file and a markers file")
    compare.add_argument("--scores", required=True, help="CSV/JSONL with sample_id, score_ref, score_test")
    compare.add_argument("--markers", required=True, help="CSV/JSONL with sample_id, marker, verdict")
    compare.add_argument("--k", required=True, help="Region size(s), comma separated")
    compare.add_argument("--tests", default="top,bottom,movers", help="Subset of top,bottom,movers")
    compare.add_argument("--level", type=float, default=DEFAULT_LEVEL, help="Significance level")
    compare.add_argument("--unmatched", choices=UNMATCHED_POLICIES, default="strict",
                         help="What to do with marker samples that have no scores")
    compare.add_argument("--aggregation", choices=AGGREGATIONS, default="majority",
                         help="Combined marker score: majority vote sign or raw vote sum")
    compare.add_argument("--format", choices=OUTPUT_FORMATS, default="table")
    compare.add_argument("--out", default=None, help="Output file (default: stdout)")

    simulate = commands.add_parser("simulate", help="Sweep the simulation over an (alpha, beta) grid")
    simulate.add_argument("--config", required=True, help="key = value config file")
    simulate.add_argument("--out", default=None, help="Sweep CSV (default: stdout)")
    simulate.add_argument("--workers", type=int, default=None,
                          help="Worker processes (default: $MARKERLENS_WORKERS or 1)")
    simulate.add_argument("--progress", action=argparse.BooleanOptionalAction, default=False,
                          help="Show a progress bar on stderr")

    voting = commands.add_parser("voting", help="Majority-voting calculators")
    voting_commands = voting.add_subparsers(dest="voting_command", required=True)

    accuracy = voting_commands.add_parser("accuracy", help="Accuracy of a majority vote")
    accuracy.add_argument("--k", type=int, default=None, help="Number of markers")
    accuracy.add_argument("--alpha", type=float, default=None, help="Accuracy of each marker")
    accuracy.add_argument("--alphas", default=None, help="Individual accuracies, comma separated")

    coverage = voting_commands.add_parser("coverage", help="Coverage of several markers combined")
    coverage.add_argument("--betas", required=True, help="Coverages, comma separated")

    curves = voting_commands.add_parser("curves", help="Accuracy over a k x alpha grid")
    curves.add_argument("--ks", default=DEFAULT_CURVE_KS)
    curves.add_argument("--alpha-values", default=DEFAULT_CURVE_ALPHAS)

    marginal = voting_commands.add_parser("marginal", help="Effect of adding one marker to a set")
    marginal.add_argument("--base-alphas", required=True)
    marginal.add_argument("--new-alphas", required=True)

    for sub in (accuracy, coverage, curves, marginal):
        sub.add_argument("--format", choices=OUTPUT_FORMATS, default="table")
        sub.add_argument("--out", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    manager = ConfigManager()
    try:
        settings = manager.get_runtime_settings()
        settings_error = None
    except ConfigError as e:
        settings = {"log_level": "INFO", "workers": None}
        settings_error = e

    logging.basicConfig(level=args.log_level or settings["log_level"], format=LOG_FORMAT, stream=sys.stderr,
                        force=True)
    if settings_error is not None:
        logger.error(str(settings_error))
        return 2

    renderer = ReportRenderer()
    try:
        if args.command == "compare":
            config = ComparisonConfig(
                scores_path=args.scores,
                markers_path=args.markers,
                ks=_parse_list(args.k, "k", int),
                kinds=[RegionKind.parse(part) for part in args.tests.split(",") if part.strip()],
                level=args.level,
                unmatched_policy=args.unmatched,
                output_format=args.format,
                aggregation=args.aggregation,
            )
            report = cmd_compare(config)
            _emit(renderer.render(report, config.output_format), args.out)
        elif args.command == "simulate":
            workers = args.workers if args.workers is not None else settings["workers"]
            if workers is not None and workers < 1:
                raise ConfigError("workers", "must be >= 1")
            frame = cmd_simulate(args.config, max_workers=workers, progress=args.progress)
            _emit(renderer.frame_to_csv(frame), args.out)
        else:
            _emit(renderer.render_frame(cmd_voting(args), args.format), args.out)
    except MarkerLensError as e:
        logger.error(str(e))
        return 2
    except OSError as e:
        logger.error(f"{e.filename or ''}: {e.strerror or e}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
