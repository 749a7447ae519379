import logging

import numpy as np
import pandas as pd

from .exceptions import DomainError
from .regions import RegionKind
from .simlab import SWEEP_COLUMNS

logger = logging.getLogger(__name__)

RATE_VALUES = {"s_rate": "s_count", "f_rate": "f_count", "u_rate": "u_count"}
OUTCOME_LETTERS = ("S", "F", "U")


def _test_rows(frame: pd.DataFrame, test) -> pd.DataFrame:
    missing = [col for col in SWEEP_COLUMNS if col not in frame.columns]
    if missing:
        raise DomainError(f"sweep table is missing column(s): {', '.join(missing)}")
    label = test.label if isinstance(test, RegionKind) else RegionKind.parse(test).label
    rows = frame[frame["test"] == label]
    if rows.empty:
        raise DomainError(f"sweep table has no rows for {label}")
    return rows


def tally_crosstab(frame: pd.DataFrame, test, value: str = "s_rate") -> pd.DataFrame:
    """
    Pivot one test's sweep tallies into an alpha x beta grid of outcome rates.

    Args:
        frame: Sweep table (simlab.sweep_to_frame or a loaded sweep CSV)
        test: RegionKind or its name
        value: s_rate, f_rate or u_rate

    Returns:
        DataFrame indexed by alpha (rows) and beta (columns)
    """
    if value not in RATE_VALUES:
        raise DomainError(f"value must be one of {', '.join(RATE_VALUES)}")
    rows = _test_rows(frame, test)
    counts = rows[["s_count", "f_count", "u_count"]].astype(int)
    totals = counts.sum(axis=1)
    rates = rows.assign(rate=counts[RATE_VALUES[value]] / totals.where(totals > 0))
    crosstab = pd.crosstab(
        rates["alpha"].astype(float),
        rates["beta"].astype(float),
        values=rates["rate"],
        aggfunc="mean",
    )
    crosstab.index.name = "alpha"
    crosstab.columns.name = "beta"
    return crosstab


def dominant_outcome_grid(frame: pd.DataFrame, test) -> pd.DataFrame:
    """
    Majority outcome letter per (alpha, beta) cell; ties resolve in S, F, U order.

    Returns:
        DataFrame of 'S' / 'F' / 'U' indexed by alpha (rows) and beta (columns)
    """
    rows = _test_rows(frame, test)
    counts = rows[["s_count", "f_count", "u_count"]].astype(int).to_numpy()
    letters = np.asarray(OUTCOME_LETTERS)[np.argmax(counts, axis=1)]
    grid = rows.assign(outcome=letters).pivot(index="alpha", columns="beta", values="outcome")
    grid.index = grid.index.astype(float)
    grid.columns = grid.columns.astype(float)
    grid.index.name = "alpha"
    grid.columns.name = "beta"
    return grid.sort_index().sort_index(axis=1)
