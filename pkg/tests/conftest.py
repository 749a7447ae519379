"""Shared fixtures: the six-sample toy comparison and small simulation settings."""

import json
from pathlib import Path

import pytest

from markerlens.markers import load_marker_file
from markerlens.regions import load_score_file
from markerlens.simlab import SimulationParams

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def toy_scores():
    return load_score_file(FIXTURES / "toy_scores.csv")


@pytest.fixture
def toy_markers():
    return load_marker_file(FIXTURES / "toy_markers.csv")


@pytest.fixture
def toy_reconciled(toy_scores, toy_markers):
    """Toy markers over the scored universe (s5 abstains everywhere)."""
    matrix, dropped = toy_markers.reindex(toy_scores.sample_ids)
    assert dropped == []
    return matrix


@pytest.fixture
def toy_expected() -> dict:
    with open(FIXTURES / "toy_expected.json", encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture
def small_params() -> SimulationParams:
    return SimulationParams(n=2000, k=200, seed=11)
