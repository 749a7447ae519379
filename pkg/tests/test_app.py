from pathlib import Path

import pytest
from streamlit.testing.v1 import AppTest

APP = str(Path(__file__).resolve().parent.parent / "app.py")


@pytest.fixture
def app():
    return AppTest.from_file(APP, default_timeout=30).run()


def test_renders_without_uploads(app):
    assert not app.exception
    assert len(app.tabs) == 3
    assert any("Upload a scores file" in info.value for info in app.info)


def test_voting_calculator_defaults(app):
    assert app.metric[0].value == "0.648000"


def test_voting_calculator_updates(app):
    app.number_input(key="vote_k").set_value(1).run()
    assert not app.exception
    assert app.metric[0].value == "0.600000"
