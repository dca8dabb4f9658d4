"""Shared fixtures: small simulated claim datasets and helpers."""
import json
import sys

import numpy as np
import pytest

from helpers import make_dataset


@pytest.fixture(scope="session")
def harness_data():
    data, _ = make_dataset()
    return data


@pytest.fixture(scope="session")
def harness_truth():
    return make_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj), encoding="utf-8")
        return path
    return _write


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
