"""Shared test plumbing.

Keeps the environment hermetic (the seed override variable must never leak
between tests) and collects the acceptance one-liners into a summary block
at the end of the run.
"""

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("GRIDFORGE_SEED", raising=False)


@pytest.fixture()
def data_dir() -> Path:
    return DATA_DIR


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance results")
        for line in lines:
            terminalreporter.write_line(line)
