"""Shared fixtures: a tiny synthetic corpus and one short CLI training run."""

import json

import numpy as np
import pytest

from sheetsuggest import synth
from sheetsuggest.grid import save_grid_file
from sheetsuggest.model import toy_config

# One line per acceptance criterion, echoed at the end of the run so the
# verdicts stay visible under output capture.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# Patterns whose references fit inside the toy radius of 2.
_TOY_PATTERNS = (0, 4, 8)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Six grid files, each holding one sheet per toy pattern."""
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(11)
    for i in range(6):
        sheets = [
            synth.memorization_sheet(rng, pid, name=f"p{pid:02d}")
            for pid in _TOY_PATTERNS
        ]
        save_grid_file(root / f"book{i}.grid.json", sheets)
    return root


@pytest.fixture(scope="session")
def tiny_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "toy.json"
    path.write_text(json.dumps(toy_config().to_dict()), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory, tiny_corpus, tiny_config_file):
    """preprocess + a short train through the CLI; returns (data_dir, run_dir)."""
    from sheetsuggest.cli import main

    data = tmp_path_factory.mktemp("data")
    out = tmp_path_factory.mktemp("run")
    rc = main(
        [
            "preprocess",
            "--corpus", str(tiny_corpus),
            "--out", str(data),
            "--radius", "2",
            "--min-count", "1",
            "--ratios", "0.5,0.25,0.25",
        ]
    )
    assert rc == 0
    report = json.loads((data / "report.json").read_text(encoding="utf-8"))
    assert all(report["splits"][name]["written"] >= 1 for name in ("train", "valid", "test"))
    rc = main(
        [
            "train",
            "--data", str(data),
            "--out", str(out),
            "--steps", "10",
            "--batch-size", "4",
            "--lr", "0.003",
            "--eval-every", "5",
            "--config", str(tiny_config_file),
            "--seed", "5",
        ]
    )
    assert rc == 0
    return data, out
