from __future__ import annotations

import os
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def pbc_path(tmp_path_factory) -> Path:
    """Published PBC data as CSV: ``PBC_DATA_PATH`` if set, else exported from rdatasets."""
    env = os.environ.get("PBC_DATA_PATH")
    if env:
        return Path(env)
    rdatasets = pytest.importorskip("rdatasets")
    frame = rdatasets.data("survival", "pbc")
    path = tmp_path_factory.mktemp("pbc") / "pbc.csv"
    frame.to_csv(path, index=False)
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
