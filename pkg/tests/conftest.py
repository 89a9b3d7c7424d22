import os
from pathlib import Path

import numpy as np
import pytest

from dcovica.samples import read_csv

DATA_ENV = "DCOVICA_DATA_DIR"

# PASS/FAIL lines from the acceptance suite, repeated in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def data_file(name: str) -> Path | None:
    root = os.environ.get(DATA_ENV)
    if not root:
        return None
    path = Path(root) / name
    return path if path.exists() else None


def require_data(name: str) -> Path:
    path = data_file(name)
    if path is None:
        pytest.skip(f"{name} not found; set {DATA_ENV} to a directory containing it")
    return path


def freedman_standardized() -> np.ndarray:
    """Freedman crime data: log population, nonwhite, density, crime;
    incomplete rows dropped, centered and scaled."""
    from dcovica.samples import center, standardize_columns

    csv = read_csv(require_data("freedman.csv"))
    y = csv.data.copy()
    y[:, 0] = np.log(y[:, 0])
    return standardize_columns(center(y)[0])[0]
