from __future__ import annotations

from pathlib import Path

import pytest

from phes_odm import bundled_dictionary, read_dataset, validate_dataset

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
FIGURE_FIXTURES = ("fig5b", "fig5c", "fig8b", "fig8c", "fig9b", "fig9c", "fig10c", "fig11b")

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def dictionary():
    return bundled_dictionary()


def load(name, dictionary=None):
    """Read a fixture and run every check; returns (dataset, combined report)."""
    d = dictionary or bundled_dictionary()
    ds, report = read_dataset(FIXTURES / name, d)
    report.extend(validate_dataset(ds, d).findings)
    report.sort(d.table_names)
    return ds, report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
