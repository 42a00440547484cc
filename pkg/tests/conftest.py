import numpy as np
import pytest

from nldebtrank import BankingSystem, generate_synthetic


def make_system(equity, interbank_assets=None, interbank_liabilities=None, external_assets=None):
    """Banking system with prescribed equity and interbank totals.

    External liabilities are chosen so the balance sheet closes.
    """
    e = np.asarray(equity, float)
    n = len(e)
    ai = np.zeros(n) if interbank_assets is None else np.asarray(interbank_assets, float)
    li = np.zeros(n) if interbank_liabilities is None else np.asarray(interbank_liabilities, float)
    ae = np.full(n, 100.0) if external_assets is None else np.asarray(external_assets, float)
    assets = ae + ai
    liabilities = assets - e
    assert np.all(liabilities >= li)
    return BankingSystem.from_arrays(assets, liabilities, ai, li)


@pytest.fixture
def two_bank_chain():
    """Bank 0 lends 10 to bank 1; E = (20, 5); bank 1 has 25 external assets."""
    system = BankingSystem.from_arrays(
        [110.0, 25.0], [90.0, 20.0], [10.0, 0.0], [0.0, 10.0], bank_ids=["A", "B"]
    )
    weights = np.array([[0.0, 10.0], [0.0, 0.0]])
    return system, weights


@pytest.fixture(scope="session")
def synthetic_small():
    return generate_synthetic(40, seed=3)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
