import logging

import numpy as np
import pytest

from quantum_bl import backtest, data

FIXTURE_SEED = 0

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def fixture12():
    return data.synth_fixture(FIXTURE_SEED, 12, 730)


@pytest.fixture(scope="session")
def market12(fixture12):
    return backtest.MarketData.from_fixture(fixture12)


@pytest.fixture(scope="session")
def bl_instances(market12):
    """The nine walk-forward BL instances of the 12-asset fixture (B=6, lambda=1)."""
    cfg = backtest.BacktestConfig(seed=0)
    logging.disable(logging.WARNING)
    try:
        segs = backtest.make_segments(market12.n_periods)
        return [backtest.build_instance(market12, s, cfg) for s in segs]
    finally:
        logging.disable(logging.NOTSET)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
