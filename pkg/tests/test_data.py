import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quantum_bl import blmodel, data
from quantum_bl.backtest import make_segments
from quantum_bl.errors import DegenerateColumn, MissingColumn, ParseError


def test_parse_two_rows():
    t = data.parse_csv("date,AAA,BBB\n2020-01-10,2,3\n2020-01-03,1,4\n", "prices")
    assert len(t) == 2
    assert t.dates == [dt.date(2020, 1, 3), dt.date(2020, 1, 10)]
    assert t.column("AAA").tolist() == [1.0, 2.0]


@pytest.mark.parametrize("text,kind,fragment", [
    ("date,A\n2020-01-03,1\n2020-01-03,2\n", "prices", "duplicate date"),
    ("date,A\n2020-01-03,x\n", "prices", "row 2, column 2"),
    ("date,A\n2020-01-03,-1\n", "prices", "positive"),
    ("date,A\n2020-13-03,1\n", "prices", "invalid date"),
    ("date,A\n2020-01-03,1,2\n", "indicators", "expected 2 fields"),
    ("date,ticker,cap\n2020-01-03,A,-5\n", "caps", "negative cap"),
    ("date,ticker,cap\n2020-01-03,A,5\n2020-01-03,A,6\n", "caps", "duplicate cap"),
    ("", "prices", "empty"),
])
def test_parse_errors(text, kind, fragment):
    with pytest.raises(ParseError, match=fragment):
        data.parse_csv(text, kind)


@pytest.mark.parametrize("text,kind", [
    ("day,A\n2020-01-03,1\n", "prices"),
    ("date,ticker\n2020-01-03,A\n", "caps"),
    ("date,DGS10\n2020-01-03,1\n", "rates"),
])
def test_missing_columns(text, kind):
    with pytest.raises(MissingColumn):
        data.parse_csv(text, kind)


def test_twelve_ticker_universe():
    header = "date," + ",".join(data.TICKERS_12)
    rows = [f"2020-01-{d:02d}," + ",".join(str(10 + k) for k in range(12)) for d in (3, 10)]
    t = data.parse_csv("\n".join([header, *rows]) + "\n", "prices")
    assert t.columns == ["IPG", "HAS", "MAR", "VLO", "GL", "MDT", "MMM", "HPQ", "ADSK", "NUE", "PLD", "XEL"]
    assert t.values.shape == (2, 12)


def test_caps_snapshot():
    c = data.parse_csv("date,ticker,cap\n2020-01-03,A,5\n2021-01-01,A,7\n2020-06-05,B,3\n", "caps")
    assert c.snapshot(["A", "B"], dt.date(2020, 12, 31)).tolist() == [5.0, 3.0]
    assert c.snapshot(["A"], dt.date(2021, 1, 1)).tolist() == [7.0]
    with pytest.raises(MissingColumn):
        c.snapshot(["B"], dt.date(2020, 1, 3))


def test_align_forward_fills():
    a = data.parse_csv("date,X\n2020-01-03,1\n2020-01-10,2\n2020-01-17,3\n", "prices")
    b = data.parse_csv("date,Y\n2020-01-03,7\n2020-01-17,9\n", "indicators")
    _, bb = data.align([a, b])
    assert bb.values[:, 0].tolist() == [7.0, 7.0, 9.0]


def test_moving_average():
    x = np.array([[3.0], [6.0], [9.0], [12.0]])
    assert data.moving_average(x, 3)[:, 0].tolist() == [3.0, 4.5, 6.0, 9.0]


def panel(rng, n=200, cols=10):
    base = rng.standard_normal((n, 4)).cumsum(axis=0) * 0.1
    return base @ rng.standard_normal((4, cols)) + 0.3 * rng.standard_normal((n, cols))


def test_constant_column_rejected(rng):
    p = panel(rng)
    p[:, 3] = 4.2
    with pytest.raises(DegenerateColumn):
        data.preprocess(p)


def test_standardization_and_pca(rng):
    p = panel(rng)
    smoothed = data.moving_average(p)[:150]
    tf = data.fit_transform(smoothed)
    z = (smoothed - tf.mean) / tf.std
    assert np.all(np.abs(z.mean(axis=0)) <= 1e-10)
    assert np.all(np.abs(z.var(axis=0) - 1.0) <= 1e-8)
    assert np.allclose(tf.components.T @ tf.components, np.eye(4), atol=1e-10)
    assert np.all(np.diff(tf.explained) <= 0)
    # numpy oracle for the leading spectrum
    assert np.allclose(tf.explained, np.sort(np.linalg.eigvalsh(np.cov(z.T, ddof=0)))[::-1][:4], atol=1e-9)


def test_features_in_half_open_range(rng):
    p = panel(rng)
    feats, _ = data.preprocess(p, train_rows=120)
    assert feats.shape == (200, 4)
    assert np.all(feats > 0) and np.all(feats <= 2 * np.pi)
    train = feats[:120]
    assert np.allclose(train.max(axis=0), 2 * np.pi)


def test_preprocess_is_train_window_fitted(rng):
    p = panel(rng)
    short, _ = data.preprocess(p[:150], train_rows=120)
    long, _ = data.preprocess(p, train_rows=120)
    assert np.array_equal(short[:120], long[:120])


def test_prune_examples():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    assert data.prune_conflicts(x, [1, -1, 1], eps=0.5).tolist() == [2]
    assert data.prune_conflicts(x, [1, 1, 1], eps=0.5).tolist() == [0, 1, 2]
    # joint labels: any differing component counts as a conflict
    assert data.prune_conflicts(x, [[1, 2], [1, 1], [1, 1]], eps=0.5).tolist() == [2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.05, 1.0))
def test_prune_postcondition(seed, eps):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 3, (40, 2))
    y = rng.choice([-1, 1], 40)
    kept = set(data.prune_conflicts(x, y, eps=eps).tolist())
    for i in range(40):
        has_conflict = any(y[j] != y[i] and np.linalg.norm(x[i] - x[j]) < eps for j in range(40))
        assert (i in kept) == (not has_conflict)
    for i in kept:
        for j in kept:
            if np.linalg.norm(x[i] - x[j]) < eps:
                assert y[i] == y[j]


def test_synth_fixture_deterministic(tmp_path):
    a = data.synth_fixture(3, n_assets=4, n_weeks=330)
    b = data.synth_fixture(3, n_assets=4, n_weeks=330)
    assert a.texts == b.texts
    pa = data.write_fixture(a, tmp_path / "a")
    pb = data.write_fixture(b, tmp_path / "b")
    for kind in pa:
        assert pa[kind].read_bytes() == pb[kind].read_bytes()
    assert data.synth_fixture(4, n_assets=4, n_weeks=330).texts != a.texts


def test_synth_fixture_roundtrips_through_parser(tmp_path):
    fx = data.synth_fixture(1, n_assets=3, n_weeks=320)
    paths = data.write_fixture(fx, tmp_path)
    prices = data.load_csv(paths["prices"], "prices")
    assert np.array_equal(prices.values, fx.prices.values)
    assert data.load_csv(paths["indicators"], "indicators").columns == list(data.INDICATOR_NAMES)
    assert data.load_csv(paths["rates"], "rates").columns == ["IRX"]
    caps = data.load_csv(paths["caps"], "caps")
    for d in sorted(set(fx.caps.dates)):
        assert np.array_equal(caps.snapshot(fx.prices.columns, d), fx.caps.snapshot(fx.prices.columns, d))


def test_synth_fixture_shape(fixture12):
    assert fixture12.prices.values.shape == (730, 12)
    assert len(make_segments(729)) == 9
    r = blmodel.log_returns(fixture12.prices.values)
    assert np.linalg.eigvalsh(blmodel.covariance(r)).min() > 0
    with pytest.raises(ValueError):
        data.synth_fixture(0, n_assets=1)
