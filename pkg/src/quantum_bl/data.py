"""CSV ingestion, indicator preprocessing, conflict pruning, and a synthetic market fixture.

CSV schemas (header row required, ISO-8601 dates in the first column):

* prices:     ``date,<TICKER>,<TICKER>,...``  one positive price per ticker
* caps:       ``date,ticker,cap``             long format, one row per snapshot
* indicators: ``date,<NAME>,<NAME>,...``      one real series per column
* rates:      ``date,IRX``                    13-week T-bill, annualized percent
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DegenerateColumn, DimensionMismatch, MissingColumn, ParseError
from .numerics import eigh, make_rng

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

INDICATOR_NAMES = (
    "DOW", "WILL5000INDFC", "VIXCLS", "T10Y2Y", "T10YIE",
    "DCOILBRENTEU", "DEXCHUS", "DFF", "EXPTOTUS", "IGREA",
)
TICKERS_12 = ("IPG", "HAS", "MAR", "VLO", "GL", "MDT", "MMM", "HPQ", "ADSK", "NUE", "PLD", "XEL")

KINDS = ("prices", "caps", "indicators", "rates")


@dataclass
class Table:
    """Wide date-indexed table: ``values[i, j]`` is column ``j`` on ``dates[i]``."""

    dates: list
    columns: list
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise MissingColumn(f"no column {name!r}") from None

    def select(self, names) -> "Table":
        idx = []
        for name in names:
            if name not in self.columns:
                raise MissingColumn(f"no column {name!r}")
            idx.append(self.columns.index(name))
        return Table(list(self.dates), list(names), self.values[:, idx])


@dataclass
class CapsTable:
    """Long-format market caps: ``(date, ticker, cap)`` rows sorted by date."""

    dates: list
    tickers: list
    caps: np.ndarray

    def snapshot(self, tickers, as_of: dt.date) -> np.ndarray:
        """Per ticker, the cap at the latest date on or before ``as_of``."""
        out = np.zeros(len(tickers))
        for k, t in enumerate(tickers):
            best = None
            for d, tk, c in zip(self.dates, self.tickers, self.caps):
                if tk == t and d <= as_of and (best is None or d >= best[0]):
                    best = (d, c)
            if best is None:
                raise MissingColumn(f"no cap for {t} on or before {as_of.isoformat()}")
            out[k] = best[1]
        return out


def _parse_date(text: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"row {row}, column 1: invalid date {text!r}") from None


def _parse_float(text: str, row: int, col: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col}: invalid number {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}, column {col}: non-finite value {text!r}")
    return v


def parse_csv(text: str, kind: str) -> Union[Table, CapsTable]:
    """Parse CSV text of the given ``kind``; see the module docstring for schemas."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "date":
        raise MissingColumn("first column must be 'date'")
    body = rows[1:]
    if kind == "caps":
        for name in ("ticker", "cap"):
            if name not in header:
                raise MissingColumn(f"caps file needs a {name!r} column")
        it, ic = header.index("ticker"), header.index("cap")
        recs = []
        for r_no, r in enumerate(body, start=2):
            if len(r) != len(header):
                raise ParseError(f"row {r_no}: expected {len(header)} fields, got {len(r)}")
            cap = _parse_float(r[ic], r_no, ic + 1)
            if cap < 0:
                raise ParseError(f"row {r_no}, column {ic + 1}: negative cap")
            recs.append((_parse_date(r[0], r_no), r[it].strip(), cap))
        seen = set()
        for d, t, _ in recs:
            if (d, t) in seen:
                raise ParseError(f"duplicate cap for {t} on {d.isoformat()}")
            seen.add((d, t))
        recs.sort(key=lambda x: (x[0], x[1]))
        return CapsTable([r[0] for r in recs], [r[1] for r in recs], np.array([r[2] for r in recs]))

    columns = header[1:]
    if not columns:
        raise MissingColumn("no data columns")
    if kind == "rates" and "IRX" not in columns:
        raise MissingColumn("rates file needs an 'IRX' column")
    if len(set(columns)) != len(columns):
        raise ParseError("duplicate column names")
    dates, values = [], []
    for r_no, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"row {r_no}: expected {len(header)} fields, got {len(r)}")
        dates.append(_parse_date(r[0], r_no))
        vals = [_parse_float(c, r_no, j + 2) for j, c in enumerate(r[1:])]
        if kind == "prices":
            for j, v in enumerate(vals):
                if v <= 0:
                    raise ParseError(f"row {r_no}, column {j + 2}: price must be positive")
        values.append(vals)
    if len(set(dates)) != len(dates):
        dup = sorted(d for d in set(dates) if dates.count(d) > 1)[0]
        raise ParseError(f"duplicate date {dup.isoformat()}")
    order = sorted(range(len(dates)), key=dates.__getitem__)
    arr = np.array(values, dtype=float).reshape(len(dates), len(columns))[order]
    return Table([dates[i] for i in order], columns, arr)


def load_csv(path, kind: str) -> Union[Table, CapsTable]:
    return parse_csv(Path(path).read_text(), kind)


def align(tables: list) -> list:
    """Restrict tables to the dates of the first one, forward-filling gaps in the others."""
    ref = tables[0].dates
    out = [tables[0]]
    for t in tables[1:]:
        pos = {d: i for i, d in enumerate(t.dates)}
        rows = np.empty((len(ref), len(t.columns)))
        last = None
        filled = 0
        j = 0
        for i, d in enumerate(ref):
            while j < len(t.dates) and t.dates[j] <= d:
                last = j
                j += 1
            if d in pos:
                rows[i] = t.values[pos[d]]
            elif last is not None:
                rows[i] = t.values[last]
                filled += 1
            else:
                raise ParseError(f"no data on or before {d.isoformat()} to fill from")
        if filled:
            log.warning("forward-filled %d rows while aligning %s", filled, ",".join(t.columns))
        out.append(Table(list(ref), list(t.columns), rows))
    return out


# ---------------------------------------------------------------------------
# preprocessing

def moving_average(x, window: int = 3) -> np.ndarray:
    """Backward rolling mean; the first rows average over what is available."""
    x = np.asarray(x, dtype=float)
    csum = np.cumsum(np.vstack([np.zeros((1, x.shape[1])), x]), axis=0)
    hi = np.arange(1, len(x) + 1)
    lo = np.maximum(hi - window, 0)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


@dataclass
class FeatureTransform:
    """Standardize -> project -> rescale, all fitted on a training window."""

    mean: np.ndarray
    std: np.ndarray
    components: np.ndarray  # (n_columns, n_components)
    explained: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    window: int = 3

    def project(self, smoothed) -> np.ndarray:
        z = (np.asarray(smoothed, dtype=float) - self.mean) / self.std
        return z @ self.components

    def apply(self, smoothed) -> np.ndarray:
        """Map smoothed rows into (0, 2pi], clamping points outside the fitted range."""
        y = self.project(smoothed)
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        # lo maps just above 0, hi maps to 2pi
        eps = TWO_PI * 1e-6
        out = eps + (y - self.lo) / span * (TWO_PI - eps)
        return np.clip(out, eps, TWO_PI)


def fit_transform(smoothed_train, n_components: int = 4, window: int = 3) -> FeatureTransform:
    x = np.asarray(smoothed_train, dtype=float)
    if x.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    if x.shape[1] < n_components:
        raise DimensionMismatch(f"need at least {n_components} columns, got {x.shape[1]}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    if np.any(std <= 1e-12 * np.maximum(1.0, np.abs(mean))):
        raise DegenerateColumn(f"column {int(np.argmin(std))} has zero variance")
    z = (x - mean) / std
    evals, evecs = eigh(z.T @ z / len(z))
    order = np.argsort(evals)[::-1][:n_components]
    comps = evecs[:, order]
    # fix signs so the largest loading is positive
    signs = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(n_components)])
    comps = comps * np.where(signs == 0, 1.0, signs)
    y = z @ comps
    return FeatureTransform(mean=mean, std=std, components=comps, explained=evals[order],
                            lo=y.min(axis=0), hi=y.max(axis=0), window=window)


def preprocess(panel, train_rows: Optional[int] = None, n_components: int = 4, window: int = 3):
    """Smooth, then fit the transform on the first ``train_rows`` rows and apply it to all rows.

    Returns ``(features, transform)``; ``features`` has one row per panel row.
    """
    values = panel.values if isinstance(panel, Table) else np.asarray(panel, dtype=float)
    if values.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    train_rows = values.shape[0] if train_rows is None else train_rows
    smoothed = moving_average(values, window)
    tf = fit_transform(smoothed[:train_rows], n_components, window)
    return tf.apply(smoothed), tf


def mean_nn_distance(x) -> float:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return 0.0
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).mean())


def prune_conflicts(features, labels, eps: Optional[float] = None, scale: float = 0.1):
    """Drop every point that has an opposite-label neighbor closer than ``eps``.

    ``labels`` may be 1-D or 2-D (rows compared as tuples). ``eps`` defaults
    to ``scale`` times the mean nearest-neighbor distance. Returns the index
    array of retained points.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if y.ndim == 1:
        y = y[:, None]
    if eps is None:
        eps = scale * mean_nn_distance(x)
    if eps <= 0:
        return np.arange(len(x))
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    differ = (y[:, None, :] != y[None, :, :]).any(-1)
    conflict = ((d < eps) & differ).any(axis=1)
    return np.flatnonzero(~conflict)


# ---------------------------------------------------------------------------
# synthetic fixture

@dataclass
class Fixture:
    prices: Table
    caps: CapsTable
    indicators: Table
    rates: Table
    texts: dict = field(default_factory=dict, repr=False)


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _table_text(t: Table) -> str:
    lines = [",".join(["date", *t.columns])]
    for d, row in zip(t.dates, t.values):
        lines.append(",".join([d.isoformat(), *(_fmt(v) for v in row)]))
    return "\n".join(lines) + "\n"


def _caps_text(c: CapsTable) -> str:
    lines = ["date,ticker,cap"]
    for d, t, v in zip(c.dates, c.tickers, c.caps):
        lines.append(f"{d.isoformat()},{t},{_fmt(v)}")
    return "\n".join(lines) + "\n"


def synth_fixture(seed: int, n_assets: int = 12, n_weeks: int = 730, start: dt.date = dt.date(2008, 1, 4),
                  n_factors: int = 4) -> Fixture:
    """Weekly prices whose drift follows slow latent factors that also drive the indicators.

    Each asset's weekly drift is ``base + amp * tanh(loading . f_t)`` for a
    persistent AR(1) factor vector ``f_t``; the indicators are noisy linear
    mixtures of the same factors, so forward-looking return labels are
    learnable from the indicator panel. A common market factor adds
    correlation. Caps are yearly snapshots of price times a fixed share count.
    Output is fully determined by ``seed``.
    """
    if n_assets < 2 or n_weeks < 320:
        raise ValueError("need n_assets >= 2 and n_weeks >= 320")
    rng = make_rng(seed)
    phi = 0.99
    f = np.zeros((n_weeks, n_factors))
    f[0] = rng.standard_normal(n_factors)
    shock = math.sqrt(1.0 - phi * phi)
    for t in range(1, n_weeks):
        f[t] = phi * f[t - 1] + shock * rng.standard_normal(n_factors)

    loadings = rng.standard_normal((n_assets, n_factors))
    loadings /= np.linalg.norm(loadings, axis=1, keepdims=True)
    base = rng.uniform(0.0, 0.0015, n_assets)
    amp = rng.uniform(0.003, 0.006, n_assets)
    beta = rng.uniform(0.6, 1.2, n_assets)
    idio = rng.uniform(0.03, 0.05, n_assets)
    drift = base + amp * np.tanh(1.5 * f @ loadings.T)
    market = 0.025 * rng.standard_normal(n_weeks)
    r = drift + beta * market[:, None] + idio * rng.standard_normal((n_weeks, n_assets))
    r[0] = 0.0
    p0 = rng.uniform(20.0, 200.0, n_assets)
    prices = p0 * np.exp(np.cumsum(r, axis=0))

    n_ind = len(INDICATOR_NAMES)
    mix = rng.standard_normal((n_factors, n_ind))
    level = rng.uniform(1.0, 50.0, n_ind)
    scale = rng.uniform(0.5, 5.0, n_ind)
    # indicators observed at week t see the factor state of week t
    ind = level + scale * (f @ mix + 0.15 * rng.standard_normal((n_weeks, n_ind)))

    irx = np.clip(1.5 + 0.8 * f[:, 0] + 0.05 * rng.standard_normal(n_weeks), 0.0, None)

    dates = [start + dt.timedelta(weeks=k) for k in range(n_weeks)]
    tickers = list(TICKERS_12[:n_assets]) if n_assets <= 12 else [f"A{k:02d}" for k in range(n_assets)]
    shares = rng.uniform(0.5, 5.0, n_assets) * 1e8
    cap_rows = [k for k in range(n_weeks) if k % 52 == 0]
    cap_dates, cap_tk, cap_v = [], [], []
    for k in cap_rows:
        for j, t in enumerate(tickers):
            cap_dates.append(dates[k])
            cap_tk.append(t)
            cap_v.append(float(f"{prices[k, j] * shares[j]:.10g}"))

    def rounded(a):
        return np.array([[float(_fmt(v)) for v in row] for row in a])

    fx = Fixture(
        prices=Table(dates, tickers, rounded(prices)),
        caps=CapsTable(cap_dates, cap_tk, np.array(cap_v)),
        indicators=Table(dates, list(INDICATOR_NAMES), rounded(ind)),
        rates=Table(dates, ["IRX"], rounded(irx[:, None])),
    )
    fx.texts = {
        "prices.csv": _table_text(fx.prices),
        "caps.csv": _caps_text(fx.caps),
        "indicators.csv": _table_text(fx.indicators),
        "rates.csv": _table_text(fx.rates),
    }
    return fx


def write_fixture(fx: Fixture, out_dir) -> dict:
    """Write the fixture CSVs; returns ``{kind: path}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in fx.texts.items():
        path = out / name
        path.write_text(text)
        paths[name.split(".")[0]] = path
    return paths
