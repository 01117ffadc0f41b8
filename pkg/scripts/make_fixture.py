"""Regenerate src/xrltrade/data/SYNTH.csv, the bundled synthetic OHLCV fixture.

Business days from 2019-01-01 to 2022-06-21: a log random walk modulated by a
5% cycle of 20 trading days, in Yahoo export layout (with Adj Close) and with
three ``null`` rows. Without the cycle there is nothing for the agent to learn
and most seeds end with a constant Q-function.
"""

import datetime as dt
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "xrltrade" / "data" / "SYNTH.csv"

rng = np.random.default_rng(20220621)
days = [d for d in (dt.date(2019, 1, 1) + dt.timedelta(k) for k in range(1300)) if d.weekday() < 5]
days = [d for d in days if d <= dt.date(2022, 6, 21)]
n = len(days)
trend = np.exp(np.cumsum(rng.normal(0.0003, 0.008, n)))
close = 100.0 * trend * (1 + 0.05 * np.sin(2 * np.pi * np.arange(n) / 20))
open_ = np.concatenate([[close[0]], close[:-1]]) * np.exp(rng.normal(0, 0.003, n))
high = np.maximum(open_, close) * (1 + np.abs(rng.normal(0, 0.006, n)))
low = np.minimum(open_, close) * (1 - np.abs(rng.normal(0, 0.006, n)))
volume = rng.integers(200_000, 2_000_000, n)
null_rows = {117, 402, 755}

lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
for i, d in enumerate(days):
    o, h, lo, c = (round(float(v), 2) for v in (open_[i], high[i], low[i], close[i]))
    h, lo = max(h, o, c), min(lo, o, c)
    if i in null_rows:
        lines.append(f"{d.isoformat()},null,null,null,null,null,null")
    else:
        lines.append(f"{d.isoformat()},{o:.2f},{h:.2f},{lo:.2f},{c:.2f},{c * 0.97:.2f},{volume[i]}")
OUT.write_text("\n".join(lines) + "\n")
print(f"wrote {n} rows to {OUT}")
