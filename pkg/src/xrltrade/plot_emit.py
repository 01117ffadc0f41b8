"""Standalone SVG rendering: waterfall explanation plots and OHLC charts with trade markers.

All geometry is computed in float64 and printed with three decimals so output
is byte-stable for golden-file tests.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

from .errors import UsageError
from .explainer import ACTION_NAMES, CondensedExplanation
from .market_data import OhlcvBar

BUY_COLOR = "#ff0051"
SELL_COLOR = "#008bfb"
REMAINDER_COLOR = "#999999"
UP_CANDLE = "#26a69a"
DOWN_CANDLE = "#ef5350"
FONT = "font-family=\"sans-serif\""


def _n(v: float) -> str:
    return f"{round(v, 3) + 0.0:.3f}"


def _signed(v: float) -> str:
    return f"{v:+.2f}"


def _svg_open(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect class="background" x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _text(x, y, s, anchor="start", size=12, cls=None, fill="#333333") -> str:
    c = f' class="{cls}"' if cls else ""
    return (f'<text{c} x="{_n(x)}" y="{_n(y)}" text-anchor="{anchor}" font-size="{size}" {FONT} '
            f'fill="{fill}">{escape(s)}</text>')


def waterfall_filename(ticker: str, date: dt.date) -> str:
    return f"{ticker}_{date.isoformat()}_waterfall.svg"


def ohlc_filename(ticker: str, start: dt.date, end: dt.date) -> str:
    return f"{ticker}_{start.isoformat()}_{end.isoformat()}_ohlc.svg"


@dataclass(frozen=True)
class WaterfallRow:
    label: str
    phi: float
    kind: str  # "buy", "sell" or "remainder"
    start: float
    end: float


@dataclass(frozen=True)
class WaterfallSpec:
    condensed: CondensedExplanation
    width: int = 800
    height: int = 600

    def rows(self) -> list[WaterfallRow]:
        """Rows top-to-bottom; the running total starts at the base value on the bottom row."""
        c = self.condensed
        entries = [
            (f"Feature {a.feature_index} = {a.date.isoformat()} ({ACTION_NAMES[a.action]})", a.phi, ACTION_NAMES[a.action])
            for a in c.top
        ]
        if c.remainder_count:
            entries.append((f"{c.remainder_count} other features", c.remainder_phi, "remainder"))
        if not entries:
            raise UsageError("nothing to plot: no displayed entries and no merged remainder")
        rows = []
        cum = c.explanation.base_value
        for label, phi, kind in reversed(entries):
            start, cum = cum, cum + phi
            rows.append(WaterfallRow(label, phi, kind, start, cum))
        rows.reverse()
        return rows

    def final_value(self) -> float:
        return self.rows()[0].end


_KIND_COLOR = {"buy": BUY_COLOR, "sell": SELL_COLOR, "remainder": REMAINDER_COLOR}


def render_waterfall(spec: WaterfallSpec) -> str:
    rows = spec.rows()
    exp = spec.condensed.explanation
    base, final = exp.base_value, rows[0].end
    w, h = spec.width, spec.height
    left, right, top, bottom = 0.38 * w, 0.06 * w, 60.0, 70.0
    plot_w, plot_h = w - left - right, h - top - bottom

    values = [base, final] + [r.start for r in rows] + [r.end for r in rows]
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.08 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(v: float) -> float:
        return left + (v - lo) / (hi - lo) * plot_w

    row_h = plot_h / len(rows)
    bar_h = 0.7 * row_h
    out = _svg_open(w, h)
    title = f"{exp.ticker} {exp.instance_date.isoformat()}: {ACTION_NAMES[exp.explained_action]} action ({exp.label.value})"
    out.append(_text(w / 2, 24, title, anchor="middle", size=15, cls="title"))

    axis_y = top + plot_h + 8
    out.append(f'<line class="axis" x1="{_n(left)}" y1="{_n(axis_y)}" x2="{_n(left + plot_w)}" y2="{_n(axis_y)}" stroke="#333333" stroke-width="1"/>')
    out.append(f'<line class="base-line" x1="{_n(sx(base))}" y1="{_n(top)}" x2="{_n(sx(base))}" y2="{_n(axis_y)}" stroke="#888888" stroke-dasharray="4,3"/>')
    out.append(_text(sx(base), axis_y + 20, f"E(f(x)) = {base:.2f}", anchor="middle", cls="base-label"))
    out.append(f'<line class="final-line" x1="{_n(sx(final))}" y1="{_n(top - 8)}" x2="{_n(sx(final))}" y2="{_n(top + plot_h)}" stroke="#888888" stroke-dasharray="4,3"/>')
    out.append(_text(sx(final), top - 14, f"f(x) = {exp.explained_value:.2f}", anchor="middle", cls="final-label"))

    for i, r in enumerate(rows):
        y = top + i * row_h + (row_h - bar_h) / 2
        x0, x1 = sx(min(r.start, r.end)), sx(max(r.start, r.end))
        color = _KIND_COLOR[r.kind]
        out.append(
            f'<rect class="bar {r.kind}" x="{_n(x0)}" y="{_n(y)}" width="{_n(x1 - x0)}" height="{_n(bar_h)}" '
            f'fill="{color}"><title>{escape(r.label)}: {_signed(r.phi)}</title></rect>'
        )
        if i + 1 < len(rows):
            ny = top + (i + 1) * row_h + (row_h - bar_h) / 2
            out.append(f'<line class="connector" x1="{_n(sx(r.start))}" y1="{_n(y + bar_h)}" x2="{_n(sx(r.start))}" y2="{_n(ny)}" stroke="#bbbbbb" stroke-width="1"/>')
        cy = y + bar_h / 2 + 4
        out.append(_text(left - 8, cy, r.label, anchor="end", cls="feature-label"))
        if r.phi >= 0:
            out.append(_text(x1 + 4, cy, _signed(r.phi), anchor="start", cls="phi-label", fill=color))
        else:
            out.append(_text(x0 - 4, cy, _signed(r.phi), anchor="end", cls="phi-label", fill=color))
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class OhlcPlotSpec:
    bars: Sequence[OhlcvBar]
    actions: Mapping[dt.date, int] = field(default_factory=dict)
    ticker: str = ""
    width: int = 800
    height: int = 600
    max_ticks: int = 8


def render_ohlc(spec: OhlcPlotSpec) -> str:
    bars = list(spec.bars)
    if not bars:
        raise UsageError("cannot draw an OHLC chart of an empty range")
    positions = {b.date: i for i, b in enumerate(bars)}
    unknown = [d for d in spec.actions if d not in positions]
    if unknown:
        raise UsageError(f"action dated {unknown[0].isoformat()} is outside the plotted range")

    w, h = spec.width, spec.height
    left, right, top, bottom = 70.0, 20.0, 50.0, 60.0
    plot_w, plot_h = w - left - right, h - top - bottom
    lo = min(b.low for b in bars)
    hi = max(b.high for b in bars)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.1 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    slot = plot_w / len(bars)
    body_w = max(0.6 * slot, 1.0)
    marker = min(0.45 * slot, 8.0) + 2.0

    def sy(p: float) -> float:
        return top + (hi - p) / (hi - lo) * plot_h

    def cx(i: int) -> float:
        return left + (i + 0.5) * slot

    out = _svg_open(w, h)
    title = f"{spec.ticker} {bars[0].date.isoformat()} to {bars[-1].date.isoformat()}".strip()
    out.append(_text(w / 2, 24, title, anchor="middle", size=15, cls="title"))
    out.append(f'<line class="axis" x1="{_n(left)}" y1="{_n(top + plot_h)}" x2="{_n(left + plot_w)}" y2="{_n(top + plot_h)}" stroke="#333333"/>')
    out.append(f'<line class="axis" x1="{_n(left)}" y1="{_n(top)}" x2="{_n(left)}" y2="{_n(top + plot_h)}" stroke="#333333"/>')
    for k in range(5):
        p = lo + (hi - lo) * k / 4
        out.append(_text(left - 6, sy(p) + 4, f"{p:.2f}", anchor="end", size=11, cls="price-tick"))

    n_ticks = min(spec.max_ticks, len(bars))
    tick_idx = sorted({round(k * (len(bars) - 1) / max(n_ticks - 1, 1)) for k in range(n_ticks)})
    for i in tick_idx:
        out.append(f'<line class="tick" x1="{_n(cx(i))}" y1="{_n(top + plot_h)}" x2="{_n(cx(i))}" y2="{_n(top + plot_h + 5)}" stroke="#333333"/>')
        out.append(_text(cx(i), top + plot_h + 20, bars[i].date.isoformat(), anchor="middle", size=10, cls="date-tick"))

    for i, b in enumerate(bars):
        x = cx(i)
        color = UP_CANDLE if b.close >= b.open else DOWN_CANDLE
        out.append('<g class="candle">')
        out.append(f'<line class="wick" x1="{_n(x)}" y1="{_n(sy(b.high))}" x2="{_n(x)}" y2="{_n(sy(b.low))}" stroke="{color}"/>')
        if b.open == b.close:
            out.append(f'<line class="body doji" x1="{_n(x - body_w / 2)}" y1="{_n(sy(b.close))}" x2="{_n(x + body_w / 2)}" y2="{_n(sy(b.close))}" stroke="{color}" stroke-width="1.5"/>')
        else:
            y0, y1 = sy(max(b.open, b.close)), sy(min(b.open, b.close))
            out.append(f'<rect class="body" x="{_n(x - body_w / 2)}" y="{_n(y0)}" width="{_n(body_w)}" height="{_n(y1 - y0)}" fill="{color}"/>')
        out.append("</g>")

    for d in sorted(spec.actions):
        i = positions[d]
        b = bars[i]
        x = cx(i)
        action = spec.actions[d]
        if action == 1:
            tip = sy(b.low) + 4
            pts = [(x, tip), (x - marker / 2, tip + marker), (x + marker / 2, tip + marker)]
            cls, color = "marker buy", BUY_COLOR
        elif action == 0:
            tip = sy(b.high) - 4
            pts = [(x, tip), (x - marker / 2, tip - marker), (x + marker / 2, tip - marker)]
            cls, color = "marker sell", SELL_COLOR
        else:
            raise UsageError(f"unknown action {action!r} on {d.isoformat()}")
        points = " ".join(f"{_n(px)},{_n(py)}" for px, py in pts)
        out.append(f'<polygon class={quoteattr(cls)} points="{points}" fill="{color}"><title>{d.isoformat()} {ACTION_NAMES[action]}</title></polygon>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
