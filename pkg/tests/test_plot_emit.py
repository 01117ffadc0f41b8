import datetime as dt
import os
import re
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from xrltrade import fixture_path
from xrltrade.dqn import evaluate
from xrltrade.errors import UsageError
from xrltrade.explainer import DayAttribution, Explainer, ExplainMethod, Explanation, condense
from xrltrade.market_data import DEFAULT_SPLIT, OhlcvBar, SplitSpec, clean_and_sort, read_csv, split_by_date
from xrltrade.neural_net import init_network
from xrltrade.plot_emit import (
    BUY_COLOR,
    REMAINDER_COLOR,
    SELL_COLOR,
    OhlcPlotSpec,
    WaterfallSpec,
    ohlc_filename,
    render_ohlc,
    render_waterfall,
    waterfall_filename,
)
from xrltrade.trading_env import EnvConfig, Normalizer

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("XRLTRADE_REGEN_GOLDEN") == "1"
SVG = "{http://www.w3.org/2000/svg}"


def check_golden(name: str, text: str) -> None:
    path = GOLDEN / name
    if REGEN:
        path.parent.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    assert path.read_text(encoding="utf-8") == text


def explanation_from(phis, actions=None, base=0.0):
    actions = actions or [i % 2 for i in range(len(phis))]
    entries = tuple(
        DayAttribution(i, dt.date(2022, 1, 3) + dt.timedelta(days=i), a, 0.0, float(p))
        for i, (p, a) in enumerate(zip(phis, actions))
    )
    f = base + float(np.sum(phis))
    return Explanation("TEST", dt.date(2022, 3, 1), 60, 1, f, base, entries, "exact", None, None)


def parse(svg: str) -> ET.Element:
    root = ET.fromstring(svg.encode("utf-8"))
    assert root.tag == SVG + "svg"
    assert re.fullmatch(r"0 0 \d+ \d+", root.get("viewBox"))
    return root


def bars(root):
    return [r for r in root.iter(SVG + "rect") if (r.get("class") or "").startswith("bar")]


@pytest.fixture(scope="module")
def fixture_parts():
    series = clean_and_sort(read_csv(fixture_path(), "SYNTH"))
    split = SplitSpec(dt.date(2019, 1, 1), DEFAULT_SPLIT.train_end, DEFAULT_SPLIT.test_start, DEFAULT_SPLIT.test_end)
    return split_by_date(series, split)


@pytest.fixture(scope="module")
def fixture_explanation(fixture_parts):
    train, test = fixture_parts
    env = EnvConfig(30, normalizer=Normalizer.fit(train))
    net = init_network(120, 7)
    record = evaluate(net, test, env)
    ex = Explainer.from_training(net, train, test, record, env)
    return ex.explain_instance(ex.first_index, ExplainMethod(samples=200, seed=0))


# ---- waterfall -------------------------------------------------------------


def test_fixture_waterfall_matches_golden(fixture_explanation):
    svg = render_waterfall(WaterfallSpec(condense(fixture_explanation, 10)))
    check_golden("SYNTH_waterfall.svg", svg)


def test_fixture_waterfall_structure(fixture_explanation):
    exp = fixture_explanation
    c = condense(exp, 10)
    root = parse(render_waterfall(WaterfallSpec(c)))
    drawn = bars(root)
    assert len(drawn) == 11
    for rect, entry in zip(drawn, c.top):
        kind = "buy" if entry.action == 1 else "sell"
        assert rect.get("class") == f"bar {kind}"
        assert rect.get("fill") == (BUY_COLOR if kind == "buy" else SELL_COLOR)
    assert drawn[-1].get("class") == "bar remainder" and drawn[-1].get("fill") == REMAINDER_COLOR
    texts = [t.text for t in root.iter(SVG + "text")]
    assert "20 other features" in texts
    assert f"E(f(x)) = {exp.base_value:.2f}" in texts
    assert f"f(x) = {exp.explained_value:.2f}" in texts
    a = c.top[0]
    assert f"Feature {a.feature_index} = {a.date.isoformat()} ({'buy' if a.action else 'sell'})" in texts


def test_rows_run_from_base_to_explained_value(fixture_explanation):
    spec = WaterfallSpec(condense(fixture_explanation, 10))
    rows = spec.rows()
    assert rows[-1].start == fixture_explanation.base_value
    for upper, lower in zip(rows, rows[1:]):
        assert upper.start == lower.end
    assert abs(spec.final_value() - fixture_explanation.explained_value) < 1e-9
    widths = sum(r.end - r.start for r in rows)
    assert abs(widths - (fixture_explanation.explained_value - fixture_explanation.base_value)) < 1e-9


def test_one_bar_geometry():
    svg = render_waterfall(WaterfallSpec(condense(explanation_from([1.0], [1]), 10), 800, 600))
    root = parse(svg)
    (rect,) = bars(root)
    # value axis spans [0, 1] padded by 8% each side over the 800 * (1 - 0.38 - 0.06) = 448 px plot
    left, plot_w = 0.38 * 800, 800 * (1 - 0.38 - 0.06)
    px = plot_w / 1.16
    assert float(rect.get("x")) == pytest.approx(left + 0.08 * px, abs=1e-3)
    assert float(rect.get("width")) == pytest.approx(px, abs=1e-3)
    texts = [t.text for t in root.iter(SVG + "text")]
    assert "f(x) = 1.00" in texts and "E(f(x)) = 0.00" in texts and "+1.00" in texts


def test_all_zero_phis_give_zero_width_bars():
    root = parse(render_waterfall(WaterfallSpec(condense(explanation_from([0.0] * 5, base=2.0), 10))))
    assert [float(r.get("width")) for r in bars(root)] == [0.0] * 5
    texts = [t.text for t in root.iter(SVG + "text")]
    assert "E(f(x)) = 2.00" in texts and "f(x) = 2.00" in texts


def test_negative_phi_label_two_decimals():
    root = parse(render_waterfall(WaterfallSpec(condense(explanation_from([-0.456, 0.004]), 10))))
    texts = [t.text for t in root.iter(SVG + "text")]
    assert "-0.46" in texts and "+0.00" in texts


def test_degenerate_waterfall_rejected():
    empty = Explanation("T", dt.date(2022, 1, 1), 0, 0, 1.0, 1.0, (), "exact", None, None)
    with pytest.raises(UsageError):
        render_waterfall(WaterfallSpec(condense(empty, 10)))


def test_waterfall_is_pure(fixture_explanation):
    spec = WaterfallSpec(condense(fixture_explanation, 10))
    assert render_waterfall(spec) == render_waterfall(spec)


def test_labels_are_escaped():
    exp = explanation_from([1.0])
    exp = Explanation("A&B<", exp.instance_date, 0, 1, 1.0, 0.0, exp.attributions, "exact", None, None)
    parse(render_waterfall(WaterfallSpec(condense(exp, 10))))


# ---- OHLC ------------------------------------------------------------------


def bar(day, o, h, l, c):
    return OhlcvBar(dt.date(2022, 1, day), o, h, l, c, 100)


FIVE = [bar(3, 10, 12, 9, 11), bar(4, 11, 11.5, 10, 10.2), bar(5, 10.2, 10.8, 9.7, 10.2),
        bar(6, 10.2, 13, 10, 12.5), bar(7, 12.5, 12.6, 11, 11.4)]


def test_five_candles_two_markers():
    svg = render_ohlc(OhlcPlotSpec(FIVE, {FIVE[1].date: 1, FIVE[3].date: 0}, ticker="TEST"))
    root = parse(svg)
    candles = [g for g in root.iter(SVG + "g") if g.get("class") == "candle"]
    markers = list(root.iter(SVG + "polygon"))
    assert len(candles) == 5 and len(markers) == 2
    assert [m.get("class") for m in markers] == ["marker buy", "marker sell"]
    check_golden("TEST_ohlc.svg", svg)


def test_marker_direction_and_placement():
    root = parse(render_ohlc(OhlcPlotSpec(FIVE, {FIVE[1].date: 1, FIVE[3].date: 0})))
    buy, sell = root.iter(SVG + "polygon")
    by = [float(p.split(",")[1]) for p in buy.get("points").split()]
    sy = [float(p.split(",")[1]) for p in sell.get("points").split()]
    assert by[0] < by[1] == by[2]  # tip on top: points upward (svg y grows downward)
    assert sy[0] > sy[1] == sy[2]
    wicks = [l for l in root.iter(SVG + "line") if l.get("class") == "wick"]
    assert by[0] > float(wicks[1].get("y2"))  # below the low
    assert sy[0] < float(wicks[3].get("y1"))  # above the high


def test_candle_colors():
    root = parse(render_ohlc(OhlcPlotSpec(FIVE)))
    bodies = [e for g in root.iter(SVG + "g") for e in g if "body" in e.get("class")]
    colors = [b.get("fill") or b.get("stroke") for b in bodies]
    assert colors == ["#26a69a", "#ef5350", "#26a69a", "#26a69a", "#ef5350"]


def test_doji_is_a_line():
    root = parse(render_ohlc(OhlcPlotSpec([bar(3, 10, 11, 9, 10)])))
    (g,) = [g for g in root.iter(SVG + "g") if g.get("class") == "candle"]
    body = [e for e in g if "body" in e.get("class")][0]
    assert body.tag == SVG + "line" and body.get("class") == "body doji"
    assert body.get("y1") == body.get("y2")


def test_flat_series_renders():
    parse(render_ohlc(OhlcPlotSpec([bar(3, 10, 10, 10, 10), bar(4, 10, 10, 10, 10)])))


def test_ohlc_errors():
    with pytest.raises(UsageError):
        render_ohlc(OhlcPlotSpec([]))
    with pytest.raises(UsageError):
        render_ohlc(OhlcPlotSpec(FIVE, {dt.date(2021, 1, 1): 1}))
    with pytest.raises(UsageError):
        render_ohlc(OhlcPlotSpec(FIVE, {FIVE[0].date: 2}))


def test_date_ticks_capped():
    many = [
        OhlcvBar(dt.date(2022, 1, 1) + dt.timedelta(days=i), 10, 11, 9, 10.5, 1) for i in range(40)
    ]
    root = parse(render_ohlc(OhlcPlotSpec(many, max_ticks=8)))
    ticks = [t for t in root.iter(SVG + "text") if t.get("class") == "date-tick"]
    assert len(ticks) == 8
    assert ticks[0].text == "2022-01-01" and ticks[-1].text == "2022-02-09"


def test_filenames():
    assert waterfall_filename("SBIN", dt.date(2022, 1, 3)) == "SBIN_2022-01-03_waterfall.svg"
    assert ohlc_filename("SBIN", dt.date(2021, 6, 1), dt.date(2022, 6, 21)) == "SBIN_2021-06-01_2022-06-21_ohlc.svg"
