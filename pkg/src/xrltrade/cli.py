"""Command-line pipeline: ingest -> train -> backtest -> explain.

Every command reads the same config file and writes into ``output_dir``;
outputs are overwritten byte-identically when inputs and seed are unchanged.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import sys
from pathlib import Path

from . import market_data
from .config import RunConfig, load_config
from .dqn import evaluate, train
from .errors import DataError, NumericError, UsageError, XrlError
from .explainer import Explainer, condense, guidance
from .neural_net import load_weights, save_weights
from .plot_emit import OhlcPlotSpec, WaterfallSpec, ohlc_filename, render_ohlc, render_waterfall, waterfall_filename
from .trading_env import EnvConfig

log = logging.getLogger(__name__)


class Paths:
    def __init__(self, cfg: RunConfig):
        self.root = Path(cfg.output_dir)
        t = cfg.ticker_name
        self.train = self.root / f"{t}_train.csv"
        self.test = self.root / f"{t}_test.csv"
        self.weights = self.root / f"{t}_weights.bin"
        self.train_log = self.root / f"{t}_train_log.csv"
        self.backtest = self.root / f"{t}_backtest.csv"


def _write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data, encoding="utf-8", newline="\n")


def _read_partition(path: Path, ticker: str) -> market_data.PriceSeries:
    if not path.exists():
        raise UsageError(f"{path} not found; run the ingest command first")
    return market_data.read_csv(path, ticker)


def cmd_ingest(cfg: RunConfig, out=None) -> dict:
    out = sys.stdout if out is None else out
    path = Path(cfg.data)
    if not cfg.data:
        raise UsageError("no data file configured (set 'data' in the config)")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read data file {path}: {exc.strerror}") from None
    raw = market_data.parse_csv(text, cfg.ticker_name)
    if len(raw) == 0:
        raise DataError(f"empty series: {path} has a header but no rows")
    clean = market_data.clean_and_sort(raw)
    if len(clean) == 0:
        raise DataError(f"empty series: every row of {path} was dropped during cleaning")
    train_part, test_part = market_data.split_by_date(clean, cfg.split())
    paths = Paths(cfg)
    _write(paths.train, market_data.to_csv(train_part))
    _write(paths.test, market_data.to_csv(test_part))
    summary = {
        "rows": len(raw),
        "dropped": len(raw) - len(clean),
        "clean": len(clean),
        "train": len(train_part),
        "test": len(test_part),
    }
    print(
        f"{cfg.ticker_name}: {summary['rows']} rows, {summary['dropped']} dropped, "
        f"train {summary['train']}, test {summary['test']}",
        file=out,
    )
    return summary


def cmd_train(cfg: RunConfig, out=None):
    out = sys.stdout if out is None else out
    paths = Paths(cfg)
    train_part = _read_partition(paths.train, cfg.ticker_name)
    result = train(train_part, EnvConfig(cfg.window_size), cfg.train_config())
    _write(paths.weights, save_weights(result.net, result.env_config.normalizer))
    _write(paths.train_log, result.log_csv())
    if result.log:
        last = result.log[-1]
        print(
            f"{cfg.ticker_name}: final epsilon {last.epsilon:.4f}, cumulative reward {last.cumulative_reward:.4f}, "
            f"greedy reward {last.greedy_reward:.4f}",
            file=out,
        )
    else:
        print(f"{cfg.ticker_name}: 0 episodes, weights left at initialization", file=out)
    return result


def _load_model(cfg: RunConfig):
    paths = Paths(cfg)
    if not paths.weights.exists():
        raise UsageError(f"{paths.weights} not found; run the train command first")
    net, normalizer = load_weights(paths.weights.read_bytes(), expected_input_dim=4 * cfg.window_size)
    return net, EnvConfig(cfg.window_size, normalizer=normalizer)


def cmd_backtest(cfg: RunConfig, out=None):
    out = sys.stdout if out is None else out
    paths = Paths(cfg)
    net, env_config = _load_model(cfg)
    test_part = _read_partition(paths.test, cfg.ticker_name)
    record = evaluate(net, test_part, env_config)
    _write(paths.backtest, record.to_csv())
    bars = test_part.bars
    actions = dict(zip(record.dates, record.actions))
    svg = render_ohlc(OhlcPlotSpec(bars, actions, ticker=cfg.ticker_name))
    _write(paths.root / ohlc_filename(cfg.ticker_name, bars[0].date, bars[-1].date), svg)
    print(f"{cfg.ticker_name}: {len(record.actions)} trading days, cumulative reward {record.cumulative_reward:.4f}", file=out)
    return record


def cmd_explain(
    cfg: RunConfig,
    date: dt.date | None = None,
    start: dt.date | None = None,
    end: dt.date | None = None,
    jobs: int = 1,
    out=None,
):
    out = sys.stdout if out is None else out
    paths = Paths(cfg)
    net, env_config = _load_model(cfg)
    train_part = _read_partition(paths.train, cfg.ticker_name)
    test_part = _read_partition(paths.test, cfg.ticker_name)
    record = evaluate(net, test_part, env_config)
    explainer = Explainer.from_training(net, train_part, test_part, record, env_config)
    method = cfg.explain_method()

    if date is not None:
        try:
            t = test_part.index_of(date)
        except KeyError:
            raise UsageError(f"{date.isoformat()} is not a trading day in the test partition") from None
        explanations = [explainer.explain_instance(t, method)]
        stem = date.isoformat()
    else:
        explanations = explainer.explain_range(start, end, method, n_jobs=jobs)
        stem = f"{explanations[0].instance_date.isoformat()}_{explanations[-1].instance_date.isoformat()}"

    lines = []
    for exp in explanations:
        gap = abs(exp.reconstructed() - exp.explained_value)
        if gap > 1e-9 * max(1.0, abs(exp.explained_value)):
            raise NumericError(f"{exp.instance_date}: attributions miss f(x) by {gap:.3g}")
        lines.append(exp.to_json())
        svg = render_waterfall(WaterfallSpec(condense(exp, cfg.top_k)))
        _write(paths.root / waterfall_filename(cfg.ticker_name, exp.instance_date), svg)
        print(
            f"{exp.instance_date.isoformat()} f(x)={exp.explained_value:.3f} E(f(x))={exp.base_value:.3f} "
            f"{exp.label.value}: {guidance(exp.label, exp.explained_action, cfg.ticker_name, exp.instance_date)}",
            file=out,
        )
    _write(paths.root / f"{cfg.ticker_name}_{stem}_explanations.jsonl", "\n".join(lines) + "\n")
    return explanations


def _date_arg(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key = value run configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for per-date explanation")
    common.add_argument("--method", choices=["exact", "perm"], help="attribution method")
    common.add_argument("--samples", type=int, help="permutation samples per explanation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="xrltrade", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse, clean and split the OHLCV file")
    sub.add_parser("train", parents=[common], help="train the DQN agent on the training partition")
    sub.add_parser("backtest", parents=[common], help="greedy run over the test partition plus OHLC chart")
    p = sub.add_parser("explain", parents=[common], help="Shapley waterfalls for test dates")
    p.add_argument("--date", type=_date_arg)
    p.add_argument("--from", dest="start", type=_date_arg)
    p.add_argument("--to", dest="end", type=_date_arg)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "samples") if getattr(args, k) is not None}
        if args.method is not None:
            overrides["method"] = args.method
        if overrides:
            cfg = cfg.replace(**overrides)
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "backtest":
            cmd_backtest(cfg)
        else:
            if args.date is not None and (args.start or args.end):
                raise UsageError("--date cannot be combined with --from/--to")
            cmd_explain(cfg, args.date, args.start, args.end, jobs=args.jobs)
    except XrlError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error[E_IO]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
