"""Per-day Shapley explanations of a trained agent's Q-value for the action it took.

Players are the days of the observation window: masking a day replaces its
four normalized prices with the training-mean background. Feature ``i`` is the
``(window - i)``-th most recent day, so feature 0 is the oldest day in the window.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, UsageError
from .market_data import PriceSeries
from .neural_net import QNetwork, forward
from .shapley_core import MAX_EXACT_PLAYERS, exact_shapley, make_masking_oracle, permutation_shapley
from .trading_env import N_CHANNELS, BacktestRecord, EnvConfig, TradingEnv


class DecisionLabel(enum.Enum):
    PROFIT = "profit"
    LOSS = "loss"
    NEUTRAL = "neutral"


def label_decision(explained_value: float, base_value: float) -> DecisionLabel:
    if explained_value > base_value:
        return DecisionLabel.PROFIT
    if explained_value < base_value:
        return DecisionLabel.LOSS
    return DecisionLabel.NEUTRAL


ACTION_NAMES = {0: "sell", 1: "buy"}


def guidance(label: DecisionLabel, action: int, ticker: str, date: dt.date) -> str:
    """One-line trader guidance following the profit/loss convention."""
    verb = ACTION_NAMES[action]
    when = date.isoformat()
    if label is DecisionLabel.PROFIT:
        return f"f(x) > E(f(x)): the {verb} action results in profit; consider {verb}ing {ticker} on {when}"
    if label is DecisionLabel.LOSS:
        return f"f(x) < E(f(x)): the {verb} action results in loss; do not {verb} {ticker} on {when}"
    return f"f(x) = E(f(x)): the {verb} action on {when} is neither profit nor loss"


@dataclass(frozen=True)
class ExplainMethod:
    kind: str = "permutation"  # "exact" or "permutation"
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exact", "permutation"):
            raise UsageError(f"unknown explanation method {self.kind!r}")
        if self.kind == "permutation" and self.samples < 1:
            raise UsageError("samples must be >= 1")


@dataclass(frozen=True)
class DayAttribution:
    feature_index: int
    date: dt.date
    action: int
    reward: float
    phi: float


@dataclass(frozen=True)
class Explanation:
    ticker: str
    instance_date: dt.date
    bar_index: int
    explained_action: int
    explained_value: float
    base_value: float
    attributions: tuple[DayAttribution, ...]
    method: str
    samples: int | None
    seed: int | None
    mean_prediction: float | None = None

    @property
    def phis(self) -> np.ndarray:
        return np.array([a.phi for a in self.attributions])

    @property
    def label(self) -> DecisionLabel:
        return label_decision(self.explained_value, self.base_value)

    def reconstructed(self) -> float:
        return math.fsum([self.base_value, *(a.phi for a in self.attributions)])

    def to_dict(self) -> dict:
        return {
            "ticker": self.ticker,
            "date": self.instance_date.isoformat(),
            "bar_index": self.bar_index,
            "action": self.explained_action,
            "f": self.explained_value,
            "base": self.base_value,
            "mean_prediction": self.mean_prediction,
            "label": self.label.value,
            "method": self.method,
            "samples": self.samples,
            "seed": self.seed,
            "entries": [
                {"feature": a.feature_index, "date": a.date.isoformat(), "action": a.action,
                 "reward": a.reward, "phi": a.phi}
                for a in self.attributions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Explanation":
        entries = tuple(
            DayAttribution(e["feature"], dt.date.fromisoformat(e["date"]), e["action"], e["reward"], e["phi"])
            for e in d["entries"]
        )
        return cls(
            ticker=d["ticker"],
            instance_date=dt.date.fromisoformat(d["date"]),
            bar_index=d.get("bar_index", -1),
            explained_action=d["action"],
            explained_value=d["f"],
            base_value=d["base"],
            attributions=entries,
            method=d["method"],
            samples=d["samples"],
            seed=d["seed"],
            mean_prediction=d.get("mean_prediction"),
        )


@dataclass(frozen=True)
class CondensedExplanation:
    explanation: Explanation
    top: tuple[DayAttribution, ...]
    remainder_count: int
    remainder_phi: float

    @property
    def displayed_total(self) -> float:
        return math.fsum([*(a.phi for a in self.top), self.remainder_phi])

    def reconstructed(self) -> float:
        """Correctly rounded base + displayed bars, as drawn in the waterfall."""
        return math.fsum([self.explanation.base_value, *(a.phi for a in self.top), self.remainder_phi])


def condense(explanation: Explanation, k: int = 10) -> CondensedExplanation:
    """Keep the ``k`` largest-magnitude days (older first on ties) and merge the rest."""
    if k < 1:
        raise UsageError("k must be positive")
    order = sorted(explanation.attributions, key=lambda a: (-abs(a.phi), a.feature_index))
    top, rest = tuple(order[:k]), order[k:]
    if not rest:
        return CondensedExplanation(explanation, top, 0, 0.0)
    # start from the correctly rounded sum of the dropped entries, then nudge it by
    # ulps so the displayed bars still add up to f(x) after rounding
    rest_phi = math.fsum(a.phi for a in rest)
    terms = [explanation.base_value, *(a.phi for a in top)]
    full = explanation.explained_value
    for attempt in range(64):
        gap = full - math.fsum([*terms, rest_phi])
        if gap == 0.0:
            break
        if attempt == 0:
            rest_phi += gap
        else:
            rest_phi = float(np.nextafter(rest_phi, np.inf if gap > 0 else -np.inf))
    return CondensedExplanation(explanation, top, len(rest), rest_phi)


def training_background(train_series: PriceSeries, env_config: EnvConfig) -> np.ndarray:
    """Per-coordinate mean of every observation window in the training partition."""
    env = TradingEnv(train_series, EnvConfig(env_config.window_size, normalizer=env_config.normalizer))
    w = env.window_size
    n = len(train_series)
    windows = np.stack([env.features[t - w : t].reshape(-1) for t in range(w, n + 1)])
    return windows.mean(axis=0)


def _derived_seed(seed: int, date: dt.date) -> int:
    return int(np.random.SeedSequence([seed, date.toordinal()]).generate_state(1)[0])


class Explainer:
    """Binds a trained network to one backtest so dates can be explained independently."""

    def __init__(
        self,
        net: QNetwork,
        series: PriceSeries,
        record: BacktestRecord,
        env_config: EnvConfig,
        background: np.ndarray,
    ):
        if env_config.normalizer is None:
            raise UsageError("explanations need the training normalization constants")
        self.net = net
        self.series = series
        self.record = record
        self.window = record.window_size
        self.env = TradingEnv(series, EnvConfig(self.window, normalizer=env_config.normalizer))
        self.background = np.asarray(background, dtype=np.float64)
        if self.background.shape != (net.input_dim,):
            raise UsageError(f"background length {self.background.size} != network input {net.input_dim}")
        self.groups = [list(range(N_CHANNELS * d, N_CHANNELS * (d + 1))) for d in range(self.window)]
        chosen = record.q_values[np.arange(len(record.actions)), record.actions]
        self.mean_prediction = float(np.mean(chosen)) if len(chosen) else None

    @classmethod
    def from_training(cls, net, train_series, test_series, record, env_config) -> "Explainer":
        return cls(net, test_series, record, env_config, training_background(train_series, env_config))

    @property
    def first_index(self) -> int:
        """Earliest bar whose whole window was traded by the agent."""
        return self.record.start_index + self.window

    def eligible_indices(self) -> range:
        return range(self.first_index, self.record.end_index)

    def _check_index(self, t: int) -> None:
        if t < self.first_index or t >= self.record.end_index:
            if t < self.first_index and self.first_index < len(self.series):
                earliest = self.series[self.first_index].date.isoformat()
                raise UsageError(f"bar {t} lacks a {self.window}-day traded history; earliest explainable date is {earliest}")
            raise UsageError(f"bar {t} is outside the explainable range")

    def explain_instance(self, t: int, method: ExplainMethod = ExplainMethod()) -> Explanation:
        self._check_index(t)
        k = self.record.step_of(t)
        action = self.record.actions[k]
        instance = self.env.observation(t)

        def predictor(x):
            return forward(self.net, x)[..., action]

        oracle = make_masking_oracle(predictor, instance, self.background, self.groups)
        date = self.series[t].date
        if method.kind == "exact":
            if self.window > MAX_EXACT_PLAYERS:
                raise CapacityError(
                    f"exact attribution over {self.window} days is infeasible; "
                    f"use a window of at most {MAX_EXACT_PLAYERS} or the permutation method"
                )
            result = exact_shapley(oracle)
            samples = seed = None
        else:
            seed = _derived_seed(method.seed, date)
            samples = method.samples
            result = permutation_shapley(oracle, samples, seed)

        attributions = []
        for i in range(self.window):
            day = t - self.window + i
            step = self.record.step_of(day)
            attributions.append(
                DayAttribution(
                    feature_index=i,
                    date=self.series[day].date,
                    action=self.record.actions[step],
                    reward=self.record.rewards[step],
                    phi=float(result.phis[i]),
                )
            )
        return Explanation(
            ticker=self.series.ticker,
            instance_date=date,
            bar_index=t,
            explained_action=action,
            explained_value=result.explained_value,
            base_value=result.base_value,
            attributions=tuple(attributions),
            method=method.kind,
            samples=samples,
            seed=seed,
            mean_prediction=self.mean_prediction,
        )

    def indices_between(self, start: dt.date | None, end: dt.date | None) -> list[int]:
        out = []
        for t in self.eligible_indices():
            d = self.series[t].date
            if (start is None or d >= start) and (end is None or d <= end):
                out.append(t)
        return out

    def explain_range(
        self,
        start: dt.date | None = None,
        end: dt.date | None = None,
        method: ExplainMethod = ExplainMethod(),
        n_jobs: int = 1,
    ) -> list[Explanation]:
        """One explanation per eligible date in ``[start, end]``, oldest first."""
        indices = self.indices_between(start, end)
        if not indices:
            earliest = self.series[self.first_index].date.isoformat() if self.first_index < len(self.series) else "none"
            raise UsageError(f"no explainable dates in the requested range (earliest explainable date is {earliest})")
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                return list(pool.map(lambda t: self.explain_instance(t, method), indices))
        return [self.explain_instance(t, method) for t in indices]
