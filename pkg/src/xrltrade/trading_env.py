"""Two-action stock trading MDP over a daily price series.

Action 0 sells (go Short), action 1 buys (go Long). A trade happens only when
the action differs from the held position; closing a Long position realizes
``close[t] - close[entry]`` as reward. Everything else pays zero.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .market_data import PriceSeries

N_CHANNELS = 4  # open, high, low, close


class Position(enum.IntEnum):
    SHORT = 0
    LONG = 1


@dataclass(frozen=True)
class Normalizer:
    """Per-channel min-max scaling fitted on the training partition."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64).reshape(N_CHANNELS)
        maxs = np.asarray(self.maxs, dtype=np.float64).reshape(N_CHANNELS)
        if not (np.all(np.isfinite(mins)) and np.all(np.isfinite(maxs))):
            raise ConfigError("normalization constants must be finite")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @classmethod
    def fit(cls, series: PriceSeries) -> "Normalizer":
        if len(series) == 0:
            raise ConfigError("cannot fit normalization on an empty series")
        ohlc = series.ohlc()
        return cls(ohlc.min(axis=0), ohlc.max(axis=0))

    def transform(self, ohlc: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        degenerate = span == 0
        scaled = (ohlc - self.mins) / np.where(degenerate, 1.0, span)
        return np.where(degenerate, 0.5, scaled)

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.maxs, other.maxs)


@dataclass(frozen=True)
class EnvConfig:
    window_size: int = 30
    start_index: int | None = None  # defaults to window_size
    end_index: int | None = None  # defaults to len(series)
    normalizer: Normalizer | None = None  # None: fit on the series being traded

    def resolve(self, series: PriceSeries) -> "EnvConfig":
        """Fill defaults against ``series`` and check the bounds."""
        n = len(series)
        if self.window_size < 1:
            raise ConfigError("window_size must be >= 1")
        if n < self.window_size + 1:
            raise ConfigError(
                f"series of {n} bars is too short for window_size {self.window_size} (need {self.window_size + 1})"
            )
        start = self.window_size if self.start_index is None else self.start_index
        end = n if self.end_index is None else self.end_index
        if start < self.window_size:
            raise ConfigError(f"start_index {start} < window_size {self.window_size}")
        if end > n:
            raise ConfigError(f"end_index {end} exceeds series length {n}")
        if end <= start:
            raise ConfigError(f"empty episode: start_index {start} >= end_index {end}")
        norm = self.normalizer if self.normalizer is not None else Normalizer.fit(series)
        return dataclasses.replace(self, start_index=start, end_index=end, normalizer=norm)

    @property
    def input_dim(self) -> int:
        return N_CHANNELS * self.window_size


@dataclass(frozen=True)
class EnvState:
    t: int
    position: Position
    last_trade_index: int
    cumulative_reward: float
    done: bool


class TradingEnv:
    """Holds the immutable per-series data; states are passed in and out."""

    def __init__(self, series: PriceSeries, config: EnvConfig = EnvConfig()):
        self.series = series
        self.config = config.resolve(series)
        self.closes = series.closes
        self.features = self.config.normalizer.transform(series.ohlc())

    @property
    def window_size(self) -> int:
        return self.config.window_size

    def observation(self, t: int) -> np.ndarray:
        """Flattened normalized OHLC of bars ``[t - window, t)``, oldest first."""
        w = self.config.window_size
        if t < w or t > len(self.series):
            raise UsageError(f"no full window ending before bar {t}")
        return self.features[t - w : t].reshape(-1).copy()

    def reset(self) -> tuple[EnvState, np.ndarray]:
        t = self.config.start_index
        state = EnvState(t=t, position=Position.SHORT, last_trade_index=t, cumulative_reward=0.0, done=False)
        return state, self.observation(t)

    def step(self, state: EnvState, action: int) -> tuple[EnvState, np.ndarray, float, bool]:
        if state.done:
            raise UsageError("episode is done; call reset()")
        if action not in (0, 1):
            raise UsageError(f"action must be 0 or 1, got {action!r}")
        t = state.t
        reward = 0.0
        last_trade = state.last_trade_index
        position = state.position
        if action != position:
            if position == Position.LONG:
                reward = float(self.closes[t] - self.closes[last_trade])
            position = Position(action)
            last_trade = t
        t += 1
        done = t == self.config.end_index
        new_state = EnvState(
            t=t,
            position=position,
            last_trade_index=last_trade,
            cumulative_reward=state.cumulative_reward + reward,
            done=done,
        )
        return new_state, self.observation(t), reward, done


def reset(series: PriceSeries, config: EnvConfig = EnvConfig()) -> tuple[EnvState, np.ndarray]:
    return TradingEnv(series, config).reset()


def step(state: EnvState, action: int, series: PriceSeries, config: EnvConfig = EnvConfig()):
    return TradingEnv(series, config).step(state, action)


def run_policy(
    series: PriceSeries,
    config: EnvConfig,
    policy: Callable[[np.ndarray], int],
) -> tuple[list[int], list[float], float]:
    """Play one full episode; returns (actions, rewards, cumulative_reward)."""
    env = TradingEnv(series, config)
    state, obs = env.reset()
    actions, rewards = [], []
    done = False
    while not done:
        action = int(policy(obs))
        state, obs, reward, done = env.step(state, action)
        actions.append(action)
        rewards.append(reward)
    return actions, rewards, state.cumulative_reward


def replay_actions(series: PriceSeries, config: EnvConfig, actions: Sequence[int]):
    """Run a recorded action script; its length must match the episode length."""
    it = iter(actions)

    def policy(_obs):
        try:
            return next(it)
        except StopIteration:
            raise UsageError("action script shorter than the episode") from None

    return run_policy(series, config, policy)


@dataclass
class BacktestRecord:
    """Per-step trace of a greedy run: index ``k`` is bar ``start_index + k``."""

    ticker: str
    dates: list
    actions: list[int]
    rewards: list[float]
    cumulative_rewards: list[float]
    q_values: np.ndarray  # (n_steps, 2)
    start_index: int
    end_index: int
    window_size: int

    @property
    def cumulative_reward(self) -> float:
        return self.cumulative_rewards[-1] if self.cumulative_rewards else 0.0

    @property
    def positions(self) -> list[Position]:
        # after a step the held position always equals the action taken
        return [Position(a) for a in self.actions]

    def step_of(self, bar_index: int) -> int:
        k = bar_index - self.start_index
        if not 0 <= k < len(self.actions):
            raise UsageError(f"bar {bar_index} was not traded in this backtest")
        return k

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["date", "action", "position", "reward", "cumulative_reward"])
        for d, a, r, c in zip(self.dates, self.actions, self.rewards, self.cumulative_rewards):
            writer.writerow([d.isoformat(), a, Position(a).name.lower(), repr(r), repr(c)])
        return out.getvalue()
