"""Deep Q-learning: epsilon-greedy rollouts, uniform replay, frozen target network."""

from __future__ import annotations

import csv
import io
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError
from .market_data import PriceSeries
from .neural_net import AdamState, QNetwork, adam_step, backward, copy_parameters, forward, init_network
from .trading_env import BacktestRecord, EnvConfig, TradingEnv, run_policy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Bounded FIFO of transitions; the oldest entry is evicted when full."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ConfigError("replay capacity must be positive")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def append(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < batch_size:
            raise UsageError(f"buffer holds {len(self._items)} transitions, need {batch_size}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.995
    epsilon_schedule: str = "episode"  # decay once per "episode" or after every environment "step"
    learning_rate: float = 0.005
    batch_size: int = 32
    hidden_units: int = 50
    epochs: int = 100  # gradient steps after each episode's rollout
    episodes: int = 30
    target_sync: int = 100  # gradient steps between target-network syncs
    replay_capacity: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 < self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ConfigError("need 0 < epsilon_min <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if self.epsilon_schedule not in ("episode", "step"):
            raise ConfigError(f"epsilon_schedule must be 'episode' or 'step', got {self.epsilon_schedule!r}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        for name in ("batch_size", "hidden_units", "target_sync", "replay_capacity"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("epochs", "episodes"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


def select_action(net: QNetwork, observation, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; greedy ties go to action 0."""
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(2))
    q = forward(net, observation)
    return int(np.argmax(q))  # argmax returns the first maximum


def bellman_target(transition: Transition, target_net: QNetwork, gamma: float) -> float:
    if transition.done:
        return float(transition.reward)
    q_next = forward(target_net, transition.next_state)
    return float(transition.reward + gamma * np.max(q_next))


def bellman_targets(batch: list[Transition], target_net: QNetwork, gamma: float) -> np.ndarray:
    """Vectorized :func:`bellman_target`; terminal rows never touch the target network."""
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    live = np.array([not t.done for t in batch])
    targets = rewards.copy()
    if live.any():
        nxt = np.stack([t.next_state for t, keep in zip(batch, live) if keep])
        targets[live] += gamma * forward(target_net, nxt).max(axis=1)
    return targets


@dataclass
class EpisodeLog:
    episode: int
    epsilon: float
    mean_loss: float
    cumulative_reward: float  # earned by the epsilon-greedy exploration pass
    greedy_reward: float  # earned by the greedy policy after this episode's updates


@dataclass
class TrainResult:
    net: QNetwork
    target_net: QNetwork
    env_config: EnvConfig  # window size plus the fitted normalizer, no episode bounds
    log: list[EpisodeLog] = field(default_factory=list)
    gradient_steps: int = 0
    sync_steps: list[int] = field(default_factory=list)

    def log_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["episode", "epsilon", "mean_loss", "cumulative_reward", "greedy_reward"])
        for row in self.log:
            writer.writerow([row.episode, repr(row.epsilon), repr(row.mean_loss),
                             repr(row.cumulative_reward), repr(row.greedy_reward)])
        return out.getvalue()


def train(series: PriceSeries, env_config: EnvConfig = EnvConfig(), config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train one agent on ``series``; bit-for-bit reproducible for a fixed seed.

    Each episode is a full epsilon-greedy pass over the series, after which
    ``config.epochs`` minibatch Adam steps are taken against the frozen target
    network. Epsilon decays once per episode unless ``epsilon_schedule`` is
    ``"step"``; the log records the value in force at the end of the episode's rollout.
    """
    env = TradingEnv(series, env_config)
    net = init_network(env.config.input_dim, config.seed, hidden=config.hidden_units)
    target_net = copy_parameters(net)
    opt = AdamState.for_network(net, learning_rate=config.learning_rate)
    buffer = ReplayBuffer(config.replay_capacity)
    # separate stream from the initializer so changing one never shifts the other
    rng = np.random.default_rng([config.seed, 1])

    eval_config = EnvConfig(env.config.window_size, normalizer=env.config.normalizer)
    result = TrainResult(net=net, target_net=target_net, env_config=eval_config)
    epsilon = config.epsilon_start
    for episode in range(1, config.episodes + 1):
        state, obs = env.reset()
        done = False
        while not done:
            action = select_action(net, obs, epsilon, rng)
            state, next_obs, reward, done = env.step(state, action)
            buffer.append(Transition(obs, action, reward, next_obs, done))
            obs = next_obs
            if config.epsilon_schedule == "step":
                epsilon = max(config.epsilon_min, epsilon * config.epsilon_decay)

        if len(buffer) < config.batch_size:
            raise ConfigError(
                f"replay buffer holds {len(buffer)} transitions after episode {episode}, "
                f"fewer than batch size {config.batch_size}; use a longer training range"
            )
        losses = []
        for _ in range(config.epochs):
            batch = buffer.sample(config.batch_size, rng)
            targets = bellman_targets(batch, target_net, config.gamma)
            states = np.stack([t.state for t in batch])
            actions = np.array([t.action for t in batch])
            loss, grads = backward(net, states, actions, targets)
            adam_step(net, opt, grads)
            losses.append(loss)
            result.gradient_steps += 1
            if result.gradient_steps % config.target_sync == 0:
                target_net = copy_parameters(net)
                result.sync_steps.append(result.gradient_steps)

        mean_loss = float(np.mean(losses)) if losses else 0.0
        _, _, greedy_reward = run_policy(series, env.config, lambda o: int(np.argmax(forward(net, o))))
        result.log.append(EpisodeLog(episode, epsilon, mean_loss, state.cumulative_reward, greedy_reward))
        log.info("episode %d: eps=%.4f loss=%.6g reward=%.4f greedy=%.4f",
                 episode, epsilon, mean_loss, state.cumulative_reward, greedy_reward)
        if config.epsilon_schedule == "episode":
            epsilon = max(config.epsilon_min, epsilon * config.epsilon_decay)

    result.target_net = target_net
    return result


def evaluate(net: QNetwork, series: PriceSeries, env_config: EnvConfig) -> BacktestRecord:
    """Greedy backtest; ``env_config.normalizer`` must hold the training constants."""
    if env_config.normalizer is None:
        raise UsageError("evaluation needs the normalization constants fitted on the training data")
    resolved = env_config.resolve(series)
    if resolved.input_dim != net.input_dim:
        raise UsageError(f"network input_dim {net.input_dim} does not match window {resolved.window_size}")
    q_rows = []

    def greedy(obs):
        q = forward(net, obs)
        q_rows.append(q)
        return int(np.argmax(q))

    actions, rewards, _ = run_policy(series, resolved, greedy)
    cumulative = []
    total = 0.0
    for r in rewards:
        total += r
        cumulative.append(total)
    dates = series.dates[resolved.start_index : resolved.end_index]
    return BacktestRecord(
        ticker=series.ticker,
        dates=dates,
        actions=actions,
        rewards=rewards,
        cumulative_rewards=cumulative,
        q_values=np.array(q_rows).reshape(-1, 2),
        start_index=resolved.start_index,
        end_index=resolved.end_index,
        window_size=resolved.window_size,
    )
