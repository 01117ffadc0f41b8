"""
Training a DQN trader and backtesting it
========================================

Uses the bundled synthetic OHLCV file. Training runs on the days up to
2021-05-31 and the greedy policy is then replayed on the later days.
"""

# %%
# Load, clean and split the series.
from xrltrade import fixture_path
from xrltrade.dqn import TrainConfig, evaluate, train
from xrltrade.market_data import DEFAULT_SPLIT, clean_and_sort, read_csv, split_by_date
from xrltrade.trading_env import EnvConfig

series = clean_and_sort(read_csv(fixture_path(), "SYNTH"))
train_part, test_part = split_by_date(series, DEFAULT_SPLIT)
print(f"{len(train_part)} training days, {len(test_part)} test days")

# %%
# Train with the default hyperparameters: 30 episodes, 100 Adam steps after
# each, a target network refreshed every 100 steps.
result = train(train_part, EnvConfig(window_size=30), TrainConfig(seed=0))
for row in result.log[::10]:
    print(f"episode {row.episode:2d}  epsilon {row.epsilon:.3f}  loss {row.mean_loss:.4f}  "
          f"greedy reward {row.greedy_reward:8.2f}")

# %%
# Greedy backtest on the unseen days. Observations are normalized with the
# constants fitted on the training days.
record = evaluate(result.net, test_part, result.env_config)
buys = sum(record.actions)
print(f"{len(record.actions)} decisions, {buys} buys, cumulative reward {record.cumulative_reward:.2f}")

# %%
# The agent sees prices only, not whether it currently holds the stock, so
# a positive backtest is not guaranteed. Compare with doing nothing.
from xrltrade.trading_env import run_policy

_, _, idle = run_policy(test_part, result.env_config.resolve(test_part), lambda obs: 0)
print("never buying earns", idle)
