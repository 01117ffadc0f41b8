import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import series_from_closes
from xrltrade.errors import ConfigError, UsageError
from xrltrade.trading_env import (
    EnvConfig,
    Normalizer,
    Position,
    TradingEnv,
    replay_actions,
    run_policy,
)


def test_reset_window_covers_first_bars():
    s = series_from_closes(list(range(1, 41)))
    env = TradingEnv(s, EnvConfig(window_size=30, start_index=30))
    state, obs = env.reset()
    assert state.t == 30 and state.position is Position.SHORT and state.cumulative_reward == 0 and not state.done
    assert obs.shape == (120,)
    np.testing.assert_array_equal(obs, env.features[0:30].reshape(-1))
    # close channel of the last row is bar 29
    assert obs[-1] == pytest.approx((30 - 1) / (40 - 1))


def test_series_too_short():
    with pytest.raises(ConfigError):
        TradingEnv(series_from_closes([1.0] * 10), EnvConfig(window_size=30))


def test_constant_series_normalizes_to_half():
    env = TradingEnv(series_from_closes([5.0] * 12), EnvConfig(window_size=4))
    _, obs = env.reset()
    assert np.all(obs == 0.5)


def test_normalizer_uses_training_constants():
    train = series_from_closes([10.0, 20.0, 15.0])
    norm = Normalizer.fit(train)
    test = series_from_closes([30.0, 30.0, 30.0])
    env = TradingEnv(test, EnvConfig(window_size=1, normalizer=norm))
    assert env.features[0, 3] == pytest.approx(2.0)  # (30 - 10) / (20 - 10)


def test_sell_while_short_pays_nothing():
    env = TradingEnv(series_from_closes([100, 100, 107, 95, 90]), EnvConfig(window_size=1))
    state, _ = env.reset()
    state, _, reward, _ = env.step(state, 0)
    assert reward == 0 and state.position is Position.SHORT


@pytest.mark.parametrize("closes, expected", [([50, 100, 107, 120, 95], 7.0), ([50, 100, 95, 120, 95], -5.0)])
def test_closing_long_realizes_price_change(closes, expected):
    # hand simulation: buy at t=1 (close 100), sell at t=2
    env = TradingEnv(series_from_closes(closes), EnvConfig(window_size=1))
    state, _ = env.reset()
    state, _, r1, _ = env.step(state, 1)
    assert r1 == 0 and state.position is Position.LONG and state.last_trade_index == 1
    state, _, r2, _ = env.step(state, 0)
    assert r2 == expected
    assert state.cumulative_reward == expected


def test_step_after_done_raises():
    env = TradingEnv(series_from_closes([1, 2, 3]), EnvConfig(window_size=2))
    state, _ = env.reset()
    state, _, _, done = env.step(state, 1)
    assert done and state.t == 3
    with pytest.raises(UsageError):
        env.step(state, 0)


def test_constant_sell_policy_earns_nothing():
    s = series_from_closes(list(np.random.default_rng(3).uniform(50, 150, 60)))
    actions, rewards, total = run_policy(s, EnvConfig(window_size=5), lambda obs: 0)
    assert set(actions) == {0} and all(r == 0 for r in rewards) and total == 0


def test_sawtooth_oracle_policy():
    closes = [10, 12, 9, 13, 8, 11, 10, 14, 9, 12]
    # buy at each trough, sell at the next peak; gaps 4 + 3 + 4 + 3
    script = iter([0, 1, 0, 1, 0, 1, 0, 1, 0])
    _, rewards, total = run_policy(series_from_closes(closes), EnvConfig(window_size=1), lambda obs: next(script))
    assert total == 14.0
    assert [r for r in rewards if r] == [4.0, 3.0, 4.0, 3.0]


def test_replay_is_bit_identical():
    s = series_from_closes(list(np.random.default_rng(9).normal(100, 5, 80)))
    rng = np.random.default_rng(0)
    actions, rewards, total = run_policy(s, EnvConfig(window_size=10), lambda obs: int(rng.integers(2)))
    a2, r2, t2 = replay_actions(s, EnvConfig(window_size=10), actions)
    assert a2 == actions and r2 == rewards and t2 == total


def test_backtest_csv_columns():
    from xrltrade.trading_env import BacktestRecord

    s = series_from_closes([1, 2, 3, 4])
    rec = BacktestRecord("T", s.dates[1:3], [1, 0], [0.0, 1.0], [0.0, 1.0], np.zeros((2, 2)), 1, 3, 1)
    lines = rec.to_csv().splitlines()
    assert lines[0] == "date,action,position,reward,cumulative_reward"
    assert lines[2] == "2020-01-03,0,short,1.0,1.0"


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(1, 200), min_size=8, max_size=40),
    st.lists(st.integers(0, 1), min_size=40, max_size=40),
    st.integers(1, 6),
)
def test_rewards_sum_and_only_on_long_close(closes, script, window):
    s = series_from_closes(closes)
    cfg = EnvConfig(window_size=window)
    env = TradingEnv(s, cfg)
    state, obs = env.reset()
    total, prev_pos = 0.0, state.position
    k = 0
    while not state.done:
        action = script[k]
        state, obs, reward, _ = env.step(state, action)
        total += reward
        if reward != 0:
            assert prev_pos is Position.LONG and action == 0
        assert np.all(np.isfinite(obs)) and obs.shape == (4 * window,)
        prev_pos = state.position
        k += 1
    assert state.cumulative_reward == total
