"""DQN stock-trading agent with per-day Shapley explanations of its Q-values."""

from importlib import resources

from .dqn import TrainConfig, evaluate, train
from .errors import XrlError
from .explainer import Explainer, ExplainMethod, condense, label_decision
from .market_data import PriceSeries, SplitSpec, clean_and_sort, parse_csv, read_csv, split_by_date
from .neural_net import QNetwork, forward, init_network, load_weights, save_weights
from .shapley_core import CoalitionOracle, exact_shapley, make_masking_oracle, permutation_shapley
from .trading_env import EnvConfig, TradingEnv, run_policy

__version__ = "0.1.0"


def fixture_path():
    """Path of the bundled synthetic OHLCV file (Yahoo CSV layout)."""
    return resources.files(__package__) / "data" / "SYNTH.csv"
