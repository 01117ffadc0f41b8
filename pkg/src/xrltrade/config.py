"""Run configuration: a flat ``key = value`` text file with ``#`` comments.

Every hyperparameter has its default baked in, so a minimal file only names
the data file.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

from .dqn import TrainConfig
from .errors import ConfigError
from .explainer import ExplainMethod
from .market_data import DEFAULT_SPLIT, SplitSpec


@dataclass(frozen=True)
class RunConfig:
    data: str = ""
    output_dir: str = "out"
    ticker: str = ""  # defaults to the data file's stem
    train_start: dt.date = DEFAULT_SPLIT.train_start
    train_end: dt.date = DEFAULT_SPLIT.train_end
    test_start: dt.date = DEFAULT_SPLIT.test_start
    test_end: dt.date = DEFAULT_SPLIT.test_end
    window_size: int = 30
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.995
    epsilon_schedule: str = "episode"
    learning_rate: float = 0.005
    batch_size: int = 32
    hidden_units: int = 50
    epochs: int = 100
    episodes: int = 30
    target_sync: int = 100
    replay_capacity: int = 10_000
    seed: int = 0
    method: str = "perm"  # "perm" or "exact"
    samples: int = 1000
    top_k: int = 10

    def __post_init__(self):
        # constructing the component configs runs their own checks
        self.split()
        self.train_config()
        self.explain_method()
        if self.window_size < 1:
            raise ConfigError("window_size must be >= 1")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")

    @property
    def ticker_name(self) -> str:
        return self.ticker or Path(self.data).stem or "series"

    def split(self) -> SplitSpec:
        return SplitSpec(self.train_start, self.train_end, self.test_start, self.test_end)

    def train_config(self) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(TrainConfig)}
        return TrainConfig(**{n: getattr(self, n) for n in names})

    def explain_method(self) -> ExplainMethod:
        kinds = {"perm": "permutation", "permutation": "permutation", "exact": "exact"}
        if self.method not in kinds:
            raise ConfigError(f"method must be 'perm' or 'exact', got {self.method!r}")
        return ExplainMethod(kinds[self.method], self.samples, self.seed)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(name: str, raw: str):
    default = _FIELDS[name].default
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, dt.date):
            return dt.date.fromisoformat(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse config text; relative paths resolve against ``base_dir``."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"config line {line_no}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    if base_dir is not None:
        for key in ("data", "output_dir"):
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(Path(base_dir) / values[key])
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        lines.append(f"{name} = {v.isoformat() if isinstance(v, dt.date) else v}")
    return "\n".join(lines) + "\n"
