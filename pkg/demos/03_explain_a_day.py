"""
Explaining one trading decision
===============================

Each of the 30 window days is a player. Removing a day replaces its four
normalized prices with the training average, and the Shapley values say how
much each day pushed the Q-value of the chosen action away from that average.
"""

# %%
from pathlib import Path

from xrltrade import fixture_path
from xrltrade.dqn import TrainConfig, evaluate, train
from xrltrade.explainer import Explainer, ExplainMethod, condense, guidance
from xrltrade.market_data import DEFAULT_SPLIT, clean_and_sort, read_csv, split_by_date
from xrltrade.plot_emit import WaterfallSpec, render_waterfall, waterfall_filename
from xrltrade.trading_env import EnvConfig

series = clean_and_sort(read_csv(fixture_path(), "SYNTH"))
train_part, test_part = split_by_date(series, DEFAULT_SPLIT)
result = train(train_part, EnvConfig(30), TrainConfig(seed=0))
record = evaluate(result.net, test_part, result.env_config)
explainer = Explainer.from_training(result.net, train_part, test_part, record, result.env_config)

# %%
# Only days whose whole window was traded by the agent can be explained.
t = explainer.first_index
exp = explainer.explain_instance(t, ExplainMethod("permutation", samples=1000, seed=0))
print(exp.instance_date, "action:", "buy" if exp.explained_action else "sell")
print(f"f(x) = {exp.explained_value:.4f}, E(f(x)) = {exp.base_value:.4f}")
print(guidance(exp.label, exp.explained_action, "SYNTH", exp.instance_date))

# %%
# Keep the ten most influential days and merge the other twenty.
short = condense(exp, k=10)
for a in short.top:
    print(f"Feature {a.feature_index:2d} = {a.date} ({'buy' if a.action else 'sell'}): {a.phi:+.4f}")
print(f"{short.remainder_count} other features: {short.remainder_phi:+.4f}")

# %%
# Write the waterfall. Red bars are days the agent bought, blue bars days it sold.
out = Path("demo_output")
out.mkdir(exist_ok=True)
path = out / waterfall_filename("SYNTH", exp.instance_date)
path.write_text(render_waterfall(WaterfallSpec(short)), encoding="utf-8")
print("wrote", path)
