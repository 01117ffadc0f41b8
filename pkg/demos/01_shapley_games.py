"""
Shapley values on small games
=============================

Before explaining a trading agent we check the attribution machinery on games
whose answers are known by hand.
"""

# %%
# The glove game: player 0 owns a left glove, players 1 and 2 each own a right
# glove. A pair is worth 1. Player 0 is indispensable, so it earns most.
import numpy as np

from xrltrade.shapley_core import CoalitionOracle, exact_shapley, permutation_shapley


def glove(coalition):
    return 1.0 if 0 in coalition and (1 in coalition or 2 in coalition) else 0.0


game = CoalitionOracle.from_set_function(3, glove)
result = exact_shapley(game)
print("glove game:", np.round(result.phis, 4))  # 2/3, 1/6, 1/6

# %%
# Efficiency: the attributions add up (to rounding) to the value of the grand
# coalition minus the value of the empty one.
print("base + sum(phi) =", result.reconstructed(), " v(N) =", result.explained_value)

# %%
# Exact enumeration visits all 2^M coalitions. Past about twenty players that
# is too much, so the permutation estimator averages marginal contributions
# over random player orderings instead.
table = np.random.default_rng(0).normal(size=1 << 10)
random_game = CoalitionOracle.from_table(table)
exact = exact_shapley(random_game).phis
for samples in (100, 1_000, 10_000):
    approx = permutation_shapley(random_game, samples=samples, seed=1).phis
    print(f"{samples:>6} orderings: max error {np.max(np.abs(approx - exact)):.4f}")

# %%
# The estimate is shifted so efficiency still holds exactly, whatever the
# sample count.
est = permutation_shapley(random_game, samples=50, seed=1)
print("permutation efficiency gap:", est.efficiency_gap())
