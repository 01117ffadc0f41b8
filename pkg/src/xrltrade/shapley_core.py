"""Shapley attribution for scalar coalition games.

Coalitions are passed around as boolean masks of shape ``(k, M)`` so that
oracles backed by a vectorized model can evaluate many coalitions in one call.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, UsageError

MAX_EXACT_PLAYERS = 20
_PERM_CHUNK = 256  # permutations per derived seed; fixes the result regardless of worker count
_EVAL_ROWS = 1 << 16  # coalition rows per oracle call


class CoalitionOracle:
    """A game ``v`` over ``n_players`` players.

    ``values(masks)`` takes a boolean array ``(k, n_players)`` and returns ``k``
    payoffs. Subclasses override it; :meth:`from_set_function` wraps a plain
    Python function of a frozenset of player indices.
    """

    def __init__(self, n_players: int, values: Callable[[np.ndarray], np.ndarray] | None = None):
        if n_players < 1:
            raise UsageError("a game needs at least one player")
        self.n_players = n_players
        if values is not None:
            self._values = values

    def values(self, masks: np.ndarray) -> np.ndarray:
        return np.asarray(self._values(masks), dtype=np.float64).reshape(len(masks))

    def value(self, coalition) -> float:
        mask = np.zeros((1, self.n_players), dtype=bool)
        mask[0, list(coalition)] = True
        return float(self.values(mask)[0])

    def endpoints(self) -> tuple[float, float]:
        """``(v(empty), v(all players))``: the base value and the explained value."""
        ends = np.zeros((2, self.n_players), dtype=bool)
        ends[1] = True
        base, full = self.values(ends)
        return float(base), float(full)

    @classmethod
    def from_set_function(cls, n_players: int, fn: Callable[[frozenset], float]) -> "CoalitionOracle":
        def values(masks):
            return np.array([fn(frozenset(np.flatnonzero(row).tolist())) for row in masks], dtype=np.float64)

        return cls(n_players, values)

    @classmethod
    def from_table(cls, table: np.ndarray) -> "CoalitionOracle":
        """Game given by its payoff for every coalition, indexed by bitmask (bit j = player j)."""
        table = np.asarray(table, dtype=np.float64)
        m = int(round(math.log2(len(table))))
        if 1 << m != len(table):
            raise UsageError("payoff table length must be a power of two")
        weights = 1 << np.arange(m)

        def values(masks):
            return table[masks.astype(np.int64) @ weights]

        return cls(m, values)


class MaskingOracle(CoalitionOracle):
    """Players are groups of input coordinates; absent groups take background values.

    ``predictor`` must accept a batch ``(k, d)`` and a single vector ``(d,)``.
    The endpoints are evaluated on single vectors so the explained value is
    bit-identical to calling the model on the instance directly (batched BLAS
    kernels may round differently from single-row ones).
    """

    def __init__(self, predictor, instance, background, groups: Sequence[Sequence[int]]):
        instance = np.asarray(instance, dtype=np.float64)
        background = np.asarray(background, dtype=np.float64)
        if instance.ndim != 1 or instance.shape != background.shape:
            raise UsageError(f"instance {instance.shape} and background {background.shape} must be equal 1-D shapes")
        owner = np.full(instance.shape[0], -1, dtype=np.int64)
        for g, coords in enumerate(groups):
            coords = np.asarray(coords, dtype=np.int64)
            if coords.size == 0:
                raise UsageError(f"group {g} is empty")
            if np.any((coords < 0) | (coords >= owner.size)):
                raise UsageError(f"group {g} has coordinates outside the input")
            if np.any(owner[coords] != -1) or len(set(coords.tolist())) != coords.size:
                raise UsageError(f"group {g} overlaps another group")
            owner[coords] = g
        if np.any(owner == -1):
            raise UsageError("groups do not cover every input coordinate")
        super().__init__(len(groups))
        self.predictor = predictor
        self.instance = instance
        self.background = background
        self.groups = [list(map(int, c)) for c in groups]
        self._owner = owner

    def composite(self, masks: np.ndarray) -> np.ndarray:
        present = np.asarray(masks, dtype=bool)[:, self._owner]
        return np.where(present, self.instance, self.background)

    def values(self, masks: np.ndarray) -> np.ndarray:
        out = self.predictor(self.composite(masks))
        return np.asarray(out, dtype=np.float64).reshape(len(masks))

    def endpoints(self) -> tuple[float, float]:
        def single(x):
            return float(np.asarray(self.predictor(x), dtype=np.float64).reshape(-1)[0])

        return single(self.background), single(self.instance)


def make_masking_oracle(predictor, instance, background, groups) -> MaskingOracle:
    return MaskingOracle(predictor, instance, background, groups)


@dataclass(frozen=True)
class ShapleyResult:
    base_value: float
    phis: np.ndarray
    explained_value: float
    method: str  # "exact" or "permutation"
    samples: int | None = None
    seed: int | None = None

    @property
    def n_players(self) -> int:
        return len(self.phis)

    def reconstructed(self) -> float:
        """Correctly rounded ``base + sum(phis)``, independent of summation order."""
        return math.fsum([self.base_value, *self.phis])

    def efficiency_gap(self) -> float:
        return abs(self.reconstructed() - self.explained_value)

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "samples": self.samples,
                "seed": self.seed,
                "base_value": self.base_value,
                "explained_value": self.explained_value,
                "phis": [float(p) for p in self.phis],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ShapleyResult":
        d = json.loads(text)
        return cls(d["base_value"], np.array(d["phis"], dtype=np.float64), d["explained_value"],
                   d["method"], d.get("samples"), d.get("seed"))


def coalition_weights(m: int) -> np.ndarray:
    """|S|! (M - |S| - 1)! / M! for |S| = 0..M-1, via log-gamma."""
    s = np.arange(m)
    lg = np.array([math.lgamma(k + 1) + math.lgamma(m - k) - math.lgamma(m + 1) for k in s])
    return np.exp(lg)


def game_table(oracle: CoalitionOracle) -> np.ndarray:
    """Payoff of every coalition, indexed by bitmask."""
    m = oracle.n_players
    if m > MAX_EXACT_PLAYERS:
        raise CapacityError(f"{m} players exceeds the exact limit of {MAX_EXACT_PLAYERS}; use permutation_shapley")
    n = 1 << m
    out = np.empty(n)
    codes = np.arange(n, dtype=np.int64)
    for lo in range(0, n, _EVAL_ROWS):
        chunk = codes[lo : lo + _EVAL_ROWS]
        masks = ((chunk[:, None] >> np.arange(m)) & 1).astype(bool)
        out[lo : lo + _EVAL_ROWS] = oracle.values(masks)
    return out


def exact_shapley(oracle: CoalitionOracle) -> ShapleyResult:
    """Enumerate all 2^M coalitions and apply the weighted marginal-contribution sum."""
    m = oracle.n_players
    v = game_table(oracle)
    codes = np.arange(1 << m, dtype=np.int64)
    sizes = np.zeros(1 << m, dtype=np.int64)
    for j in range(m):
        sizes += (codes >> j) & 1
    w = coalition_weights(m)
    phis = np.empty(m)
    for j in range(m):
        without = codes[((codes >> j) & 1) == 0]
        phis[j] = np.dot(w[sizes[without]], v[without | (1 << j)] - v[without])
    base, full = oracle.endpoints()
    return ShapleyResult(base, phis, full, "exact")


def _permutation_chunk(oracle: CoalitionOracle, n_perms: int, seed: int, chunk: int) -> np.ndarray:
    m = oracle.n_players
    rng = np.random.default_rng([seed, chunk])
    perms = np.argsort(rng.random((n_perms, m)), axis=1)
    # row k of block p holds the first k players of permutation p
    rank = np.empty_like(perms)
    rank[np.arange(n_perms)[:, None], perms] = np.arange(m)
    masks = rank[:, None, :] < np.arange(m + 1)[None, :, None]
    flat = masks.reshape(-1, m)
    vals = np.empty(len(flat))
    for lo in range(0, len(flat), _EVAL_ROWS):
        vals[lo : lo + _EVAL_ROWS] = oracle.values(flat[lo : lo + _EVAL_ROWS])
    vals = vals.reshape(n_perms, m + 1)
    gains = np.diff(vals, axis=1)  # gain of the k-th player in order
    totals = np.zeros(m)
    np.add.at(totals, perms.reshape(-1), gains.reshape(-1))
    return totals


def _absorb_residue(phis: np.ndarray, base: float, full: float) -> None:
    """Nudge entries until ``fsum([base, *phis]) == full``.

    The correctly rounded sum sees the exact real total, so adjusting the
    smallest-magnitude entries (which have the finest spacing) reaches
    ``full`` except in contrived cases where every entry is far coarser than it.
    """
    order = np.argsort(np.abs(phis))
    for attempt in range(8 * len(phis)):
        gap = full - math.fsum([base, *phis])
        if gap == 0.0:
            return
        k = order[attempt % len(phis)]
        if attempt < len(phis):
            phis[k] += gap
        else:
            phis[k] = np.nextafter(phis[k], np.inf if gap > 0 else -np.inf)


def permutation_shapley(oracle: CoalitionOracle, samples: int, seed: int, n_jobs: int = 1) -> ShapleyResult:
    """Monte-Carlo estimate over ``samples`` random player orderings.

    The raw estimate is shifted uniformly so that base + sum(phis) equals
    v(all players) exactly. Chunks of orderings use seeds derived from
    ``(seed, chunk index)``, so ``n_jobs`` never changes the result.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    m = oracle.n_players
    sizes = [min(_PERM_CHUNK, samples - lo) for lo in range(0, samples, _PERM_CHUNK)]
    if n_jobs > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda ci: _permutation_chunk(oracle, sizes[ci], seed, ci), range(len(sizes))))
    else:
        parts = [_permutation_chunk(oracle, n, seed, ci) for ci, n in enumerate(sizes)]
    totals = np.zeros(m)
    for part in parts:
        totals += part
    phis = totals / samples

    base, full = oracle.endpoints()
    phis = phis + (full - base - phis.sum()) / m
    _absorb_residue(phis, base, full)
    return ShapleyResult(base, phis, full, "permutation", samples, seed)
