"""Random oracles, chain reprogramming overlays, and exact chain distributions.

A :class:`RandomOracleTable` lazily samples a uniformly random function on
n-bit strings: once an input has been queried its image is fixed for the
lifetime of the table.  :class:`ReprogrammedOracle` layers hash-chain
consistency on top of a base oracle in one of two modes:

* ``"function"`` — the overlay pairs ``chain[j] -> chain[j+1]`` form a partial
  function (requires collision-consistent chains);
* ``"xor"`` — a query XORs the successors of *every* chain entry equal to the
  input, so independently sampled chains with collisions stay well-defined.

The exact distribution of chain tuples generated by iterating a lazily
sampled oracle is enumerated by recursive conditioning over reachable inputs,
never by Monte Carlo; probabilities are dyadic rationals and exact in float64
at the sizes the guard admits.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

Oracle = Callable[[int], int]

MAX_ENUM_BITS = 16  # guard: n*l*w for exhaustive enumeration


def derive_seed(seed: int, *labels) -> int:
    """Labeled sub-seed: hash of the master seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1


class RandomOracleTable:
    """Lazily sampled uniformly random function on n-bit strings.

    Each image is derived from (seed, input), never from a shared stream, so
    the function is independent of query order: keygen, signing, and
    verification interrogating the same seed always see the same oracle.

    The memo table makes instances single-owner objects; share across threads
    only behind external serialization, or give each worker its own table
    (identical seeds reproduce identical functions).
    """

    def __init__(self, n: int, seed: int | None = None):
        if n < 1:
            raise ValueError("oracle width must be at least one bit")
        self.n = n
        self.seed = 0 if seed is None else int(seed)
        self._table: dict[int, int] = {}

    def query(self, x: int) -> int:
        if not 0 <= x < (1 << self.n):
            raise ValueError(f"input {x} is not an {self.n}-bit value")
        y = self._table.get(x)
        if y is None:
            y = derive_seed(self.seed, "img", x) & ((1 << self.n) - 1)
            self._table[x] = y
        return y

    __call__ = query

    def known(self) -> dict[int, int]:
        return dict(self._table)

    def full_table(self) -> tuple[int, ...]:
        """Query the whole domain; only sensible at small n."""
        if self.n > 20:
            raise ValueError("full table requested for n > 20")
        return tuple(self.query(x) for x in range(1 << self.n))


@dataclass(frozen=True)
class ChainTuple:
    """l hash chains of length w over n-bit strings; gamma[i][j] is entry j of chain i."""

    n: int
    l: int
    w: int
    gamma: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.gamma) != self.l or any(len(row) != self.w for row in self.gamma):
            raise ValueError("chain array shape does not match (l, w)")
        top = 1 << self.n
        if any(not 0 <= v < top for row in self.gamma for v in row):
            raise ValueError("chain entry out of n-bit range")

    def flat(self) -> tuple[int, ...]:
        return tuple(v for row in self.gamma for v in row)

    def endpoints(self) -> tuple[int, ...]:
        return tuple(row[-1] for row in self.gamma)


class ReprogrammedOracle:
    """Base oracle with a hash-chain overlay; see the module docstring for modes."""

    def __init__(self, base: Oracle, chains: ChainTuple, mode: str = "function"):
        if mode not in ("function", "xor"):
            raise ValueError(f"unknown overlay mode {mode!r}")
        self.base = base
        self.chains = chains
        self.mode = mode
        self.overrides: tuple[tuple[int, int], ...] = tuple(
            (row[j], row[j + 1]) for row in chains.gamma for j in range(chains.w - 1)
        )
        if mode == "function":
            table: dict[int, int] = {}
            for x, y in self.overrides:
                if table.setdefault(x, y) != y:
                    raise ValueError("function overlay needs collision-consistent chains")
            self._function = table

    def query(self, x: int) -> int:
        if self.mode == "function":
            y = self._function.get(x)
            return self.base(x) if y is None else y
        acc = 0
        hit = False
        for inp, out in self.overrides:
            if inp == x:
                acc ^= out
                hit = True
        return acc if hit else self.base(x)

    __call__ = query


# ---------------------------------------------------------------------------
# Chain sampling


def _uniform(n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(0, 1 << n))


def sample_real_chains(
    n: int, l: int, w: int, oracle: Oracle, rng: np.random.Generator
) -> ChainTuple:
    """Chains grown by iterating the oracle on fresh uniform start values."""
    rows = []
    for _ in range(l):
        row = [_uniform(n, rng)]
        for _ in range(w - 1):
            row.append(oracle(row[-1]))
        rows.append(tuple(row))
    return ChainTuple(n=n, l=l, w=w, gamma=tuple(rows))


def sample_consistent_chains(n: int, l: int, w: int, rng: np.random.Generator) -> ChainTuple:
    """Chains sampled position-major, uniformly except on collision ties.

    Whenever the current entry equals an already-extended entry elsewhere, the
    successor is copied instead of freshly sampled, so the tuple stays
    consistent with *some* function.  Equal in distribution to
    :func:`sample_real_chains` over a fresh lazy oracle.
    """
    f: dict[int, int] = {}
    grid = [[_uniform(n, rng)] for _ in range(l)]
    for j in range(1, w):
        for i in range(l):
            x = grid[i][j - 1]
            y = f.get(x)
            if y is None:
                y = _uniform(n, rng)
                f[x] = y
            grid[i].append(y)
    return ChainTuple(n=n, l=l, w=w, gamma=tuple(tuple(row) for row in grid))


def sample_independent_chains(n: int, l: int, w: int, rng: np.random.Generator) -> ChainTuple:
    """All l*w entries i.i.d. uniform, collisions allowed."""
    flat = [_uniform(n, rng) for _ in range(l * w)]
    rows = tuple(tuple(flat[i * w : (i + 1) * w]) for i in range(l))
    return ChainTuple(n=n, l=l, w=w, gamma=rows)


# ---------------------------------------------------------------------------
# Exact distributions


def _check_enum_size(n: int, l: int, w: int) -> None:
    if n * l * w > MAX_ENUM_BITS:
        raise ValueError(f"enumeration guard: n*l*w = {n * l * w} exceeds {MAX_ENUM_BITS}")


def _enumerate_lazy_oracle(n: int, l: int, w: int, order: list[tuple[int, int]]) -> dict:
    """Exact tuple distribution for chains grown against a lazy random oracle.

    ``order`` lists (chain, position) extension steps.  Branches over fresh
    oracle inputs only (recursive conditioning); forced steps carry no factor.
    Returns integer numerators over the common denominator 2**(n*l*w).
    """
    top = 1 << n
    denom_exp = n * l * w
    counts: dict[tuple[int, ...], int] = {}

    def rec(step: int, grid: list[list[int]], f: dict[int, int], used_exp: int):
        if step == len(order) + l:
            key = tuple(v for row in grid for v in row)
            counts[key] = counts.get(key, 0) + (1 << (denom_exp - used_exp))
            return
        if step < l:  # start values: always fresh uniform samples
            for v in range(top):
                grid[step].append(v)
                rec(step + 1, grid, f, used_exp + n)
                grid[step].pop()
            return
        i, _ = order[step - l]
        x = grid[i][-1]
        y = f.get(x)
        if y is not None:
            grid[i].append(y)
            rec(step + 1, grid, f, used_exp)
            grid[i].pop()
            return
        for v in range(top):
            f[x] = v
            grid[i].append(v)
            rec(step + 1, grid, f, used_exp + n)
            grid[i].pop()
            del f[x]

    rec(0, [[] for _ in range(l)], {}, 0)
    return counts


def enumerate_chain_distributions(n: int, l: int, w: int) -> tuple[dict, dict]:
    """Exact (p, q): iterated-oracle chain distribution and the uniform product.

    Keys are flat (chain-major) tuples; values are float probabilities, exact
    because every probability is a dyadic rational with at most n*l*w bits.
    """
    _check_enum_size(n, l, w)
    order = [(i, j) for i in range(l) for j in range(1, w)]  # chain-major growth
    counts = _enumerate_lazy_oracle(n, l, w, order)
    denom = 1 << (n * l * w)
    p = {key: cnt / denom for key, cnt in counts.items()}
    q = {key: 1.0 / denom for key in itertools.product(range(1 << n), repeat=l * w)}
    return p, q


def enumerate_consistent_chain_distribution(n: int, l: int, w: int) -> dict:
    """Exact distribution of :func:`sample_consistent_chains` (position-major)."""
    _check_enum_size(n, l, w)
    order = [(i, j) for j in range(1, w) for i in range(l)]  # position-major growth
    counts = _enumerate_lazy_oracle(n, l, w, order)
    denom = 1 << (n * l * w)
    return {key: cnt / denom for key, cnt in counts.items()}


def has_collision(flat: tuple[int, ...]) -> bool:
    return len(set(flat)) != len(flat)


@dataclass(frozen=True)
class WorldsReport:
    n: int
    l: int
    w: int
    tv: float
    p_collision: float
    q_collision: float
    tv_bound: float
    collision_bound: float
    tv_ok: bool
    collision_ok: bool
    conditional_equal: bool


def chain_tv_bound(n: int, l: int, w: int) -> float:
    return 3.0 * (w * l) ** 2 / 2 ** n


def tv_and_collision_stats(p: Mapping, q: Mapping, n: int, l: int, w: int) -> WorldsReport:
    """l1 distance, collision-set masses, and the closeness bound for (p, q).

    Also checks the exact structural facts: p and q agree entry-by-entry on
    collision-free tuples, and put equal total mass on the collision set.
    """
    if not set(p).issubset(set(q)):
        raise ValueError("support mismatch: p has tuples outside q's support")
    tv = 0.0
    p_coll = 0.0
    q_coll = 0.0
    conditional_equal = True
    for key, qv in q.items():
        pv = p.get(key, 0.0)
        tv += abs(pv - qv)
        if has_collision(key):
            p_coll += pv
            q_coll += qv
        elif pv != qv:
            conditional_equal = False
    bound = chain_tv_bound(n, l, w)
    coll_bound = (w * l) ** 2 / 2 ** n
    return WorldsReport(
        n=n,
        l=l,
        w=w,
        tv=tv,
        p_collision=p_coll,
        q_collision=q_coll,
        tv_bound=bound,
        collision_bound=coll_bound,
        tv_ok=tv <= bound + 1e-12,
        collision_ok=max(p_coll, q_coll) <= coll_bound + 1e-12,
        conditional_equal=conditional_equal,
    )


def dump_distribution_csv(dist: Mapping, n: int, path: str | Path) -> None:
    """Fixture dump: one (tuple-hex, probability) row per support point."""
    width = (n + 3) // 4
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tuple_hex", "probability"])
        for key in sorted(dist):
            hexkey = "".join(format(v, f"0{width}x") for v in key)
            writer.writerow([hexkey, repr(dist[key])])
