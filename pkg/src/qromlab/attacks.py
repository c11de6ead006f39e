"""Tightness attacks: preimage search against blind unforgeability.

The classical attack searches the oracle for a preimage of one of the public
key strings, obtains a signature for a message whose relevant bit points at
the complementary key, then flips that bit and substitutes the found
preimage.  With blinding probability 1/2 the signed message is answerable and
the forged message blinded with probability 1/4 jointly, independent of the
search.

The closed-form search-success expression 1 - (1 - 2l/2^n)^q treats each
query as an independent Bernoulli trial with the nominal target density; at
the register sizes simulated here the attacker's guaranteed hits on the
secret strings themselves and public-key collisions shift the true rate
visibly, so reports carry both the formula and an exact reference computed
from first-hit combinatorics over the attacker's random query set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import game, lemmas, ots, rom
from .game import wilson_interval


def p_search_formula(q: int, l: int, n: int) -> float:
    return 1.0 - (1.0 - 2.0 * l / 2 ** n) ** q


@dataclass(frozen=True)
class AttackReport:
    kind: str
    n: int
    l: int
    q: int
    trials: int
    seed: int
    wins: int
    empirical: float
    wilson_low: float
    wilson_high: float
    p_search_formula: float
    exact_reference: float
    reference_sigma: float
    search_rate: float
    search_exact: float
    bound_full: float
    bound_simple: float

    def to_row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def reports_to_csv(reports) -> str:
    fields = list(AttackReport.__dataclass_fields__)
    lines = [",".join(fields)]
    for r in reports:
        lines.append(",".join(repr(getattr(r, f)) if isinstance(getattr(r, f), float)
                              else str(getattr(r, f)) for f in fields))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Shared forgery assembly


def _preimage_targets(pk: tuple[int, ...], oracle, y: int) -> int | None:
    """Index (ascending) of the first public-key string that y maps onto."""
    hy = oracle(y)
    for idx, p in enumerate(pk):
        if p == hy:
            return idx
    return None


def _forge(handles: game.ClassicalHandles, y_star: int, pk_index: int):
    """Sign the message complementary to the hit position, then flip and patch."""
    l = handles.params.l
    i_star, j_star = divmod(pk_index, 2)
    m = (1 - j_star) << (l - 1 - i_star)  # zeros elsewhere
    answer = handles.sign_query(m)
    if answer.blinded:
        return None
    m_prime = m ^ (1 << (l - 1 - i_star))
    sigma = list(answer.payload)
    sigma[i_star] = y_star
    return m_prime, tuple(sigma)


def _classical_adversary(q: int, rng: np.random.Generator, found: list):
    def adversary(handles: game.ClassicalHandles):
        n = handles.params.n
        space = 1 << n
        queries = sorted(int(v) for v in rng.choice(space, size=min(q, space), replace=False))
        y_star = None
        pk_index = None
        for y in queries:  # scan hits in ascending order
            hy = handles.hash_query(y)
            if pk_index is None:
                for idx, p in enumerate(handles.pk):
                    if p == hy:
                        y_star, pk_index = y, idx
                        break
        if pk_index is None:
            return None  # concede: no preimage found
        found.append(y_star)
        return _forge(handles, y_star, pk_index)  # None when the sign query was blinded

    return adversary


def _first_hit_exact(n: int, q: int, hits: list[tuple[int, bool]]) -> tuple[float, float]:
    """(win probability, hit probability) over a uniform random q-subset of inputs.

    ``hits`` lists (input, wins-if-first) for every preimage of a public-key
    string, ascending.  The chance that a given hit is the smallest queried one
    is C(space-1-rank, q-1) / C(space, q).
    """
    space = 1 << n
    q = min(q, space)
    total = math.comb(space, q)
    p_win = 0.0
    p_hit = 0.0
    for rank, (_, wins) in enumerate(hits):
        weight = math.comb(space - 1 - rank, q - 1) / total
        p_hit += weight
        if wins:
            p_win += weight
    return p_win, p_hit


def _trial_world(n: int, l: int, seed: int):
    params = ots.LamportParams(n=n, l=l)
    oracle = rom.RandomOracleTable(n, seed=rom.derive_seed(seed, "oracle"))
    keypair = ots.lamport_keygen(params, oracle, np.random.default_rng(rom.derive_seed(seed, "keygen")))
    blinding = game.sample_blinding_set(
        0.5, l, np.random.default_rng(rom.derive_seed(seed, "blinding"))
    )
    return params, oracle, keypair, blinding


def _hit_wins(n: int, l: int, oracle, pk, blinding) -> list[tuple[int, bool]]:
    """All oracle inputs mapping onto the public key, with the win verdict the
    forgery pipeline reaches if that input is the first hit."""
    out = []
    for y in range(1 << n):
        idx = _preimage_targets(pk, oracle, y)
        if idx is None:
            continue
        i_star, j_star = divmod(idx, 2)
        m = (1 - j_star) << (l - 1 - i_star)
        m_prime = m ^ (1 << (l - 1 - i_star))
        out.append((y, (m not in blinding) and (m_prime in blinding)))
    return out


def classical_search_attack(n: int, l: int, q: int, trials: int, seed: int = 0) -> AttackReport:
    """Monte-Carlo runs of the search attack plus its exact per-world reference."""
    if q < 0:
        raise ValueError("query count must be nonnegative")
    wins = 0
    searches = 0
    exact_sum = 0.0
    exact_var = 0.0
    search_exact_sum = 0.0
    for t in range(trials):
        trial_seed = rom.derive_seed(seed, "classical", t)
        params, oracle, keypair, blinding = _trial_world(n, l, trial_seed)
        # Exact reference uses the same world; the sampled run must match it on average.
        hits = _hit_wins(n, l, oracle, keypair.pk, blinding)
        p_win, p_hit = _first_hit_exact(n, q, hits) if q > 0 else (0.0, 0.0)
        exact_sum += p_win
        exact_var += p_win * (1.0 - p_win)
        search_exact_sum += p_hit
        rng = np.random.default_rng(rom.derive_seed(trial_seed, "queries"))
        found: list = []
        adversary = _classical_adversary(q, rng, found) if q > 0 else (lambda h: None)
        transcript = game.run_with_world_classical(adversary, params, oracle, keypair, blinding, trial_seed)
        if transcript.verdict == "win":
            wins += 1
        if found:
            searches += 1
    empirical = wins / trials if trials else 0.0
    low, high = wilson_interval(wins, trials)
    full, simple = lemmas.forgery_bound_lamport(q, l, n)
    return AttackReport(
        kind="classical-search",
        n=n,
        l=l,
        q=q,
        trials=trials,
        seed=seed,
        wins=wins,
        empirical=empirical,
        wilson_low=low,
        wilson_high=high,
        p_search_formula=p_search_formula(q, l, n),
        exact_reference=exact_sum / trials if trials else 0.0,
        reference_sigma=math.sqrt(exact_var) / trials if trials else 0.0,
        search_rate=searches / trials if trials else 0.0,
        search_exact=search_exact_sum / trials if trials else 0.0,
        bound_full=full,
        bound_simple=simple,
    )


def exact_win_by_subset_enumeration(n: int, l: int, q: int, world_seed: int) -> float:
    """Brute-force reference: average the deterministic attack verdict over
    every possible query subset.  Only feasible at small n; cross-checks the
    first-hit combinatorics."""
    params, oracle, keypair, blinding = _trial_world(n, l, world_seed)
    hits = dict(_hit_wins(n, l, oracle, keypair.pk, blinding))
    space = 1 << n
    q = min(q, space)
    wins = 0
    total = 0
    for subset in itertools.combinations(range(space), q):
        total += 1
        first = next((y for y in subset if y in hits), None)
        if first is not None and hits[first]:
            wins += 1
    return wins / total if total else 0.0


# ---------------------------------------------------------------------------
# Grover variant


def grover_state(n: int, marked, iterations: int) -> np.ndarray:
    """Amplitudes after the standard iterate: oracle phase flip on the marked
    set, then inversion about the mean."""
    dim = 1 << n
    psi = np.full(dim, 1.0 / math.sqrt(dim))
    flip = np.ones(dim)
    for y in marked:
        flip[y] = -1.0
    for _ in range(iterations):
        psi = psi * flip
        psi = 2.0 * psi.mean() - psi
    return psi


def default_grover_iterations(n: int, l: int) -> int:
    # Schedule from the expected multi-target count 2l, not the realized one.
    return int(math.floor(math.pi / 4.0 * math.sqrt(2 ** n / (2.0 * l))))


def grover_attack(
    n: int, l: int, iterations: int | None = None, trials: int = 1000, seed: int = 0
) -> AttackReport:
    """Grover preimage search feeding the same forgery pipeline.

    The measured candidate is always submitted; with zero iterations this
    degenerates to a uniform guess.
    """
    if iterations is None:
        iterations = default_grover_iterations(n, l)
    wins = 0
    search_hits = 0
    exact_sum = 0.0
    exact_var = 0.0
    search_exact_sum = 0.0
    for t in range(trials):
        trial_seed = rom.derive_seed(seed, "grover", t)
        params, oracle, keypair, blinding = _trial_world(n, l, trial_seed)
        hit_wins = dict(_hit_wins(n, l, oracle, keypair.pk, blinding))
        psi = grover_state(n, hit_wins.keys(), iterations)
        probs = np.abs(psi) ** 2
        probs = probs / probs.sum()
        p_search = float(sum(probs[y] for y in hit_wins))
        p_win = float(sum(probs[y] for y, ok in hit_wins.items() if ok))
        search_exact_sum += p_search
        exact_sum += p_win
        exact_var += p_win * (1.0 - p_win)
        rng = np.random.default_rng(rom.derive_seed(trial_seed, "measure"))
        y_star = int(rng.choice(len(probs), p=probs))
        if y_star in hit_wins:
            search_hits += 1
        handles = game.ClassicalHandles(keypair, blinding, oracle)
        idx = _preimage_targets(keypair.pk, oracle, y_star)
        forged = _forge(handles, y_star, idx) if idx is not None else None
        if forged is not None:
            m_star, sigma_star = forged
            ok = ots.lamport_verify(params, keypair.pk, m_star, sigma_star, oracle)
            if ok and m_star in blinding:
                wins += 1
    empirical = wins / trials if trials else 0.0
    low, high = wilson_interval(wins, trials)
    full, simple = lemmas.forgery_bound_lamport(iterations, l, n)
    return AttackReport(
        kind="grover",
        n=n,
        l=l,
        q=iterations,
        trials=trials,
        seed=seed,
        wins=wins,
        empirical=empirical,
        wilson_low=low,
        wilson_high=high,
        p_search_formula=p_search_formula(iterations, l, n),
        exact_reference=exact_sum / trials if trials else 0.0,
        reference_sigma=math.sqrt(exact_var) / trials if trials else 0.0,
        search_rate=search_hits / trials if trials else 0.0,
        search_exact=search_exact_sum / trials if trials else 0.0,
        bound_full=full,
        bound_simple=simple,
    )


def grover_schedule_sensitivity(
    n: int, l: int, max_iterations: int, trials: int = 200, seed: int = 0
) -> list[tuple[int, float]]:
    """Mean exact search success per iteration count.

    The schedule is fixed from the expected target count; the realized count
    is binomial, so this sweep reports how forgiving that choice is.
    """
    out = []
    worlds = []
    for t in range(trials):
        trial_seed = rom.derive_seed(seed, "sens", t)
        params, oracle, keypair, blinding = _trial_world(n, l, trial_seed)
        worlds.append(set(y for y, _ in _hit_wins(n, l, oracle, keypair.pk, blinding)))
    for iters in range(max_iterations + 1):
        total = 0.0
        for marked in worlds:
            psi = grover_state(n, marked, iters)
            total += float(sum(abs(psi[y]) ** 2 for y in marked))
        out.append((iters, total / trials))
    return out


def security_bounds(scheme: str, q: int, n: int, l: int, w: int | None = None) -> dict:
    """Closed-form success bounds (full and simplified), clamped at 1."""
    if q < 0:
        raise ValueError("query count must be nonnegative")
    if scheme == "lamport":
        full, simple = lemmas.forgery_bound_lamport(q, l, n)
    elif scheme == "winternitz":
        if w is None:
            raise ValueError("w required for the chain scheme")
        full, simple = lemmas.forgery_bound_winternitz(q, l, w, n)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return {"scheme": scheme, "q": q, "n": n, "l": l, "w": w, "full": full, "simplified": simple}
