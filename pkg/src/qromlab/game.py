"""The blind-forgery experiment, classically and over chain worlds.

The classical harness runs a callback adversary against a lazily sampled
oracle and a blinded signing oracle that answers at most once.  The quantum
harness executes a fixed :class:`AdversaryProgram` over a
:class:`~qromlab.qworlds.ChainWorld` and evaluates the winning probability
exactly whenever the joint outcome space of message and signature registers
is small enough to enumerate, falling back to sampling with a Wilson interval
otherwise.

Winning means: the forged message is blinded, and the scheme verifier accepts
the forged signature against the oracle reprogrammed on the chain values
sampled from the final state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import ots, qsim, rom
from .qworlds import (
    BlindingSet,
    ChainWorld,
    build_blinded_sign_unitary,
    build_q_projectors,
    build_query_unitary,
    build_qtilde,
)

EXACT_OUTCOME_CAP = 2 ** 16  # |message space| * |signature space| enumeration cap


# ---------------------------------------------------------------------------
# Blinding


def sample_blinding_set(
    epsilon: float, message_space_bits: int, rng: np.random.Generator | int
) -> BlindingSet:
    """Include every message independently with probability epsilon."""
    if message_space_bits > 20:
        raise ValueError("message space capped at 2^20 for explicit blinding sets")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be a probability")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    draws = rng.random(1 << message_space_bits) < epsilon
    members = frozenset(int(i) for i in np.nonzero(draws)[0])
    return BlindingSet(nbits=message_space_bits, epsilon=epsilon, members=members)


@dataclass(frozen=True)
class BlindedSignature:
    """Extra-bit encoding of the blinded signer's answer: zero payload with
    flag 1 when the message is blinded, the signature with flag 0 otherwise."""

    payload: tuple[int, ...]
    flag: int

    @property
    def blinded(self) -> bool:
        return self.flag == 1


def blinded_sign(
    blinding: BlindingSet, keypair: ots.KeyPair, m: int, oracle: rom.Oracle
) -> BlindedSignature:
    params = keypair.params
    if m in blinding:
        length = params.l if keypair.scheme == "lamport" else params.l
        return BlindedSignature(payload=(0,) * length, flag=1)
    if keypair.scheme == "lamport":
        sig = ots.lamport_sign(params, keypair.sk, m)
    else:
        sig = ots.wots_sign(params, keypair.sk, m, oracle)
    return BlindedSignature(payload=sig.sigma, flag=0)


# ---------------------------------------------------------------------------
# Classical harness


class SecondSignQuery(Exception):
    pass


class ClassicalHandles:
    """Oracle handles passed to a classical adversary callback."""

    def __init__(self, keypair: ots.KeyPair, blinding: BlindingSet, oracle: rom.Oracle):
        self.params = keypair.params
        self.scheme = keypair.scheme
        self.pk = keypair.pk
        self._keypair = keypair
        self._blinding = blinding
        self._oracle = oracle
        self.hash_queries = 0
        self.sign_queries = 0

    def hash_query(self, x: int) -> int:
        self.hash_queries += 1
        return self._oracle(x)

    def sign_query(self, m: int) -> BlindedSignature:
        if self.sign_queries >= 1:
            raise SecondSignQuery
        self.sign_queries += 1
        return blinded_sign(self._blinding, self._keypair, m, self._oracle)


@dataclass
class GameTranscript:
    scheme: str
    seed: int
    epsilon: float
    blinding: tuple[int, ...]
    m_star: int | None = None
    sigma_star: tuple[int, ...] | None = None
    verdict: str = "lose"
    aborted: bool = False
    q_outcome: int | None = None
    p_success: float | None = None
    mode: str = "classical"
    hash_queries: int = 0
    sign_queries: int = 0
    step_probs: tuple[tuple[str, float], ...] = ()

    def to_json(self) -> str:
        doc = {
            "scheme": self.scheme,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "B": list(self.blinding),
            "mode": self.mode,
            "m_star": self.m_star,
            "sigma_star": list(self.sigma_star) if self.sigma_star is not None else None,
            "verdict": self.verdict,
            "aborted": self.aborted,
            "q_outcome": self.q_outcome,
            "p_success": self.p_success,
            "hash_queries": self.hash_queries,
            "sign_queries": self.sign_queries,
            "steps": [[name, prob] for name, prob in self.step_probs],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


Adversary = Callable[[ClassicalHandles], tuple[int, Sequence[int]]]


def run_classical_game(
    adversary: Adversary, params, epsilon: float, seed: int
) -> GameTranscript:
    """One blind-forgery run: keygen, blinding-set sampling, adversary, verdict.

    The scheme is inferred from the parameter type.  A second signing query
    aborts the run with a losing transcript; an adversary may concede by
    returning None instead of a forgery.
    """
    scheme = "lamport" if isinstance(params, ots.LamportParams) else "winternitz"
    oracle = rom.RandomOracleTable(params.n, seed=rom.derive_seed(seed, "oracle"))
    key_rng = np.random.default_rng(rom.derive_seed(seed, "keygen"))
    if scheme == "lamport":
        keypair = ots.lamport_keygen(params, oracle, key_rng)
    else:
        keypair = ots.wots_keygen(params, oracle, key_rng)
    blinding = sample_blinding_set(
        epsilon, params.message_bits, np.random.default_rng(rom.derive_seed(seed, "blinding"))
    )
    return run_with_world_classical(adversary, params, oracle, keypair, blinding, seed)


def run_with_world_classical(
    adversary: Adversary, params, oracle, keypair, blinding: BlindingSet, seed: int
) -> GameTranscript:
    """The blind-forgery run against pre-built world pieces, so an exact
    reference computation can share the identical keys, oracle, and blinding."""
    scheme = keypair.scheme
    handles = ClassicalHandles(keypair, blinding, oracle)
    transcript = GameTranscript(
        scheme=scheme, seed=seed, epsilon=blinding.epsilon, blinding=blinding.sorted_members()
    )
    try:
        forgery = adversary(handles)
    except SecondSignQuery:
        transcript.aborted = True
        transcript.verdict = "abort"
        transcript.hash_queries = handles.hash_queries
        transcript.sign_queries = handles.sign_queries
        return transcript
    transcript.hash_queries = handles.hash_queries
    transcript.sign_queries = handles.sign_queries
    if forgery is None:  # the adversary may concede instead of guessing
        return transcript
    m_star, sigma_star = forgery
    transcript.m_star = int(m_star)
    transcript.sigma_star = tuple(int(s) for s in sigma_star)
    if scheme == "lamport":
        ok = ots.lamport_verify(params, keypair.pk, transcript.m_star, transcript.sigma_star, oracle)
    else:
        ok = ots.wots_verify(params, keypair.pk, transcript.m_star, transcript.sigma_star, oracle)
    transcript.verdict = "win" if (ok and transcript.m_star in blinding) else "lose"
    return transcript


# ---------------------------------------------------------------------------
# Adversary programs


@dataclass(frozen=True, eq=False)
class ApplyUnitary:
    registers: tuple[str, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class HashQuery:
    pass


@dataclass(frozen=True)
class SignQuery:
    pass


@dataclass(frozen=True)
class MeasureM:
    pass


@dataclass(frozen=True)
class MeasureSigma:
    pass


@dataclass(frozen=True, eq=False)
class AdversaryProgram:
    steps: tuple

    def __post_init__(self):
        kinds = [type(s) for s in self.steps]
        if kinds.count(SignQuery) > 1:
            raise ValueError("at most one signing query per program")
        if kinds.count(MeasureM) != 1 or kinds.count(MeasureSigma) != 1:
            raise ValueError("programs end with one message and one signature measurement")
        if kinds[-2:] != [MeasureM, MeasureSigma]:
            raise ValueError("measurements must be the final two steps")

    @property
    def q0(self) -> int:
        before = True
        count = 0
        for s in self.steps:
            if isinstance(s, SignQuery):
                before = False
            elif isinstance(s, HashQuery) and before:
                count += 1
        return count

    @property
    def q1(self) -> int:
        after = False
        count = 0
        for s in self.steps:
            if isinstance(s, SignQuery):
                after = True
            elif isinstance(s, HashQuery) and after:
                count += 1
        return count


def random_local_unitary(
    layout: qsim.RegisterLayout,
    candidates: Sequence[str],
    rng: np.random.Generator,
    max_qubits: int = 6,
) -> ApplyUnitary:
    names = list(candidates)
    rng.shuffle(names)
    chosen: list[str] = []
    width = 0
    for name in names:
        w = layout.width(name)
        if width + w <= max_qubits and len(chosen) < 3:
            chosen.append(name)
            width += w
        if len(chosen) == 3:
            break
    if not chosen:
        raise ValueError("no registers available for a local unitary")
    return ApplyUnitary(tuple(chosen), qsim.haar_unitary(1 << width, rng))


def random_program(
    world: ChainWorld, q0: int, q1: int, seed: int, include_xy: bool | None = None
) -> AdversaryProgram:
    """Random adversary: local Haar unitaries interleaved with q0 hash queries,
    one signing query, q1 more hash queries, then the final measurements."""
    if include_xy is None:
        include_xy = q0 + q1 > 0
    layout = world.game_layout(include_xy=include_xy)
    chain_regs = set(world.chain_registers())
    candidates = [name for name in layout.names if name not in chain_regs]
    rng = np.random.default_rng(rom.derive_seed(seed, "program"))
    steps: list = [random_local_unitary(layout, candidates, rng)]
    for _ in range(q0):
        steps.append(HashQuery())
        steps.append(random_local_unitary(layout, candidates, rng))
    steps.append(SignQuery())
    for _ in range(q1):
        steps.append(random_local_unitary(layout, candidates, rng))
        steps.append(HashQuery())
    steps.append(random_local_unitary(layout, candidates, rng))
    steps.append(MeasureM())
    steps.append(MeasureSigma())
    return AdversaryProgram(tuple(steps))


# ---------------------------------------------------------------------------
# Quantum execution


@dataclass
class EvolvedStates:
    layout: qsim.RegisterLayout
    final: np.ndarray
    pre_sign: np.ndarray | None
    post_sign: np.ndarray | None


def evolve_program(
    program: AdversaryProgram, world: ChainWorld, include_xy: bool | None = None
) -> EvolvedStates:
    """Run all unitary steps; capture the states bracketing the signing query."""
    needs_xy = any(isinstance(s, HashQuery) for s in program.steps)
    if include_xy is None:
        include_xy = needs_xy
    if needs_xy and not include_xy:
        raise ValueError("hash queries need the x/y registers")
    layout = world.game_layout(include_xy=include_xy)
    state = world.initial_state(layout).amplitudes
    u_h = build_query_unitary(world, layout) if needs_xy else None
    bsign = build_blinded_sign_unitary(world, layout)
    pre_sign = post_sign = None
    for step in program.steps:
        if isinstance(step, ApplyUnitary):
            state = qsim.embed(step.matrix, step.registers, layout).apply(state)
        elif isinstance(step, HashQuery):
            state = u_h.apply(state)
        elif isinstance(step, SignQuery):
            pre_sign = state.copy()
            state = bsign.apply(state)
            post_sign = state.copy()
        elif isinstance(step, (MeasureM, MeasureSigma)):
            break
        else:
            raise TypeError(f"unknown step {step!r}")
    return EvolvedStates(layout=layout, final=state, pre_sign=pre_sign, post_sign=post_sign)


def _tensor_dims(layout: qsim.RegisterLayout, world: ChainWorld) -> tuple[int, int, int, int, int]:
    """(pre, message, signature, mid, chains) axis sizes, using the layout order."""
    names = list(layout.names)
    m_at = names.index("m")
    sig_names = list(world.sigma_registers())
    first_sig = names.index(sig_names[0])
    chain_names = list(world.chain_registers())
    first_chain = names.index(chain_names[0])
    pre = 1
    for name in names[:m_at]:
        pre <<= layout.width(name)
    m_dim = 1 << layout.width("m")
    sig_dim = 1 << (world.n * world.l_sem)
    mid = 1
    for name in names[first_sig + len(sig_names) : first_chain]:
        mid <<= layout.width(name)
    gamma = 1 << (world.n * len(chain_names))
    return pre, m_dim, sig_dim, mid, gamma


def probability_tensor(amps: np.ndarray, layout: qsim.RegisterLayout, world: ChainWorld) -> np.ndarray:
    """Joint outcome weights over (message, signature, chains), tracing the rest."""
    dims = _tensor_dims(layout, world)
    t = np.abs(amps.reshape(dims)) ** 2
    return t.sum(axis=(0, 3))


def gamma_assignment(world: ChainWorld, gamma_index: int) -> dict[str, int]:
    regs = world.chain_registers()
    out = {}
    mask = (1 << world.n) - 1
    for k, name in enumerate(regs):
        shift = (len(regs) - 1 - k) * world.n
        out[name] = (gamma_index >> shift) & mask
    return out


def acceptance_table(world: ChainWorld) -> np.ndarray:
    """accept[m, sigma, gamma]: does the verifier, run against the oracle
    reprogrammed on the sampled chain values, accept that signature?"""
    n, l = world.n, world.l_sem
    m_dim = 1 << world.message_bits
    gamma_dim = 1 << (n * len(world.chain_registers()))
    sig_dim = 1 << (n * l)
    table = np.zeros((m_dim, sig_dim, gamma_dim), dtype=bool)
    for m in range(m_dim):
        if world.scheme == "lamport":
            bits = [(m >> (l - 1 - i)) & 1 for i in range(l)]
            steps = [1] * l
            targets = [world.p[2 * i + bits[i]] for i in range(l)]
        else:
            b = ots.digit_vector(m, world.params)
            steps = [world.w - 1 - b[i] for i in range(l)]
            targets = [world.p[i] for i in range(l)]
        for g in range(gamma_dim):
            oracle = world.overlay_oracle(gamma_assignment(world, g))
            htab = [oracle(x) for x in range(1 << n)]
            acc = np.array(True)
            for i in range(l):
                vals = np.arange(1 << n)
                for _ in range(steps[i]):
                    vals = np.array([htab[v] for v in vals])
                valid = vals == targets[i]
                acc = np.logical_and.outer(acc, valid)
            table[m, :, g] = acc.reshape(-1)
    return table


@dataclass
class GameAnalysis:
    exact: bool
    p_win_plain: float
    p_win_modified: float
    p_forced_outcome_blinded: float
    trials: int = 0
    wilson_low: float = 0.0
    wilson_high: float = 1.0


def analyze_game(
    program: AdversaryProgram, world: ChainWorld
) -> tuple[EvolvedStates, np.ndarray, list[np.ndarray], np.ndarray, GameAnalysis]:
    """Exact outcome analysis of one program.

    Returns the evolved states, the plain joint tensor, the per-outcome joint
    tensors (measurement-controlled, endpoint weights folded in), the
    acceptance table, and the summary.
    """
    states = evolve_program(program, world)
    layout = states.layout
    sig_dim = 1 << (world.n * world.l_sem)
    if (1 << world.message_bits) * sig_dim > EXACT_OUTCOME_CAP:
        raise ValueError("outcome space too large for exact analysis")
    t_plain = probability_tensor(states.final, layout, world)
    qtilde = build_qtilde(world, layout)
    t_outcomes = [
        probability_tensor(q.apply(states.final), layout, world) for q in qtilde
    ]
    accept = acceptance_table(world)
    blinded = np.zeros(1 << world.message_bits, dtype=bool)
    for m in world.blinding.members if world.blinding else ():
        blinded[m] = True
    p_plain = float((t_plain[blinded] * accept[blinded]).sum())
    p_mod = float(sum((t[blinded] * accept[blinded]).sum() for t in t_outcomes))
    p_forced = float(t_outcomes[-1][blinded].sum())
    summary = GameAnalysis(
        exact=True,
        p_win_plain=p_plain,
        p_win_modified=p_mod,
        p_forced_outcome_blinded=p_forced,
    )
    return states, t_plain, t_outcomes, accept, summary


def _sample_from(weights: np.ndarray, rng: np.random.Generator) -> int:
    total = weights.sum()
    if total <= 0:
        raise ValueError("cannot sample from zero mass")
    return int(rng.choice(len(weights), p=weights / total))


def run_quantum_game(
    program: AdversaryProgram,
    world: ChainWorld,
    mode: str = "plain",
    seed: int = 0,
    mc_trials: int = 2000,
) -> tuple[GameTranscript, GameAnalysis]:
    """Execute a program, sample one transcript, and report probabilities.

    Probabilities are computed exactly by outcome enumeration whenever the
    joint (message, signature) space fits the cap, and by ``mc_trials``
    sampling runs with a Wilson interval otherwise.  ``mode="modified"``
    inserts the first-uniform-register measurement between the forgery output
    and the chain sampling; the transcript then carries the sampled outcome
    index (l+1 meaning "none uniform").
    """
    if mode not in ("plain", "modified"):
        raise ValueError(f"unknown mode {mode!r}")
    if world.blinding is None:
        raise ValueError("world has no blinding set")
    sig_dim = 1 << (world.n * world.l_sem)
    if (1 << world.message_bits) * sig_dim > EXACT_OUTCOME_CAP:
        return _run_quantum_game_sampled(program, world, mode, seed, mc_trials)
    states, t_plain, t_outcomes, accept, summary = analyze_game(program, world)
    rng = np.random.default_rng(rom.derive_seed(seed, "game-sampling"))
    transcript = GameTranscript(
        scheme=world.scheme,
        seed=seed,
        epsilon=world.blinding.epsilon,
        blinding=world.blinding.sorted_members(),
        mode=mode,
        hash_queries=program.q0 + program.q1,
        sign_queries=sum(isinstance(s, SignQuery) for s in program.steps),
    )
    joint_ms = t_plain.sum(axis=2)
    flat = joint_ms.reshape(-1)
    pick = _sample_from(flat, rng)
    m_star, sigma_star_idx = divmod(pick, joint_ms.shape[1])
    step_probs = [("measure_m", float(joint_ms[m_star].sum() / flat.sum()))]
    step_probs.append(("measure_sigma", float(flat[pick] / max(joint_ms[m_star].sum(), 1e-300))))
    if mode == "modified":
        outcome_w = np.array([t[m_star, sigma_star_idx].sum() for t in t_outcomes])
        q_outcome = _sample_from(outcome_w, rng) + 1
        transcript.q_outcome = q_outcome
        step_probs.append(("q_outcome", float(outcome_w[q_outcome - 1] / outcome_w.sum())))
        gamma_w = t_outcomes[q_outcome - 1][m_star, sigma_star_idx]
    else:
        gamma_w = t_plain[m_star, sigma_star_idx]
    g = _sample_from(gamma_w, rng)
    win = bool(accept[m_star, sigma_star_idx, g]) and (m_star in world.blinding)
    n, l = world.n, world.l_sem
    transcript.m_star = int(m_star)
    transcript.sigma_star = tuple(
        (sigma_star_idx >> ((l - 1 - i) * n)) & ((1 << n) - 1) for i in range(l)
    )
    transcript.verdict = "win" if win else "lose"
    transcript.p_success = summary.p_win_modified if mode == "modified" else summary.p_win_plain
    transcript.step_probs = tuple(step_probs)
    return transcript, summary


def _run_quantum_game_sampled(
    program: AdversaryProgram, world: ChainWorld, mode: str, seed: int, trials: int
) -> tuple[GameTranscript, GameAnalysis]:
    analysis = estimate_success_sampling(program, world, mode, trials, seed)
    states = evolve_program(program, world)
    rng = np.random.default_rng(rom.derive_seed(seed, "game-sampling"))
    m_star, sigma, q_outcome, _, win = _sample_run(states, world, mode, rng)
    rate = analysis.p_win_modified if mode == "modified" else analysis.p_win_plain
    transcript = GameTranscript(
        scheme=world.scheme,
        seed=seed,
        epsilon=world.blinding.epsilon,
        blinding=world.blinding.sorted_members(),
        mode=mode,
        m_star=m_star,
        sigma_star=tuple(sigma),
        verdict="win" if win else "lose",
        q_outcome=q_outcome,
        p_success=rate,
        hash_queries=program.q0 + program.q1,
        sign_queries=sum(isinstance(s, SignQuery) for s in program.steps),
    )
    return transcript, analysis


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _sample_run(states: EvolvedStates, world: ChainWorld, mode: str, rng):
    """One measurement cascade on the evolved state; returns the sampled
    forgery, outcome index, chain assignment, and verdict."""
    layout = states.layout
    amps = states.final / np.linalg.norm(states.final)
    sv = qsim.StateVector(layout, amps)
    m_star, sv = qsim.measure("m", sv, rng)
    sigma = []
    for name in world.sigma_registers():
        v, sv = qsim.measure(name, sv, rng)
        sigma.append(v)
    q_outcome = None
    if mode == "modified":
        projs = build_q_projectors(world, m_star, layout)
        weights = []
        branches = []
        for q in projs:
            branch = q.apply(sv.amplitudes)
            weights.append(q.weight * float(np.real(np.vdot(branch, branch))))
            branches.append(branch)
        k = _sample_from(np.array(weights), rng)
        q_outcome = k + 1
        sv = qsim.StateVector(layout, branches[k] / np.linalg.norm(branches[k]))
    assignment = {}
    for name in world.chain_registers():
        v, sv = qsim.measure(name, sv, rng)
        assignment[name] = v
    win = m_star in world.blinding and world.verify(m_star, sigma, assignment)
    return m_star, sigma, q_outcome, assignment, win


def estimate_success_sampling(
    program: AdversaryProgram, world: ChainWorld, mode: str, trials: int, seed: int
) -> GameAnalysis:
    """Monte-Carlo winning-rate estimate via state-level sampling.

    The fallback path for outcome spaces too large to enumerate; also usable
    as an independent check of the exact analysis.
    """
    states = evolve_program(program, world)
    rng = np.random.default_rng(rom.derive_seed(seed, "game-mc"))
    wins = 0
    for _ in range(trials):
        wins += _sample_run(states, world, mode, rng)[4]
    low, high = wilson_interval(wins, trials)
    rate = wins / trials if trials else 0.0
    return GameAnalysis(
        exact=False,
        p_win_plain=rate if mode == "plain" else float("nan"),
        p_win_modified=rate if mode == "modified" else float("nan"),
        p_forced_outcome_blinded=float("nan"),
        trials=trials,
        wilson_low=low,
        wilson_high=high,
    )
