"""Numerical verification of the quantitative claims behind the two schemes.

Every check measures a quantity on a concrete small world and compares it to
the corresponding closed-form bound.  At desk scale most bounds are vacuous
(far above the trivial norm cap), so the checks also record the measured
value; the falsifiable content is the exact-zero and exact-equality cases and
the inequality direction everywhere else.  A report line never asserts
anything the formulas do not claim.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import game, ots, qsim, rom
from .qworlds import (
    BlindingSet,
    ChainWorld,
    build_invariant_projector,
    build_q_projectors,
    build_query_unitary,
    build_qtilde,
    chain_world,
    invariant_projector_from_thresholds,
    lamport_world,
    query_unitary_as_function,
    winternitz_world,
)

PASS_SLACK = 1e-8
ZERO_PROBE_THRESHOLD = 1e-10


# ---------------------------------------------------------------------------
# Bound formulas


def eps_lamport(n: int) -> float:
    return 6.0 * 2.0 ** (-n / 2)


def delta_lamport(n: int, l: int) -> float:
    return 32.0 * l * 2.0 ** (-n / 2)


def eps_winternitz(n: int, w: int) -> float:
    return 6.0 * (w - 1) * 2.0 ** (-n / 2)


def delta_winternitz(n: int, l: int, w: int) -> float:
    return 8.0 * l * (w + 1) * (w - 1) * 2.0 ** (-n / 2)


def presign_drift_bound(scheme: str, n: int, l: int, w: int, q0: int) -> float:
    if scheme == "lamport":
        return 2.0 * l * q0 * eps_lamport(n)
    return float(l) * q0 * eps_winternitz(n, w)


def invariant_drift_bound(scheme: str, n: int, l: int, w: int, q0: int, q1: int) -> float:
    """Bound for the post-query distance from the invariant subspace.

    The commutator term scales with the queries after signing; the state
    entering the signing query contributes twice the pre-sign drift.  The
    published per-query coefficients exist in several variants, so the looser
    of all of them is asserted and the composite stays zero exactly when no
    query was made at all.
    """
    if scheme == "lamport":
        return q1 * delta_lamport(n, l) + 4.0 * l * max(q0, q1) * eps_lamport(n)
    per_query = max(2.0 * l * q0, 4.0 * l * q1, 2.0 * l * (w - 1) * q1)
    return q1 * delta_winternitz(n, l, w) + per_query * eps_winternitz(n, w)


def forgery_bound_lamport(q: int, l: int, n: int) -> tuple[float, float]:
    """(full, simplified) success bounds, clamped at 1; the simplified form
    applies for q > 0."""
    full = l * l * 2.0 ** (-n) * (3137.0 * q * q * (l + 1) + 12.0)
    simple = 6286.0 * q * q * l ** 3 * 2.0 ** (-n)
    return min(1.0, full), min(1.0, simple)


def forgery_bound_winternitz(q: int, l: int, w: int, n: int) -> tuple[float, float]:
    full = 2.0 ** (-n) * (
        (1.0 + q * q * l * l * (w - 1) ** 2 * (20.0 * w - 4.0) ** 2) * (l + 1)
        + 3.0 * w * w * l * l
    )
    simple = 800.0 * w ** 4 * q * q * l ** 3 * 2.0 ** (-n)
    return min(1.0, full), min(1.0, simple)


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class CheckReport:
    lemma: str
    scheme: str
    n: int
    l: int
    w: int
    q0: int
    q1: int
    measured: float
    bound: float
    passed: bool
    runtime_ms: float
    note: str = ""


def _report(lemma, scheme, n, l, w, q0, q1, measured, bound, t0, note="") -> CheckReport:
    return CheckReport(
        lemma=lemma,
        scheme=scheme,
        n=n,
        l=l,
        w=w,
        q0=q0,
        q1=q1,
        measured=float(measured),
        bound=float(bound),
        passed=bool(measured <= bound + PASS_SLACK),
        runtime_ms=(time.perf_counter() - t0) * 1000.0,
        note=note,
    )


CSV_HEADER = "lemma,scheme,n,l,w,q0,q1,measured,bound,pass,runtime_ms"


def reports_to_csv(reports, include_runtime: bool = False) -> str:
    """CSV per the report schema.  Wall-clock timing is volatile, so report
    files carry it as 0 unless explicitly requested; same seed then means
    byte-identical files."""
    lines = [CSV_HEADER]
    for r in reports:
        rt = f"{r.runtime_ms:.3f}" if include_runtime else "0"
        lines.append(
            f"{r.lemma},{r.scheme},{r.n},{r.l},{r.w},{r.q0},{r.q1},"
            f"{r.measured!r},{r.bound!r},{str(r.passed).lower()},{rt}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Individual checks


def check_equality_uniform_overlap(n: int, seed: int = 0) -> list[CheckReport]:
    """Norm of (equality projector) x (uniform projector) is exactly 2^-n/2,
    and their commutator norm is at most twice that."""
    t0 = time.perf_counter()
    layout = qsim.RegisterLayout([("x", n), ("y", n)])
    p_eq = qsim.equality_projector_map(layout, "x", "y")
    phi_y = qsim.uniform_projector_map(layout, ("y",))
    overlap = qsim.operator_norm(p_eq @ phi_y, seed=rom.derive_seed(seed, "overlap", n))
    expected = 2.0 ** (-n / 2)
    rep1 = _report(
        "uniform-overlap-norm", "", n, 0, 0, 0, 0, abs(overlap.value - expected), 1e-8, t0,
        note=f"norm={overlap.value!r}",
    )
    t1 = time.perf_counter()
    comm = qsim.operator_norm(
        qsim.commutator(p_eq, phi_y), seed=rom.derive_seed(seed, "overlap-comm", n)
    )
    rep2 = _report(
        "uniform-overlap-commutator", "", n, 0, 0, 0, 0, comm.value, 2.0 * expected, t1
    )
    return [rep1, rep2]


def _eps_bound(scheme: str, n: int, w: int) -> float:
    return eps_lamport(n) if scheme == "lamport" else eps_winternitz(n, w)


def check_uniform_register_commutator(
    scheme: str, n: int, l: int, w: int = 2, j_prime: int | None = None, seed: int = 0
) -> list[CheckReport]:
    """Oracle-query unitary vs the projector keeping chain prefixes uniform.

    Lamport targets are the 2l single secret-string registers; the chain
    scheme targets are the per-chain prefix products up to position j'.  The
    worst measured norm over all targets is reported against one bound.
    """
    t0 = time.perf_counter()
    if scheme == "lamport":
        world = lamport_world(n, l, seed=rom.derive_seed(seed, "eps-world"))
        layout = world.norm_layout()
        u_h = build_query_unitary(world, layout)
        targets = [(world.chain_register(c, 0),) for c in range(world.chain_count)]
    else:
        world = chain_world(n, l, w, seed=rom.derive_seed(seed, "eps-world"))
        layout = world.norm_layout()
        u_h = build_query_unitary(world, layout)
        js = range(w - 1) if j_prime is None else [j_prime]
        targets = [
            tuple(world.chain_register(i, j) for j in range(jp + 1))
            for i in range(l)
            for jp in js
        ]
    worst = 0.0
    converged = True
    for k, regs in enumerate(targets):
        phi = qsim.uniform_projector_map(layout, regs)
        est = qsim.operator_norm(
            qsim.commutator(u_h, phi), seed=rom.derive_seed(seed, "eps", n, l, w, k)
        )
        worst = max(worst, est.value)
        converged = converged and est.converged
    note = "" if converged else "power iteration not converged"
    return [
        _report(
            "uniform-commutator", scheme, n, l, w, 0, 0, worst, _eps_bound(scheme, n, w), t0,
            note=note,
        )
    ]


def _find_wots_a(l: int, w: int) -> int | None:
    for a in range(1, 17):
        p = ots.derive_wots_params(a, w, 2, require_power_of_two=False)
        if p.l == l:
            return a
    return None


def _blinding_for(world_bits: int, seed: int, require_unblinded: bool = True) -> BlindingSet:
    rng = np.random.default_rng(rom.derive_seed(seed, "blinding"))
    for _ in range(64):
        b = game.sample_blinding_set(0.5, world_bits, rng)
        if not require_unblinded or len(b) < (1 << world_bits):
            return b
    raise RuntimeError("could not sample a blinding set with unblinded messages")


def _delta_world(scheme: str, n: int, l: int, w: int, seed: int):
    """A world plus the threshold vectors its invariant projector is built from."""
    if scheme == "lamport":
        world = lamport_world(
            n, l, blinding=_blinding_for(l, seed), seed=rom.derive_seed(seed, "delta-world")
        )
        thresholds = [world.thresholds(m) for m in world.unblinded()]
        return world, thresholds
    a = _find_wots_a(l, w)
    if a is not None:
        world = winternitz_world(
            n, a, w, blinding=_blinding_for(a, seed), seed=rom.derive_seed(seed, "delta-world")
        )
        thresholds = [world.thresholds(m) for m in world.unblinded()]
        return world, thresholds
    # No message length encodes to l blocks; exercise the projector on explicit
    # per-chain reveal thresholds instead (the commutator bound only needs the
    # threshold-union structure, not the checksum).
    world = chain_world(n, l, w, seed=rom.derive_seed(seed, "delta-world"))
    rng = np.random.default_rng(rom.derive_seed(seed, "delta-thresholds"))
    count = 1 + int(rng.integers(0, 3))
    thresholds = [tuple(int(rng.integers(0, w)) for _ in range(l)) for _ in range(count)]
    return world, thresholds


def check_invariant_commutator(
    scheme: str, n: int, l: int, w: int = 2, seed: int = 0
) -> list[CheckReport]:
    """Oracle-query unitary vs the signed-at-most-one-unblinded-message projector."""
    t0 = time.perf_counter()
    world, thresholds = _delta_world(scheme, n, l, w, seed)
    layout = world.norm_layout()
    u_h = build_query_unitary(world, layout)
    p = invariant_projector_from_thresholds(world, thresholds, layout)
    bound = delta_lamport(n, l) if scheme == "lamport" else delta_winternitz(n, l, w)
    if getattr(p, "is_zero", False):
        return [
            _report(
                "invariant-commutator", scheme, n, l, w, 0, 0, 0.0, bound, t0,
                note="everything blinded: projector is zero",
            )
        ]
    est = qsim.operator_norm(
        qsim.commutator(u_h, p), seed=rom.derive_seed(seed, "delta", n, l, w)
    )
    note = f"terms={getattr(p, 'term_count', -1)}"
    if not est.converged:
        note += "; power iteration not converged"
    return [_report("invariant-commutator", scheme, n, l, w, 0, 0, est.value, bound, t0, note=note)]


def orthogonality_report(world: ChainWorld, m_star: int, seed: int = 0) -> CheckReport:
    t0 = time.perf_counter()
    scheme, n, l, w = world.scheme, world.n, world.l_sem, world.w
    if world.blinding is None or m_star not in world.blinding:
        return _report(
            "orthogonality", scheme, n, l, w, 0, 0, 0.0, ZERO_PROBE_THRESHOLD, t0,
            note="skipped: forgery message not blinded, outside claim scope",
        )
    layout = world.chain_layout()
    p = build_invariant_projector(world, layout)
    q_last = build_q_projectors(world, m_star, layout)[-1]
    measured = qsim.probe_max_ratio(q_last @ p, seed=rom.derive_seed(seed, "orth"))
    return _report("orthogonality", scheme, n, l, w, 0, 0, measured, ZERO_PROBE_THRESHOLD, t0)


def check_orthogonality(
    scheme: str, n: int, l: int, w: int, blinding: BlindingSet, m_star: int, seed: int = 0
) -> list[CheckReport]:
    """The none-uniform forgery outcome annihilates the invariant subspace."""
    if scheme == "lamport":
        world = lamport_world(n, l, blinding=blinding, seed=rom.derive_seed(seed, "orth-world"))
    else:
        a = _find_wots_a(l, w)
        if a is None:
            raise ValueError(f"no message length encodes to {l} blocks at w={w}")
        world = winternitz_world(
            n, a, w, blinding=blinding, seed=rom.derive_seed(seed, "orth-world")
        )
    return [orthogonality_report(world, m_star, seed)]


def _drift_world(scheme: str, n: int, l: int, w: int, seed: int) -> ChainWorld:
    if scheme == "lamport":
        return lamport_world(
            n, l, blinding=_blinding_for(l, seed), seed=rom.derive_seed(seed, "drift-world")
        )
    a = _find_wots_a(l, w)
    if a is None:
        raise ValueError(f"no message length encodes to {l} blocks at w={w}")
    return winternitz_world(
        n, a, w, blinding=_blinding_for(a, seed), seed=rom.derive_seed(seed, "drift-world")
    )


def check_state_drift(
    scheme: str, n: int, l: int, w: int, q0: int, q1: int, program_seed: int = 0
) -> list[CheckReport]:
    """Three state-distance measurements on one random interleaved program:

    (a) pre-sign distance of the chain registers from full uniformity,
    (b) final-state distance from the invariant subspace,
    (c) mass of the none-uniform outcome on blinded forgery messages.
    """
    t0 = time.perf_counter()
    world = _drift_world(scheme, n, l, w, program_seed)
    program = game.random_program(world, q0, q1, seed=rom.derive_seed(program_seed, "drift-prog"))
    states = game.evolve_program(program, world)
    layout = states.layout
    psi0 = states.pre_sign
    phi_all = qsim.uniform_projector_map(layout, world.chain_registers())
    a_meas = float(np.linalg.norm(phi_all.apply(psi0) - psi0))
    a_bound = presign_drift_bound(scheme, n, world.l_sem, w, q0)
    rep_a = _report("drift-presign", scheme, n, l, w, q0, q1, a_meas, a_bound, t0)

    t1 = time.perf_counter()
    p = build_invariant_projector(world, layout)
    psi1 = states.final
    b_meas = float(np.linalg.norm(p.apply(psi1) - psi1))
    bc_bound = invariant_drift_bound(scheme, n, world.l_sem, w, q0, q1)
    # the per-query coefficient has inconsistent published variants for the
    # chain scheme; the composite asserts the loosest of them (see the bound)
    bc_note = "loosest published per-query form" if scheme == "winternitz" else ""
    rep_b = _report("drift-invariant", scheme, n, l, w, q0, q1, b_meas, bc_bound, t1, note=bc_note)

    t2 = time.perf_counter()
    mfield = layout.field("m")
    blinded_mask = np.zeros(layout.dim, dtype=bool)
    for m in world.blinding.members:
        blinded_mask |= mfield == m
    q_last = build_qtilde(world, layout)[-1]
    c_meas = float(np.linalg.norm(q_last.apply(np.where(blinded_mask, psi1, 0.0))))
    rep_c = _report("drift-forced-outcome", scheme, n, l, w, q0, q1, c_meas, bc_bound, t2, note=bc_note)
    return [rep_a, rep_b, rep_c]


def check_pinching(k: int, trials: int = 100, seed: int = 0) -> list[CheckReport]:
    """Inserting a k-outcome projective measurement costs at most a factor k
    on any output probability; verified exactly on random instances."""
    t0 = time.perf_counter()
    if k > 8:
        raise ValueError("pinching check capped at k <= 8")
    rng = np.random.default_rng(rom.derive_seed(seed, "pinching", k))
    dim = 4
    worst = -1.0
    for _ in range(trials):
        psi = qsim.random_state_vector(dim, rng)
        basis_change = qsim.haar_unitary(dim, rng)
        groups = [[] for _ in range(k)]
        for i in range(dim):
            groups[int(rng.integers(0, k))].append(i)
        v = qsim.haar_unitary(dim, rng)
        out = v @ psi
        p_direct = np.abs(out) ** 2
        p_paused = np.zeros(dim)
        for members in groups:
            sel = np.zeros(dim)
            sel[members] = 1.0
            proj = basis_change @ np.diag(sel) @ basis_change.conj().T
            p_paused += np.abs(v @ (proj @ psi)) ** 2
        worst = max(worst, float(np.max(p_direct / k - p_paused)))
    return [_report("pinching", "", 0, 0, 0, 0, 0, worst, 0.0, t0, note=f"k={k} trials={trials}")]


def check_world_closeness(n: int, l: int, w: int) -> list[CheckReport]:
    """Exact chain-tuple distributions: iterated-oracle vs independent-uniform."""
    t0 = time.perf_counter()
    p, q = rom.enumerate_chain_distributions(n, l, w)
    stats = rom.tv_and_collision_stats(p, q, n, l, w)
    rep_tv = _report(
        "chain-distribution-tv", "", n, l, w, 0, 0, stats.tv, stats.tv_bound, t0,
        note=f"p_coll={stats.p_collision!r} q_coll={stats.q_collision!r}",
    )
    t1 = time.perf_counter()
    rep_cond = _report(
        "chain-distribution-conditional", "", n, l, w, 0, 0,
        0.0 if stats.conditional_equal else 1.0, 0.0, t1,
        note="entrywise equality on collision-free tuples",
    )
    t2 = time.perf_counter()
    rep_coll = _report(
        "chain-distribution-collisions", "", n, l, w, 0, 0,
        max(stats.p_collision, stats.q_collision), stats.collision_bound, t2,
    )
    return [rep_tv, rep_cond, rep_coll]


def check_oracle_reprogramming_consistency(
    scheme: str, n: int, l: int, w: int = 2, seed: int = 0
) -> list[CheckReport]:
    """The query unitary on basis chain states reproduces the classical
    reprogrammed oracle exactly, for every chain assignment and input."""
    t0 = time.perf_counter()
    if scheme == "lamport":
        world = lamport_world(n, l, seed=rom.derive_seed(seed, "iw-world"))
    else:
        a = _find_wots_a(l, w)
        if a is not None:
            world = winternitz_world(n, a, w, seed=rom.derive_seed(seed, "iw-world"))
        else:
            world = chain_world(n, l, w, seed=rom.derive_seed(seed, "iw-world"))
    regs = world.chain_registers()
    if len(regs) * n > 10:
        raise ValueError("chain assignment space too large for exhaustive comparison")
    mismatches = 0
    total = 0
    for bits in range(1 << (len(regs) * n)):
        assignment = {
            name: (bits >> ((len(regs) - 1 - k) * n)) & ((1 << n) - 1)
            for k, name in enumerate(regs)
        }
        classical = world.overlay_oracle(assignment)
        quantum = query_unitary_as_function(world, assignment)
        for x in range(1 << n):
            total += 1
            if quantum[x] != classical(x):
                mismatches += 1
    return [
        _report(
            "oracle-consistency", world.scheme, n, l, w, 0, 0, float(mismatches), 0.0, t0,
            note=f"checked {total} (assignment, input) pairs",
        )
    ]


# ---------------------------------------------------------------------------
# Sweep


def run_sweep(
    seed: int = 0,
    ns=(1, 2),
    ls=(1, 2),
    ws=(2, 3),
    drift_qs=(0, 1),
) -> list[CheckReport]:
    """The default verification grid.  Lamport points ignore w; chain-scheme
    points with no message encoding of the requested block count fall back to
    explicit thresholds where the claim permits it and are skipped where the
    checksum structure is essential."""
    reports: list[CheckReport] = []
    for n in (1, 2, 3, 4):
        reports += check_equality_uniform_overlap(n, seed=seed)
    reports += check_pinching(1, trials=20, seed=seed)
    reports += check_pinching(2, trials=50, seed=seed)
    for n in ns:
        for l in ls:
            reports += check_uniform_register_commutator("lamport", n, l, seed=seed)
            reports += check_invariant_commutator("lamport", n, l, seed=seed)
            for w in ws:
                reports += check_uniform_register_commutator("winternitz", n, l, w, seed=seed)
                reports += check_invariant_commutator("winternitz", n, l, w, seed=seed)
    rng = np.random.default_rng(rom.derive_seed(seed, "sweep-orth"))
    idx = 0
    for n in ns:
        for l in ls:
            for _ in range(4):
                blinding = _blinding_for(l, rom.derive_seed(seed, "orth-b", idx), False)
                if len(blinding) == 0:
                    idx += 1
                    continue
                m_star = int(rng.choice(blinding.sorted_members()))
                reports += check_orthogonality("lamport", n, l, 2, blinding, m_star, seed=idx)
                idx += 1
        for w in ws:
            a = 1
            for _ in range(3):
                blinding = _blinding_for(a, rom.derive_seed(seed, "orth-bw", idx), False)
                if len(blinding) == 0:
                    idx += 1
                    continue
                m_star = int(rng.choice(blinding.sorted_members()))
                l = ots.derive_wots_params(a, w, n, require_power_of_two=False).l
                reports += check_orthogonality("winternitz", n, l, w, blinding, m_star, seed=idx)
                idx += 1
    for n in ns:
        for l in ls:
            for q0 in drift_qs:
                for q1 in drift_qs:
                    reports += check_state_drift(
                        "lamport", n, l, 2, q0, q1,
                        program_seed=rom.derive_seed(seed, "drift", n, l, q0, q1),
                    )
        for w in ws:
            l = ots.derive_wots_params(1, w, n, require_power_of_two=False).l
            for q0 in drift_qs:
                for q1 in drift_qs:
                    reports += check_state_drift(
                        "winternitz", n, l, w, q0, q1,
                        program_seed=rom.derive_seed(seed, "driftw", n, w, q0, q1),
                    )
    reports += check_world_closeness(4, 1, 2)
    for n in ns:
        for l in ls:
            reports += check_oracle_reprogramming_consistency("lamport", n, l, seed=seed)
        for w in ws:
            reports += check_oracle_reprogramming_consistency("winternitz", n, 2, w, seed=seed)
    reports += monotonicity_notes(reports)
    return reports


def monotonicity_notes(reports) -> list[CheckReport]:
    """Soft sanity: measured commutator norms should not grow with n at fixed
    (scheme, l, w).  Recorded as always-passing notes, not assertions."""
    t0 = time.perf_counter()
    keyed: dict = {}
    for r in reports:
        if r.lemma in ("uniform-commutator", "invariant-commutator"):
            keyed.setdefault((r.lemma, r.scheme, r.l, r.w), []).append((r.n, r.measured))
    notes = []
    for (lemma, scheme, l, w), pts in sorted(keyed.items()):
        pts.sort()
        monotone = all(b[1] <= a[1] + 1e-6 for a, b in zip(pts, pts[1:]))
        notes.append(
            _report(
                f"{lemma}-monotone", scheme, 0, l, w, 0, 0, 0.0, 0.0, t0,
                note=("non-increasing in n" if monotone else "not monotone in n (recorded)"),
            )
        )
    return notes
