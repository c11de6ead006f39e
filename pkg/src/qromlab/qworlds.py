"""Superposition hash-chain worlds and their operators.

A :class:`ChainWorld` holds the data of a game in which the intermediate hash
chain elements live in quantum registers, initially in the uniform
superposition, while the final chain elements (the public key) are classical
strings sampled up front.  The random oracle is answered by a unitary that
compares the query input against every chain register and XORs the successor
of each match into the output register, falling back to a fixed random
function on mismatch.

Register naming over a world with C chains of length w on n-bit strings:

``x`` / ``y``     oracle query input / output registers (n qubits each)
``m``             message register (l bits for Lamport, a bits for Winternitz)
``sig0..sig{l-1}`` signature output blocks (n qubits each)
``b``             one workspace qubit conventionally used as a blinded flag
``e``             adversary workspace (configurable width)
``g{c}_{j}``      chain c position j, for j <= w-2 (the quantum positions)

Chain position w-1 is never a qubit register: it is pinned to the classical
public-key string ``p[c]``, and every operator that formally touches it folds
the pinned value in exactly (a constant XOR for oracle and signing queries, a
scalar outcome weight for measurements).

Lamport is represented as 2l chains of length 2, chain ``2*i + j`` carrying
the secret string that signs bit value ``j`` at message position ``i``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import ots, qsim, rom
from .qsim import LinearMap, RegisterLayout

Source = tuple[str, object]  # ("q", register_name) or ("c", chain_index)


@dataclass(frozen=True)
class BlindingSet:
    """Explicit subset of an nbits-wide message space, with the inclusion rate
    that produced it (kept for reporting)."""

    nbits: int
    epsilon: float
    members: frozenset[int]

    def __post_init__(self):
        if any(not 0 <= m < (1 << self.nbits) for m in self.members):
            raise ValueError("blinding set member outside the message space")

    def __contains__(self, m: int) -> bool:
        return m in self.members

    def __len__(self) -> int:
        return len(self.members)

    def complement(self) -> tuple[int, ...]:
        return tuple(m for m in range(1 << self.nbits) if m not in self.members)

    def sorted_members(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))

    @staticmethod
    def none(nbits: int) -> "BlindingSet":
        return BlindingSet(nbits=nbits, epsilon=0.0, members=frozenset())

    @staticmethod
    def all(nbits: int) -> "BlindingSet":
        return BlindingSet(nbits=nbits, epsilon=1.0, members=frozenset(range(1 << nbits)))

    @staticmethod
    def explicit(nbits: int, members, epsilon: float = float("nan")) -> "BlindingSet":
        return BlindingSet(nbits=nbits, epsilon=epsilon, members=frozenset(members))


class ChainWorld:
    """Chains-in-superposition world for one scheme instance."""

    def __init__(
        self,
        scheme: str,
        n: int,
        w: int,
        chain_count: int,
        l_sem: int,
        message_bits: int | None,
        params,
        p: Sequence[int],
        h_table: Sequence[int],
        blinding: BlindingSet | None,
        seed: int,
        workspace_qubits: int = 2,
    ):
        if scheme not in ("lamport", "winternitz"):
            raise ValueError(f"unknown scheme {scheme!r}")
        if w < 2:
            raise ValueError("chains need at least two positions")
        if len(p) != chain_count:
            raise ValueError("need one public endpoint per chain")
        if len(h_table) != (1 << n):
            raise ValueError("oracle table must cover the full n-bit domain")
        if blinding is not None and message_bits is not None and blinding.nbits != message_bits:
            raise ValueError("blinding set width does not match the message space")
        self.scheme = scheme
        self.n = n
        self.w = w
        self.chain_count = chain_count
        self.l_sem = l_sem
        self.message_bits = message_bits
        self.params = params
        self.p = tuple(int(v) for v in p)
        self.h_table = tuple(int(v) for v in h_table)
        self.blinding = blinding
        self.seed = seed
        self.workspace_qubits = workspace_qubits
        self._layout_cache: dict = {}

    # -- registers ----------------------------------------------------------

    def chain_register(self, c: int, j: int) -> str:
        if not (0 <= c < self.chain_count and 0 <= j <= self.w - 2):
            raise ValueError(f"no quantum register for chain {c} position {j}")
        return f"g{c}_{j}"

    def chain_registers(self) -> tuple[str, ...]:
        return tuple(
            self.chain_register(c, j)
            for c in range(self.chain_count)
            for j in range(self.w - 1)
        )

    def sigma_registers(self) -> tuple[str, ...]:
        return tuple(f"sig{i}" for i in range(self.l_sem))

    def _layout(self, kind: str) -> RegisterLayout:
        cached = self._layout_cache.get(kind)
        if cached is not None:
            return cached
        n = self.n
        regs: list[tuple[str, int]] = []
        if kind in ("norm", "game"):
            regs += [("x", n), ("y", n)]
        if kind in ("game", "game-noxy"):
            if self.message_bits is None:
                raise ValueError("world has no message space")
            regs += [("m", self.message_bits)]
            regs += [(name, n) for name in self.sigma_registers()]
            regs += [("b", 1), ("e", self.workspace_qubits)]
        regs += [(name, n) for name in self.chain_registers()]
        layout = RegisterLayout(regs)
        self._layout_cache[kind] = layout
        return layout

    def norm_layout(self) -> RegisterLayout:
        """x, y and the chain registers; the operator-norm arena."""
        return self._layout("norm")

    def game_layout(self, include_xy: bool = True) -> RegisterLayout:
        """Full game arena; drop x/y for sign-only analyses."""
        return self._layout("game" if include_xy else "game-noxy")

    def chain_layout(self) -> RegisterLayout:
        """Chain registers only; enough for projector algebra."""
        return self._layout("chains")

    def initial_state(self, layout: RegisterLayout) -> qsim.StateVector:
        chain_regs = set(self.chain_registers())
        assignment = {name: 0 for name, _ in layout.registers if name not in chain_regs}
        return qsim.uniform_state(layout, chain_regs & set(layout.names), assignment)

    # -- scheme structure ---------------------------------------------------

    def messages(self) -> range:
        if self.message_bits is None:
            raise ValueError("world has no message space")
        return range(1 << self.message_bits)

    def unblinded(self) -> tuple[int, ...]:
        if self.blinding is None:
            return tuple(self.messages())
        return self.blinding.complement()

    def thresholds(self, m: int) -> tuple[int, ...]:
        """Per chain, the lowest position revealed by signing ``m``.

        Registers strictly below the threshold stay untouched by the signing
        query; threshold w-1 means only the public endpoint is exposed.
        """
        if self.scheme == "lamport":
            l = self.params.l
            bits = [(m >> (l - 1 - i)) & 1 for i in range(l)]
            out = []
            for i in range(l):
                for j in (0, 1):
                    out.append(0 if bits[i] == j else 1)
            return tuple(out)
        return ots.digit_vector(m, self.params)

    def relevant_registers(self, m: int) -> tuple[Source, ...]:
        """The l signature-relevant chain positions for message ``m``, in
        semantic order; classical endpoints appear as ("c", chain)."""
        if self.scheme == "lamport":
            l = self.params.l
            out = []
            for i in range(l):
                bit = (m >> (l - 1 - i)) & 1
                out.append(("q", self.chain_register(2 * i + bit, 0)))
            return tuple(out)
        b = ots.digit_vector(m, self.params)
        out = []
        for i in range(self.l_sem):
            if b[i] <= self.w - 2:
                out.append(("q", self.chain_register(i, b[i])))
            else:
                out.append(("c", i))
        return tuple(out)

    # -- classical oracles --------------------------------------------------

    def base_oracle(self, x: int) -> int:
        return self.h_table[x]

    def chain_tuple(self, assignment: Mapping[str, int]) -> rom.ChainTuple:
        rows = []
        for c in range(self.chain_count):
            row = [assignment[self.chain_register(c, j)] for j in range(self.w - 1)]
            row.append(self.p[c])
            rows.append(tuple(row))
        return rom.ChainTuple(n=self.n, l=self.chain_count, w=self.w, gamma=tuple(rows))

    def overlay_oracle(self, assignment: Mapping[str, int]) -> rom.ReprogrammedOracle:
        """The classical reprogrammed oracle consistent with sampled chain values."""
        return rom.ReprogrammedOracle(self.base_oracle, self.chain_tuple(assignment), mode="xor")

    def verify(self, m: int, sigma: Sequence[int], assignment: Mapping[str, int]) -> bool:
        """Run the scheme verifier against the oracle reprogrammed on sampled chains."""
        oracle = self.overlay_oracle(assignment)
        if self.scheme == "lamport":
            pk = self.p  # index 2*i + j, matching the classical layout
            return ots.lamport_verify(self.params, pk, m, sigma, oracle)
        return ots.wots_verify(self.params, self.p, m, sigma, oracle)


def lamport_world(
    n: int,
    l: int,
    blinding: BlindingSet | None = None,
    seed: int = 0,
    workspace_qubits: int = 2,
) -> ChainWorld:
    params = ots.LamportParams(n=n, l=l)
    h_table = rom.RandomOracleTable(n, seed=rom.derive_seed(seed, "oracle")).full_table()
    rng = np.random.default_rng(rom.derive_seed(seed, "endpoints"))
    p = tuple(int(rng.integers(0, 1 << n)) for _ in range(2 * l))
    return ChainWorld(
        scheme="lamport",
        n=n,
        w=2,
        chain_count=2 * l,
        l_sem=l,
        message_bits=l,
        params=params,
        p=p,
        h_table=h_table,
        blinding=blinding,
        seed=seed,
        workspace_qubits=workspace_qubits,
    )


def winternitz_world(
    n: int,
    a: int,
    w: int,
    blinding: BlindingSet | None = None,
    seed: int = 0,
    workspace_qubits: int = 2,
) -> ChainWorld:
    # Lab worlds accept any w >= 2; the scheme-level power-of-two restriction
    # only concerns the classical signing API.
    params = ots.derive_wots_params(a, w, n, require_power_of_two=False)
    h_table = rom.RandomOracleTable(n, seed=rom.derive_seed(seed, "oracle")).full_table()
    rng = np.random.default_rng(rom.derive_seed(seed, "endpoints"))
    p = tuple(int(rng.integers(0, 1 << n)) for _ in range(params.l))
    return ChainWorld(
        scheme="winternitz",
        n=n,
        w=w,
        chain_count=params.l,
        l_sem=params.l,
        message_bits=a,
        params=params,
        p=p,
        h_table=h_table,
        blinding=blinding,
        seed=seed,
        workspace_qubits=workspace_qubits,
    )


def chain_world(n: int, l: int, w: int, seed: int = 0) -> ChainWorld:
    """Bare chain structure with no message space; enough for oracle-side checks."""
    h_table = rom.RandomOracleTable(n, seed=rom.derive_seed(seed, "oracle")).full_table()
    rng = np.random.default_rng(rom.derive_seed(seed, "endpoints"))
    p = tuple(int(rng.integers(0, 1 << n)) for _ in range(l))
    return ChainWorld(
        scheme="winternitz",
        n=n,
        w=w,
        chain_count=l,
        l_sem=l,
        message_bits=None,
        params=None,
        p=p,
        h_table=h_table,
        blinding=None,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Query unitary


def query_unitary_factors(
    world: ChainWorld, layout: RegisterLayout | None = None
) -> tuple[LinearMap, list[tuple[int, int, LinearMap]]]:
    """The mismatch factor and the per-(chain, position) compare-and-copy factors.

    Each factor U_c^j acts as identity unless the input register equals chain
    register (c, j), in which case the successor (register or pinned endpoint)
    is XORed into the output register.
    """
    layout = layout or world.norm_layout()
    n = world.n
    eq_masks = {}
    for c in range(world.chain_count):
        for j in range(world.w - 1):
            eq_masks[(c, j)] = qsim.equality_mask(layout, "x", world.chain_register(c, j))

    def factor(c: int, j: int) -> LinearMap:
        mask = eq_masks[(c, j)]
        if j + 1 <= world.w - 2:
            mover = qsim.xor_register_map(layout, world.chain_register(c, j + 1), "y")
        else:
            mover = qsim.xor_constant_map(layout, "y", world.p[c])

        def ap(v):
            return np.where(mask, mover.apply(v), v)

        return LinearMap(layout.dim, ap, label=f"U[{c},{j}]", self_adjoint=True)

    none_match = ~np.logical_or.reduce(list(eq_masks.values()))
    base = qsim.oracle_xor_map(layout, "x", "y", world.h_table)

    def ap_neq(v):
        return np.where(none_match, base.apply(v), v)

    neq = LinearMap(layout.dim, ap_neq, label="U[neq]", self_adjoint=True)
    factors = [
        (c, j, factor(c, j))
        for c in range(world.chain_count)
        for j in range(world.w - 1)
    ]
    return neq, factors


def build_query_unitary(world: ChainWorld, layout: RegisterLayout | None = None) -> LinearMap:
    """Oracle-query unitary: the product of all compare-and-copy factors applied
    after the mismatch factor, with the (chain asc, position asc) written order
    acting right to left."""
    layout = layout or world.norm_layout()
    neq, factors = query_unitary_factors(world, layout)
    ordered = [f for _, _, f in factors]

    def ap(v):
        v = neq.apply(v)
        for f in reversed(ordered):
            v = f.apply(v)
        return v

    def adj(v):
        for f in ordered:
            v = f.apply(v)
        return neq.apply(v)

    return LinearMap(layout.dim, ap, adj, label="U_h")


def query_unitary_as_function(world: ChainWorld, assignment: Mapping[str, int]) -> dict[int, int]:
    """Evaluate the query unitary on every |x>|0>|assignment> basis state.

    Returns {x: y}; raises if any output fails to be a computational basis
    state (it never should: every factor is a basis permutation).
    """
    layout = world.norm_layout()
    u = build_query_unitary(world, layout)
    out = {}
    for x in range(1 << world.n):
        full = dict(assignment)
        full["x"] = x
        full["y"] = 0
        state = qsim.basis_state(layout, full)
        res = u.apply(state.amplitudes)
        hits = np.nonzero(np.abs(res) > 1e-12)[0]
        if len(hits) != 1 or abs(res[hits[0]] - 1.0) > 1e-9:
            raise AssertionError("query unitary left the computational basis")
        idx = int(hits[0])
        out[x] = int((idx >> layout.shift("y")) & ((1 << world.n) - 1))
    return out


# ---------------------------------------------------------------------------
# Blinded signing unitary


def build_blinded_sign_unitary(
    world: ChainWorld, layout: RegisterLayout | None = None
) -> LinearMap:
    """Signing-query unitary: identity on blinded basis messages, otherwise the
    signature-relevant chain registers (or pinned endpoints) are XORed into the
    signature blocks.  An XOR involution, so its own inverse."""
    layout = layout or world.game_layout()
    if world.blinding is None:
        raise ValueError("world has no blinding set")
    shifts = [layout.shift(name) for name in world.sigma_registers()]
    plans = []
    for m in world.unblinded():
        const = 0
        fields = []
        for i, (kind, ref) in enumerate(world.relevant_registers(m)):
            if kind == "q":
                fields.append((ref, shifts[i]))
            else:
                const ^= world.p[ref] << shifts[i]
        plans.append((m, const, tuple(fields)))
    mfield_name = "m"

    def ap(v):
        out = v.copy()
        mfield = layout.field(mfield_name)
        idx = layout.arange()
        for m, const, fields in plans:
            mask = mfield == m
            perm = idx ^ const
            for reg, shift in fields:
                perm = perm ^ (layout.field(reg) << shift)
            out[mask] = v[perm[mask]]
        return out

    return LinearMap(layout.dim, ap, label="BSign", self_adjoint=True)


# ---------------------------------------------------------------------------
# Forgery-tracking projectors


class QProjector(LinearMap):
    """One outcome of the first-uniform-register measurement.

    The map applies the projector's factors on quantum chain registers.
    Factors that formally sit on a pinned endpoint contribute the exact scalar
    ``weight`` to outcome probabilities instead (uniform-overlap 2^-n for a
    uniform factor, 1 - 2^-n for a complement factor) and are recorded in
    ``endpoint_pattern``.
    """

    def __init__(
        self,
        layout: RegisterLayout,
        outcome: int,
        pattern: Mapping[str, int],
        endpoint_pattern: Sequence[int],
        n: int,
    ):
        self.outcome = outcome
        self.pattern = dict(pattern)
        self.endpoint_pattern = tuple(endpoint_pattern)
        weight = 1.0
        for bit in self.endpoint_pattern:
            weight *= (2.0 ** -n) if bit == 0 else (1.0 - 2.0 ** -n)
        self.weight = weight
        if self.pattern:
            inner = qsim.phi_pattern_map(layout, self.pattern)
            apply = inner.apply
        else:
            apply = lambda v: v.copy()
        super().__init__(layout.dim, apply, label=f"Q[{outcome}]", self_adjoint=True)


def build_q_projectors(
    world: ChainWorld, m_star: int, layout: RegisterLayout | None = None
) -> list[QProjector]:
    """The l+1 outcome projectors for forgery message ``m_star``: outcome i
    locates the first signature-relevant register still uniform, outcome l+1
    says none is."""
    layout = layout or world.chain_layout()
    relevant = world.relevant_registers(m_star)
    outs = []
    for i_star in range(1, world.l_sem + 2):
        pattern: dict[str, int] = {}
        endpoint: list[int] = []
        upto = world.l_sem if i_star == world.l_sem + 1 else i_star
        for k in range(upto):
            kind, ref = relevant[k]
            last = i_star <= world.l_sem and k == i_star - 1
            bit = 0 if last else 1
            if kind == "q":
                pattern[ref] = bit
            else:
                endpoint.append(bit)
        outs.append(QProjector(layout, i_star, pattern, endpoint, world.n))
    return outs


def _minimal_thresholds(thresholds) -> list[tuple[int, ...]]:
    uniq = sorted(set(tuple(t) for t in thresholds))
    keep = []
    for t in uniq:
        if not any(all(o <= x for o, x in zip(other, t)) for other in keep):
            keep = [o for o in keep if not all(x <= y for x, y in zip(t, o))]
            keep.append(t)
    return keep


def invariant_projector_from_thresholds(
    world: ChainWorld,
    thresholds,
    layout: RegisterLayout | None = None,
    method: str = "auto",
) -> LinearMap:
    """Projector onto chain configurations untouched below at least one
    threshold vector: the union over vectors t of the event "every register
    (c, j) with j < t_c is still uniform".

    ``method="union"`` expands the union by inclusion-exclusion over the
    minimal threshold vectors (all the product projectors commute);
    ``method="alpha"`` sums the uniform/complement patterns belonging to the
    union directly.  Both are exact; the second is the brute-force oracle.
    """
    layout = layout or world.chain_layout()
    tlist = _minimal_thresholds(thresholds)
    dim = layout.dim
    if not tlist:
        out = qsim.zero_map(dim)
        out.is_zero = True
        out.term_count = 0
        return out
    if method == "auto":
        method = "union" if len(tlist) <= 8 else "alpha"

    def regs_below(t: Sequence[int]) -> tuple[str, ...]:
        return tuple(
            world.chain_register(c, j)
            for c in range(world.chain_count)
            for j in range(min(t[c], world.w - 1))
        )

    if method == "union":
        coeffs: dict[tuple[int, ...], float] = {}
        for r in range(1, len(tlist) + 1):
            sign = 1.0 if r % 2 == 1 else -1.0
            for subset in itertools.combinations(tlist, r):
                merged = tuple(max(vals) for vals in zip(*subset))
                coeffs[merged] = coeffs.get(merged, 0.0) + sign
        terms = [(c, regs_below(t)) for t, c in sorted(coeffs.items()) if c != 0.0]

        def ap(v):
            out = np.zeros_like(v)
            for coeff, regs in terms:
                out += coeff * qsim.uniform_projector_apply(v, layout, regs)
            return out

        pmap = LinearMap(dim, ap, label="P", self_adjoint=True)
        pmap.term_count = len(terms)
    elif method == "alpha":
        quantum_positions = [
            (c, j) for c in range(world.chain_count) for j in range(world.w - 1)
        ]
        if len(quantum_positions) > 12:
            raise ValueError("alpha enumeration guard: too many chain registers")
        patterns = []
        for bits in itertools.product((0, 1), repeat=len(quantum_positions)):
            alpha = dict(zip(quantum_positions, bits))
            ok = any(
                all(alpha[(c, j)] == 0 for c in range(world.chain_count) for j in range(t[c]))
                for t in tlist
            )
            if ok:
                patterns.append(
                    {world.chain_register(c, j): bit for (c, j), bit in alpha.items()}
                )

        def ap(v):
            out = np.zeros_like(v)
            for pattern in patterns:
                out += qsim.phi_pattern_apply(v, layout, pattern)
            return out

        pmap = LinearMap(dim, ap, label="P(alpha)", self_adjoint=True)
        pmap.term_count = len(patterns)
    else:
        raise ValueError(f"unknown method {method!r}")
    pmap.is_zero = False
    return pmap


def build_invariant_projector(
    world: ChainWorld, layout: RegisterLayout | None = None, method: str = "auto"
) -> LinearMap:
    """Projector onto chain states consistent with at most one unblinded
    message having been signed.  The zero map when everything is blinded."""
    if world.blinding is None:
        raise ValueError("world has no blinding set")
    thresholds = [world.thresholds(m) for m in world.unblinded()]
    return invariant_projector_from_thresholds(world, thresholds, layout, method)


def build_qtilde(
    world: ChainWorld, layout: RegisterLayout | None = None
) -> list[LinearMap]:
    """Message-controlled outcome maps: on each basis message m, apply that
    message's outcome projector.

    Components whose projector has endpoint factors are scaled by the square
    root of the endpoint weight, which makes norms of the returned maps equal
    to the norms the full operators (with endpoint registers materialized)
    would produce.  They are therefore norm-faithful but not idempotent on
    worlds where a message digit points at the chain end.
    """
    layout = layout or world.game_layout(include_xy=False)
    projs_by_m = {m: build_q_projectors(world, m, layout) for m in world.messages()}
    maps = []
    for i_star in range(1, world.l_sem + 2):

        def ap(v, i_star=i_star):
            out = np.zeros_like(v)
            mfield = layout.field("m")
            for m in world.messages():
                q = projs_by_m[m][i_star - 1]
                masked = np.where(mfield == m, v, 0.0)
                out += np.sqrt(q.weight) * q.apply(masked)
            return out

        maps.append(LinearMap(layout.dim, ap, label=f"Qtilde[{i_star}]", self_adjoint=True))
    return maps


# ---------------------------------------------------------------------------
# Descriptors


def world_descriptor(world: ChainWorld) -> dict:
    doc = {
        "scheme": world.scheme,
        "n": world.n,
        "w": world.w,
        "chains": world.chain_count,
        "l": world.l_sem,
        "seed": world.seed,
        "p": list(world.p),
    }
    if world.message_bits is not None:
        doc["message_bits"] = world.message_bits
    if world.blinding is not None:
        doc["epsilon"] = world.blinding.epsilon
        doc["blinding_set"] = list(world.blinding.sorted_members())
    return doc


def world_descriptor_json(world: ChainWorld) -> str:
    return json.dumps(world_descriptor(world), indent=2, sort_keys=True) + "\n"
