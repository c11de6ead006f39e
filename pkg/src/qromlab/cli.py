"""Batch front-end.

Subcommands: keygen, sign, verify, game, qgame, lemmas, worlds, attack,
bounds.  All randomness flows from one --seed (default: the QROMLAB_SEED
environment variable, then 0); sub-seeds are derived by labeled hashing, so
the same invocation writes byte-identical reports.

Exit codes: 0 all checks pass, 1 usage error, 2 any lemma or bound failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import attacks, game, lemmas, ots, rom
from .qworlds import world_descriptor_json


def _default_seed() -> int:
    return int(os.environ.get("QROMLAB_SEED", "0"))


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _params_from_args(args) -> tuple[str, object]:
    if args.scheme == "lamport":
        return "lamport", ots.LamportParams(n=args.n, l=args.a)
    return "winternitz", ots.derive_wots_params(args.a, args.w, args.n)


def _cmd_keygen(args) -> int:
    scheme, params = _params_from_args(args)
    oracle = rom.RandomOracleTable(args.n, seed=rom.derive_seed(args.seed, "keygen-oracle"))
    rng = np.random.default_rng(rom.derive_seed(args.seed, "keygen"))
    if scheme == "lamport":
        kp = ots.lamport_keygen(params, oracle, rng)
    else:
        kp = ots.wots_keygen(params, oracle, rng)
    _write(args.out, ots.keypair_to_json(kp))
    return 0


def _oracle_for_key(kp: ots.KeyPair, seed: int) -> rom.RandomOracleTable:
    # The lazily sampled function used at keygen is reproducible from the seed;
    # signing and verification must consult the same one.
    oracle = rom.RandomOracleTable(kp.params.n, seed=rom.derive_seed(seed, "keygen-oracle"))
    return oracle


def _cmd_sign(args) -> int:
    kp = ots.load_keypair(args.key)
    oracle = _oracle_for_key(kp, args.seed)
    m = int(args.message, 0)
    if kp.scheme == "lamport":
        sig = ots.lamport_sign(kp.params, kp.sk, m)
    else:
        sig = ots.wots_sign(kp.params, kp.sk, m, oracle)
    _write(args.out, ots.signature_to_json(kp.scheme, kp.params, sig))
    return 0


def _cmd_verify(args) -> int:
    kp = ots.load_keypair(args.key)
    oracle = _oracle_for_key(kp, args.seed)
    sig = ots.signature_from_json(Path(args.sig).read_text())
    m = int(args.message, 0)
    if kp.scheme == "lamport":
        ok = ots.lamport_verify(kp.params, kp.pk, m, sig.sigma, oracle)
    else:
        ok = ots.wots_verify(kp.params, kp.pk, m, sig.sigma, oracle)
    # The verification outcome is data, not an error.
    print("acc" if ok else "rej")
    return 0


def _replay_adversary(handles: game.ClassicalHandles):
    answer = handles.sign_query(0)
    if answer.blinded:
        return None
    return 0, answer.payload


def _random_forger(seed: int):
    def adversary(handles: game.ClassicalHandles):
        rng = np.random.default_rng(rom.derive_seed(seed, "forger"))
        n, l = handles.params.n, handles.params.l
        bits = handles.params.message_bits
        m = int(rng.integers(0, 1 << bits))
        sigma = tuple(int(rng.integers(0, 1 << n)) for _ in range(l))
        return m, sigma

    return adversary


def _cmd_game(args) -> int:
    scheme, params = _params_from_args(args)
    adversary = _replay_adversary if args.adversary == "replay" else _random_forger(args.seed)
    transcript = game.run_classical_game(adversary, params, args.epsilon, args.seed)
    _write(args.out, transcript.to_json())
    return 0


def _cmd_qgame(args) -> int:
    from . import qworlds

    blinding = game.sample_blinding_set(
        args.epsilon, args.a, np.random.default_rng(rom.derive_seed(args.seed, "blinding"))
    )
    if args.scheme == "lamport":
        world = qworlds.lamport_world(args.n, args.a, blinding=blinding, seed=args.seed)
    else:
        world = qworlds.winternitz_world(args.n, args.a, args.w, blinding=blinding, seed=args.seed)
    program = game.random_program(world, args.q0, args.q1, seed=args.seed)
    transcript, analysis = game.run_quantum_game(program, world, mode=args.mode, seed=args.seed)
    doc = json.loads(transcript.to_json())
    doc["world"] = json.loads(world_descriptor_json(world))
    doc["p_win_plain"] = analysis.p_win_plain
    doc["p_win_modified"] = analysis.p_win_modified
    doc["p_forced_outcome_blinded"] = analysis.p_forced_outcome_blinded
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_lemmas(args) -> int:
    if args.sweep:
        reports = lemmas.run_sweep(seed=args.seed)
    else:
        reports = []
        reports += lemmas.check_equality_uniform_overlap(args.n, seed=args.seed)
        reports += lemmas.check_uniform_register_commutator(
            args.scheme, args.n, args.l, args.w, seed=args.seed
        )
        reports += lemmas.check_invariant_commutator(
            args.scheme, args.n, args.l, args.w, seed=args.seed
        )
        reports += lemmas.check_state_drift(
            args.scheme, args.n, args.l, args.w, args.q0, args.q1, program_seed=args.seed
        )
        reports += lemmas.check_oracle_reprogramming_consistency(
            args.scheme, args.n, args.l, args.w, seed=args.seed
        )
    _write(args.out, lemmas.reports_to_csv(reports))
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"FAIL {r.lemma} scheme={r.scheme} n={r.n} l={r.l} w={r.w}: "
              f"measured={r.measured!r} bound={r.bound!r}", file=sys.stderr)
    return 2 if failed else 0


def _cmd_worlds(args) -> int:
    reports = lemmas.check_world_closeness(args.n, args.l, args.w)
    if args.dump_prefix:
        p, q = rom.enumerate_chain_distributions(args.n, args.l, args.w)
        rom.dump_distribution_csv(p, args.n, args.dump_prefix + "_p.csv")
        rom.dump_distribution_csv(q, args.n, args.dump_prefix + "_q.csv")
    _write(args.out, lemmas.reports_to_csv(reports))
    return 0 if all(r.passed for r in reports) else 2


def _cmd_attack(args) -> int:
    if args.kind == "classical":
        report = attacks.classical_search_attack(args.n, args.l, args.q, args.trials, seed=args.seed)
    else:
        iterations = args.iterations if args.iterations >= 0 else None
        report = attacks.grover_attack(args.n, args.l, iterations, args.trials, seed=args.seed)
    if args.format == "csv":
        _write(args.out, attacks.reports_to_csv([report]))
    else:
        doc = report.to_row()
        if args.kind == "grover" and args.sensitivity > 0:
            doc["schedule_sensitivity"] = attacks.grover_schedule_sensitivity(
                args.n, args.l, args.sensitivity, trials=min(args.trials, 300), seed=args.seed
            )
        _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    bound = min(1.0, report.bound_full)
    sigma = max((report.wilson_high - report.wilson_low) / 2.0, 1e-12)
    return 0 if report.empirical <= bound + sigma else 2


def _cmd_bounds(args) -> int:
    doc = attacks.security_bounds(args.scheme, args.q, args.n, args.l, args.w)
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qromlab", description=__doc__)
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="command")

    def common(p, scheme=True):
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if scheme:
            p.add_argument("--scheme", choices=("lamport", "winternitz"), default="lamport")

    p = sub.add_parser("keygen", help="generate a key pair")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, required=True, help="message bits (l for Lamport)")
    p.add_argument("--w", type=int, default=4)
    p.set_defaults(func=_cmd_keygen)

    p = sub.add_parser("sign", help="sign a message with a key file")
    common(p, scheme=False)
    p.add_argument("--key", required=True)
    p.add_argument("--message", required=True, help="integer, e.g. 0b1011 or 13")
    p.set_defaults(func=_cmd_sign)

    p = sub.add_parser("verify", help="verify a signature file")
    common(p, scheme=False)
    p.add_argument("--key", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--sig", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("game", help="run one classical blind-forgery experiment")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--adversary", choices=("replay", "random-forger"), default="random-forger")
    p.set_defaults(func=_cmd_game)

    p = sub.add_parser("qgame", help="run one quantum blind-forgery experiment")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--w", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--q0", type=int, default=0)
    p.add_argument("--q1", type=int, default=0)
    p.add_argument("--mode", choices=("plain", "modified"), default="plain")
    p.set_defaults(func=_cmd_qgame)

    p = sub.add_parser("lemmas", help="run verification checks, write a CSV report")
    common(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--w", type=int, default=2)
    p.add_argument("--q0", type=int, default=1)
    p.add_argument("--q1", type=int, default=1)
    p.add_argument("--sweep", action="store_true", help="run the default grid")
    p.set_defaults(func=_cmd_lemmas)

    p = sub.add_parser("worlds", help="exact chain-distribution comparison")
    common(p, scheme=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--dump-prefix", default=None, help="also dump p/q CSV fixtures")
    p.set_defaults(func=_cmd_worlds)

    p = sub.add_parser("attack", help="run a tightness attack")
    common(p, scheme=False)
    p.add_argument("--kind", choices=("classical", "grover"), default="classical")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--iterations", type=int, default=-1, help="-1 = schedule default")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--sensitivity", type=int, default=0,
                   help="grover only: also sweep success over 0..N iterations")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("bounds", help="print the closed-form success bounds")
    common(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--w", type=int, default=None)
    p.set_defaults(func=_cmd_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if args.func is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
