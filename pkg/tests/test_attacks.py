import math

import pytest

from qromlab import attacks, rom
from qromlab.attacks import (
    _first_hit_exact,
    _hit_wins,
    _trial_world,
    exact_win_by_subset_enumeration,
)


class TestSearchFormula:
    def test_values(self):
        assert attacks.p_search_formula(1, 1, 2) == pytest.approx(0.5)
        assert attacks.p_search_formula(16, 1, 4) == pytest.approx(1 - (1 - 2 / 16) ** 16)
        assert attacks.p_search_formula(0, 1, 4) == 0.0


class TestClassicalAttack:
    def test_zero_queries_never_wins(self):
        rep = attacks.classical_search_attack(3, 1, 0, trials=200, seed=0)
        assert rep.wins == 0 and rep.exact_reference == 0.0

    def test_first_hit_combinatorics_match_enumeration(self):
        # the hypergeometric accounting equals brute-force averaging over
        # every query subset
        for ws in range(6):
            for q in (1, 2, 4):
                seed = rom.derive_seed(5, "xc", ws, q)
                params, oracle, keypair, blinding = _trial_world(3, 1, seed)
                hits = _hit_wins(3, 1, oracle, keypair.pk, blinding)
                p_win, _ = _first_hit_exact(3, q, hits)
                assert p_win == pytest.approx(
                    exact_win_by_subset_enumeration(3, 1, q, seed), abs=1e-12
                )

    @pytest.mark.parametrize("n,q", [(3, 4), (4, 8)])
    def test_empirical_matches_exact_reference(self, n, q):
        rep = attacks.classical_search_attack(n, 1, q, trials=3000, seed=7)
        sigma = max(
            math.sqrt(max(rep.exact_reference * (1 - rep.exact_reference), 1e-9) / rep.trials),
            rep.reference_sigma,
        )
        assert abs(rep.empirical - rep.exact_reference) <= 3 * sigma

    def test_full_domain_query_is_deterministic_per_world(self):
        rep = attacks.classical_search_attack(3, 1, 8, trials=500, seed=9)
        assert rep.empirical == pytest.approx(rep.exact_reference, abs=1e-12)
        assert rep.search_rate == 1.0  # the secret keys are always preimages

    def test_success_below_theorem_bound(self):
        rep = attacks.classical_search_attack(4, 1, 4, trials=2000, seed=11)
        sigma = math.sqrt(max(rep.empirical * (1 - rep.empirical), 1e-9) / rep.trials)
        assert rep.empirical <= min(1.0, rep.bound_full) + 3 * sigma


class TestGrover:
    def test_exact_single_target_quarter_space(self):
        # one marked element in a 4-element space: one iteration is exact
        psi = attacks.grover_state(2, [3], 1)
        assert abs(psi[3]) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_zero_iterations_is_uniform_guess(self):
        psi = attacks.grover_state(3, [1, 5], 0)
        assert sum(abs(psi[y]) ** 2 for y in (1, 5)) == pytest.approx(2 / 8)

    def test_default_schedule(self):
        assert attacks.default_grover_iterations(2, 1) == 1
        assert attacks.default_grover_iterations(4, 1) == 2

    def test_sampling_matches_projection(self):
        rep = attacks.grover_attack(4, 1, None, trials=3000, seed=13)
        sigma = math.sqrt(max(rep.search_exact * (1 - rep.search_exact), 1e-9) / rep.trials)
        assert abs(rep.search_rate - rep.search_exact) <= 3 * sigma
        sigma_w = max(
            math.sqrt(max(rep.exact_reference * (1 - rep.exact_reference), 1e-9) / rep.trials),
            rep.reference_sigma,
        )
        assert abs(rep.empirical - rep.exact_reference) <= 3 * sigma_w

    def test_success_below_theorem_bound(self):
        rep = attacks.grover_attack(4, 1, 2, trials=2000, seed=15)
        sigma = math.sqrt(max(rep.empirical * (1 - rep.empirical), 1e-9) / rep.trials)
        assert rep.empirical <= min(1.0, rep.bound_full) + 3 * sigma


class TestBounds:
    def test_dispatch(self):
        doc = attacks.security_bounds("lamport", 1, 20, 1)
        assert doc["simplified"] == pytest.approx(6286 * 2.0 ** -20)
        doc = attacks.security_bounds("winternitz", 1, 20, 1, w=2)
        assert doc["simplified"] == pytest.approx(12800 / 2 ** 20)
        with pytest.raises(ValueError):
            attacks.security_bounds("winternitz", 1, 20, 1)
        with pytest.raises(ValueError):
            attacks.security_bounds("lamport", -1, 20, 1)


class TestCsvReport:
    def test_round_shape(self):
        rep = attacks.classical_search_attack(3, 1, 2, trials=50, seed=1)
        text = attacks.reports_to_csv([rep])
        lines = text.splitlines()
        assert lines[0].startswith("kind,n,l,q,trials")
        assert len(lines) == 2


class TestScheduleSensitivity:
    def test_sweep_reports_schedule_sensitivity(self):
        # the schedule is derived from the nominal target count 2l, but the
        # realized count is larger (the secret strings are always preimages),
        # so at this register size the peak sits below the nominal schedule;
        # the sweep is exactly the report that makes that visible
        sweep = attacks.grover_schedule_sensitivity(4, 1, 4, trials=150, seed=3)
        by_iter = dict(sweep)
        assert all(0.0 <= v <= 1.0 for v in by_iter.values())
        assert by_iter[0] == pytest.approx(0.23, abs=0.05)  # uniform guess ~ E[t]/16
        peak_iter = max(by_iter, key=by_iter.get)
        assert 1 <= peak_iter <= attacks.default_grover_iterations(4, 1)
        assert by_iter[peak_iter] > 3 * by_iter[0]
