import numpy as np
import pytest
from scipy import stats

from leastcore import errors
from leastcore.bench import (
    HoldoutSet,
    attach_holdout,
    calls_to_target,
    calls_to_target_table,
    classification_rates,
    compute_metrics,
    full_lattice_holdout,
    holdout_epsilon,
    kendall_tau_b,
    make_holdout,
    run_yp,
    run_zs,
)
from leastcore.games import cached, make_random_game, make_veto_game
from leastcore.lp import solve_full_lp, solve_full_qp
from leastcore.trace import RoundRecord, SolveTrace


class TestHoldout:
    def test_nearest_rank_three_items(self):
        # singleton masks against u = 0: deficits are just the values
        masks = np.asarray([1, 2, 4], dtype=np.uint64)
        u = np.zeros(3)
        h = HoldoutSet(n=3, masks=masks, values=np.array([0.1, 0.2, 0.3]))
        assert holdout_epsilon(u, h, 0.99) == pytest.approx(0.3)
        assert holdout_epsilon(u, h, 1.0) == pytest.approx(0.3)
        assert holdout_epsilon(u, h, 0.5) == pytest.approx(0.2)

    def test_core_point_nonpositive(self):
        g = make_veto_game(4, 1)
        h = full_lattice_holdout(g)
        u = np.array([0.0, 1.0, 0.0, 0.0])
        assert holdout_epsilon(u, h, 1.0) <= 0.0

    def test_full_lattice_q1_equals_exact_deficit(self):
        for seed in range(5):
            g = make_random_game(8, seed=seed)
            sol = solve_full_lp(g)
            h = full_lattice_holdout(g)
            assert holdout_epsilon(sol.u, h, 1.0) == pytest.approx(sol.eps, abs=1e-9)

    def test_sampling_without_replacement_deterministic(self):
        g = make_random_game(8, seed=0)
        h1 = make_holdout(g, size=100, seed=3)
        h2 = make_holdout(g, size=100, seed=3)
        assert (h1.masks == h2.masks).all()
        assert len(set(h1.masks.tolist())) == 100
        assert (h1.masks != 0).all() and (h1.masks != 254 + 1).all()

    def test_default_size_capped_by_lattice(self):
        g = make_random_game(6, seed=0)
        h = make_holdout(g, seed=0)
        assert len(h) == (1 << 6) - 2

    def test_empty_holdout(self):
        with pytest.raises(errors.EmptyHoldout):
            holdout_epsilon(np.zeros(3), HoldoutSet(3, np.asarray([], dtype=np.uint64), np.asarray([])), 0.99)


class TestKendallTau:
    def test_perfect_concordance(self):
        labels = ["gold", "evidence", "negative"]
        u = np.array([0.7, 0.25, 0.05])
        assert kendall_tau_b(u, labels) == pytest.approx(1.0)

    def test_constant_u_returns_zero(self):
        assert kendall_tau_b(np.full(4, 0.25), ["gold", "gold", "negative", "negative"]) == 0.0

    def test_two_groups_reversed(self):
        # ranks (2,2,0,0) against strictly increasing u: all four cross
        # pairs discordant, within-group pairs tied on labels
        tau = kendall_tau_b(np.array([0.1, 0.2, 0.3, 0.4]), ["gold", "gold", "negative", "negative"])
        assert tau == pytest.approx(-4 / np.sqrt(24))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        n = 8
        labels = [np.random.default_rng(seed + 1).choice(["gold", "evidence", "negative"]) for _ in range(n)]
        if len(set(labels)) < 2:
            labels[0], labels[1] = "gold", "negative"
        u = np.round(rng.random(n), 1)  # coarse grid to force ties
        ranks = [{"gold": 2, "evidence": 1, "negative": 0}[lab] for lab in labels]
        expected = stats.kendalltau(u, ranks, variant="b").statistic
        got = kendall_tau_b(u, labels)
        if np.isnan(expected):
            assert got == 0.0
        else:
            assert got == pytest.approx(expected, abs=1e-12)

    def test_errors(self):
        with pytest.raises(errors.NoLabels):
            kendall_tau_b(np.zeros(2), [])
        with pytest.raises(errors.DegenerateLabels):
            kendall_tau_b(np.zeros(2), ["gold", "gold"])
        with pytest.raises(errors.DimensionMismatch):
            kendall_tau_b(np.zeros(3), ["gold", "negative"])


class TestClassificationRates:
    def test_veto_point(self):
        gold_fn, neg_fp, pct = classification_rates(
            np.array([1.0, 0.0, 0.0]), ["gold", "negative", "negative"]
        )
        assert (gold_fn, neg_fp, pct) == (0.0, 0.0, pytest.approx(1 / 3))

    def test_uniform_all_nonzero(self):
        _, _, pct = classification_rates(np.full(5, 0.2), ["gold"] + ["negative"] * 4)
        assert pct == 1.0

    def test_mixed(self):
        gold_fn, neg_fp, pct = classification_rates(
            np.array([0.0, 0.5, 0.5]), ["gold", "evidence", "negative"]
        )
        assert gold_fn == 1.0 and neg_fp == 1.0 and pct == pytest.approx(2 / 3)


class TestRunYp:
    def test_full_coverage_equals_brute_force(self):
        g = make_random_game(8, seed=5)
        alloc, trace = run_yp(make_random_game(8, seed=5), budget=(1 << 8) - 2, seed=1)
        ref = solve_full_qp(g)
        assert alloc.eps == pytest.approx(ref.eps, abs=1e-9)
        assert np.abs(alloc.u - ref.u).max() < 1e-7

    def test_call_accounting(self):
        g = cached(make_random_game(6, seed=2))
        budget = 40
        alloc, trace = run_yp(g, budget=budget, seed=0)
        assert trace.total_calls == min(budget, (1 << 6) - 2)
        g2 = cached(make_random_game(6, seed=2))
        _, trace2 = run_yp(g2, budget=5000, seed=0)
        assert trace2.total_calls == (1 << 6) - 2

    def test_singleton_variant(self):
        g = cached(make_veto_game(6, 0))
        alloc, trace = run_yp(g, budget=10, seed=0, singleton_seed=True)
        masks = {1 << i for i in range(6)}
        assert trace.total_calls >= 10
        assert trace.method == "yp-s"

    def test_snapshot_batching(self):
        g = make_random_game(9, seed=3)
        alloc, trace = run_yp(g, budget=300, seed=0)
        assert [r.calls for r in trace.rounds] == [128, 256, 300]

    def test_deterministic(self):
        a1, t1 = run_yp(make_random_game(7, seed=1), budget=60, seed=9)
        a2, t2 = run_yp(make_random_game(7, seed=1), budget=60, seed=9)
        assert a1.u.tobytes() == a2.u.tobytes()


class _AllocPlugin:
    def __init__(self, u):
        self._u = u

    def propose_allocation(self):
        return self._u


class TestRunZs:
    def test_accepted_verbatim(self):
        g = make_veto_game(3, 0)
        alloc, report = run_zs(_AllocPlugin([0.5, 0.5, 0.0]), g)
        assert alloc.u == pytest.approx([0.5, 0.5, 0.0])
        assert report.total_calls == 0

    def test_renormalized_with_raw_recorded(self):
        g = make_veto_game(3, 0)
        alloc, report = run_zs(_AllocPlugin([2.0, 2.0, 0.0]), g)
        assert alloc.u == pytest.approx([0.5, 0.5, 0.0])
        assert report.raw_proposal == [2.0, 2.0, 0.0]
        assert "raw_proposal" in report.to_record()

    def test_degenerate(self):
        with pytest.raises(errors.DegenerateProposal):
            run_zs(_AllocPlugin([0.0, 0.0, 0.0]), make_veto_game(3, 0))

    def test_validate_with_holdout(self):
        g = make_veto_game(3, 0)
        alloc, report = run_zs(
            _AllocPlugin([1.0, 0.0, 0.0]), g, validate=True, labels=["gold", "negative", "negative"]
        )
        assert report.holdout_eps is not None and report.holdout_eps <= 0.0
        assert report.tau_b == pytest.approx(1.0)


class TestCallsToTarget:
    def _trace(self, pairs):
        rounds = [
            RoundRecord(round=i + 1, calls=c, eps=0.0, u=np.zeros(2), holdout_eps=h)
            for i, (c, h) in enumerate(pairs)
        ]
        return SolveTrace(n=2, rounds=rounds, reason="Converged", total_calls=pairs[-1][0])

    def test_never_reaches(self):
        trace = self._trace([(10, 0.9), (20, 0.8)])
        assert calls_to_target([trace], 0.5, tol=0.01) == [None]

    def test_first_snapshot_hits(self):
        trace = self._trace([(10, 0.4), (20, 0.3)])
        assert calls_to_target([trace], 0.5, tol=0.01) == [10]

    def test_prefix_improvement_monotone(self):
        a = self._trace([(10, 0.6), (20, 0.4)])
        b = self._trace([(10, 0.7), (20, 0.6), (30, 0.4)])
        got = calls_to_target([a, b], 0.4, tol=0.01)
        assert got[0] <= got[1]

    def test_missing_holdout(self):
        trace = SolveTrace(
            n=2,
            rounds=[RoundRecord(round=1, calls=5, eps=0.1, u=np.zeros(2))],
        )
        with pytest.raises(errors.MissingHoldoutColumn):
            calls_to_target([trace], 0.5)

    def test_attach_holdout_and_table(self):
        g = make_random_game(6, seed=0)
        alloc, trace = run_yp(g, budget=30, seed=0)
        h = full_lattice_holdout(make_random_game(6, seed=0))
        annotated = attach_holdout(trace, h, q=1.0)
        assert all(r.holdout_eps is not None for r in annotated.rounds)
        table = calls_to_target_table({"yp": calls_to_target([annotated], 1.0, tol=0.5)})
        assert table[-1]["method"] == "yp"


class TestMetricsDeterminism:
    def test_bit_identical_reports(self):
        g = make_random_game(7, seed=4)
        alloc = solve_full_qp(g)
        h1 = make_holdout(make_random_game(7, seed=4), size=50, seed=11)
        h2 = make_holdout(make_random_game(7, seed=4), size=50, seed=11)
        labels = ["gold", "evidence", "negative", "negative", "evidence", "negative", "gold"]
        r1 = compute_metrics(alloc, h1, labels, total_calls=126)
        r2 = compute_metrics(alloc, h2, labels, total_calls=126)
        assert r1.to_record() == r2.to_record()
