"""Acceptance suite: one test per shipping criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion. Tolerances are pinned here, not configurable.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from leastcore.bench import (
    attach_holdout,
    calls_to_target,
    full_lattice_holdout,
    run_yp,
)
from leastcore.cg import CgConfig, run_cg, run_cg_mwc
from leastcore.cli import main as cli_main
from leastcore.ellipsoid import EllipsoidConfig, run_ellipsoid_lp
from leastcore.games import (
    CachedOracle,
    Coalition,
    GameInstance,
    build_oracle,
    make_example_pair,
    make_mwc_game,
    make_random_game,
    make_random_supermodular_game,
    make_veto_game,
    perturb_game,
    read_cache_file,
)
from leastcore.lp import ConstraintSet, solve_full_lp, solve_full_qp, solve_restricted_lp
from leastcore.plugin import PluginSession
from leastcore.sensitivity import (
    chain_allocation,
    dual_bound,
    is_supermodular,
    sample_core_vertices,
    tv_along_chain,
)
from leastcore.separation import (
    RandomSeeds,
    SamplingSpec,
    SingletonSeeds,
    exhaustive_oracle,
    required_samples,
)
from leastcore.games import mask_payoffs, proper_masks


def _pass(name: str, detail: str = "") -> None:
    suffix = f"  [{detail}]" if detail else ""
    print(f"\nACCEPTANCE PASS: {name}{suffix}")


def _antichain(n: int, count: int, rng: np.random.Generator) -> list[Coalition]:
    masks: list[int] = []
    while len(masks) < count:
        size = int(rng.integers(1, 4))
        members = rng.choice(n, size=size, replace=False)
        mask = 0
        for i in members:
            mask |= 1 << int(i)
        if any(m & ~mask == 0 or mask & ~m == 0 for m in masks):
            continue
        masks.append(mask)
    return [Coalition(m, n) for m in masks]


def test_brute_force_equivalence():
    """CG with the exhaustive oracle equals full enumeration: |d eps| <= 1e-7,
    max |d u| <= 1e-6, over 100 binary and 50 continuous games, under 60 s."""
    from leastcore.games import make_random_mwc_game

    start = time.time()
    worst_eps = worst_u = 0.0
    for i in range(100):
        n = 4 + i % 7
        ref_lp = solve_full_lp(make_random_mwc_game(n, seed=i))
        ref_qp = solve_full_qp(make_random_mwc_game(n, seed=i))
        alloc, trace = run_cg(
            CachedOracle(make_random_mwc_game(n, seed=i)),
            CgConfig(seeding=SingletonSeeds(), oracle="exhaustive", egalitarian=True),
        )
        assert trace.reason == "Converged"
        worst_eps = max(worst_eps, abs(alloc.eps - ref_lp.eps))
        worst_u = max(worst_u, float(np.abs(alloc.u - ref_qp.u).max()))
    for i in range(50):
        n = 4 + i % 7
        ref_lp = solve_full_lp(make_random_game(n, seed=1000 + i))
        ref_qp = solve_full_qp(make_random_game(n, seed=1000 + i))
        alloc, trace = run_cg(
            CachedOracle(make_random_game(n, seed=1000 + i)),
            CgConfig(seeding=SingletonSeeds(), oracle="exhaustive", egalitarian=True),
        )
        assert trace.reason == "Converged"
        worst_eps = max(worst_eps, abs(alloc.eps - ref_lp.eps))
        worst_u = max(worst_u, float(np.abs(alloc.u - ref_qp.u).max()))
    elapsed = time.time() - start
    assert worst_eps <= 1e-7
    assert worst_u <= 1e-6
    assert elapsed <= 60.0
    _pass(
        "brute-force equivalence",
        f"150 games, worst deps {worst_eps:.1e}, worst du {worst_u:.1e}, {elapsed:.1f}s",
    )


def test_disagreement_example():
    """The constructed true/estimated pair has deficits exactly 0 and 1/2
    while disagreeing on ~2^(-n/2) of coalitions (within a factor of 2)."""
    for n in (4, 6, 8):
        v, vhat = make_example_pair(n)
        eps_true = solve_full_lp(v).eps
        eps_hat = solve_full_lp(vhat).eps
        assert eps_true == 0.0
        assert eps_hat == 0.5
        masks = proper_masks(n)
        fraction = float(
            (v.query_masks(masks) != vhat.query_masks(masks)).mean()
        )
        target = 2.0 ** (-n / 2)
        assert target / 2 <= fraction <= target * 2
    _pass("disagreement example", "n in {4,6,8}: eps*=0, eps_hat=1/2 exactly")


def test_sensitivity_bounds():
    """Over 200 random true/estimated pairs: gap <= balanced bound <= worst
    error, and sampled estimated-core vertices sit in the expanded true core
    (zero violations beyond 1e-7)."""
    checked_vertices = 0
    for trial in range(200):
        rng = np.random.default_rng(trial)
        n = int(rng.integers(4, 9))
        if trial % 2:
            v = make_random_game(n, seed=trial)
            vhat = perturb_game(v, seed=10_000 + trial, noise=float(rng.uniform(0.02, 0.25)))
        else:
            from leastcore.games import make_random_mwc_game

            v = make_random_mwc_game(n, seed=trial)
            vhat = perturb_game(v, seed=10_000 + trial, flip_prob=float(rng.uniform(0.0, 0.15)))
        eps_true = solve_full_lp(v).eps
        eps_hat = solve_full_lp(vhat).eps
        bound, _ = dual_bound(v, vhat)
        masks = proper_masks(n)
        true_vals = v.query_masks(masks)
        est_vals = vhat.query_masks(masks)
        delta = float(np.abs(true_vals - est_vals).max())
        assert abs(eps_true - eps_hat) <= bound + 1e-7
        assert bound <= delta + 1e-9
        for vertex in sample_core_vertices(vhat, eps_hat, count=3, seed=trial):
            payoffs = mask_payoffs(masks, vertex)
            max_true_deficit = float((true_vals - payoffs).max())
            assert max_true_deficit <= eps_hat + delta + 1e-7
            assert max_true_deficit <= eps_true + 2 * delta + 1e-7
            checked_vertices += 1
    _pass("sensitivity bounds", f"200 pairs, {checked_vertices} vertices, zero violations")


def test_mwc_seeding_and_budget():
    """Seeding with all minimal winning coalitions reproduces the full LP;
    withholding eta of them costs at most eta + 1 max-violation separation
    calls, 100 trials out of 100."""
    rng = np.random.default_rng(4242)
    for trial in range(100):
        n = int(rng.integers(6, 11))
        eta = trial % 4
        mwcs = _antichain(n, eta + int(rng.integers(1, 4)), rng)
        game = make_mwc_game(n, mwcs)
        full_eps = solve_full_lp(game).eps
        cs = ConstraintSet(n)
        for c in mwcs:
            cs.add(c, 1.0)
        assert abs(solve_restricted_lp(cs).eps - full_eps) <= 1e-9
        seeded = mwcs[: len(mwcs) - eta]
        alloc, trace, discovered = run_cg_mwc(
            make_mwc_game(n, mwcs), seeded, CgConfig(batch_k=1, max_rounds=64)
        )
        assert trace.reason == "Converged"
        assert trace.separation_calls <= eta + 1
        assert abs(alloc.eps - full_eps) <= 1e-9
        ref = solve_full_qp(game)
        assert np.abs(alloc.u - ref.u).max() <= 1e-6
    _pass("mwc seeding", "100/100 trials within eta+1 separation calls")


def _majority_game(n: int):
    quota = n // 2 + 1
    return make_mwc_game(
        n,
        [Coalition.from_indices(list(c), n) for c in itertools.combinations(range(n), quota)],
    )


def test_ellipsoid_convergence():
    """On veto and majority games for n in 3..6 the ellipsoid returns a
    deficit within 5e-3 of the exact one, an allocation within 5e-3 of the
    exact point, and at most T separation invocations."""
    for n in range(3, 7):
        for build in (lambda: make_veto_game(n, 0), lambda: _majority_game(n)):
            ref_lp = solve_full_lp(build())
            ref_qp = solve_full_qp(build())
            game = CachedOracle(build())
            config = EllipsoidConfig()
            alloc, trace = run_ellipsoid_lp(game, exhaustive_oracle(game), config)
            assert abs(alloc.eps - ref_lp.eps) <= 5e-3
            assert np.abs(alloc.u - ref_qp.u).max() <= 5e-3
            assert trace.separation_calls <= config.rounds(n)
    _pass("ellipsoid convergence", "veto + majority, n in 3..6, within 5e-3 and T rounds")


def test_sampling_oracle_statistics():
    """With the prescribed per-round sample count, the fraction of runs whose
    allocation violates more than a 0.1 mass of uniform coalitions at the
    exact deficit stays within three standard errors of 0.1."""
    from leastcore.games import make_random_mwc_game

    delta = gamma = 0.1
    rounds = 64
    m = required_samples(delta, gamma, rounds)
    trials = 200
    failures = 0
    masks = proper_masks(6)
    for trial in range(trials):
        game = CachedOracle(make_random_mwc_game(6, seed=trial))
        eps_hat = solve_full_lp(make_random_mwc_game(6, seed=trial)).eps
        alloc, trace = run_cg(
            game,
            CgConfig(
                seeding=RandomSeeds(0, seed=trial),
                oracle="sampling",
                sampling=SamplingSpec(m=m, seed=trial),
                batch_k=64,
                max_rounds=rounds,
                budget=None,
                egalitarian=True,
            ),
        )
        if trace.reason != "Converged":
            failures += 1
            continue
        values = game.query_masks(masks)
        payoffs = mask_payoffs(masks, alloc.u)
        mass = float((values - payoffs - eps_hat > 1e-7).mean())
        if mass > delta:
            failures += 1
    se = math.sqrt(gamma * (1 - gamma) / trials)
    assert failures / trials <= gamma + 3 * se
    _pass(
        "sampling statistics",
        f"m={m}, failure rate {failures / trials:.3f} <= {gamma + 3 * se:.3f}",
    )


def test_supermodular_chain_allocations():
    """Chain allocations of supermodular estimated games satisfy every
    estimated-core constraint at deficit zero; against perturbed true games
    the chain lies in the core expanded by four times the chain error."""
    for trial in range(100):
        n = 4 + trial % 5
        vhat = make_random_supermodular_game(n, seed=trial)
        ok, _ = is_supermodular(vhat)
        assert ok
        chain = chain_allocation(vhat)
        assert chain.within_box
        assert abs(float(chain.u.sum()) - 1.0) <= 1e-12
        masks = proper_masks(n)
        est_deficits = vhat.query_masks(masks) - mask_payoffs(masks, chain.u)
        assert float(est_deficits.max()) <= 1e-9
        # perturbed pair: supermodular true game, noisy estimate, chain from
        # the estimate must sit in the true core expanded by 4x chain error
        v = vhat
        vhat_noisy = perturb_game(v, seed=50_000 + trial, noise=0.08)
        noisy_chain = chain_allocation(vhat_noisy)
        tv = tv_along_chain(v, vhat_noisy)
        true_deficits = v.query_masks(masks) - mask_payoffs(masks, noisy_chain.u)
        assert float(true_deficits.max()) <= 4 * tv + 1e-9
    _pass("supermodular chains", "100 games, zero violations")


def _labeled_quota_instance(n: int, seed: int, path: Path) -> Path:
    """A labeled winning-coalition game: optionally one gold document that
    answers alone, plus an evidence pool any q of which answer together."""
    rng = np.random.default_rng(seed)
    players = list(rng.permutation(n))
    groups: list[str] = []
    idx = 0
    if rng.random() < 0.5:
        groups.append(str(int(players[0])))
        idx = 1
    pool_size = int(rng.integers(4, 7))
    quota = min(int(rng.integers(2, 4)), pool_size)
    pool = sorted(int(i) for i in players[idx : idx + pool_size])
    groups += [",".join(map(str, combo)) for combo in itertools.combinations(pool, quota)]
    out = path / f"instance-{seed}.json"
    code = cli_main(
        [
            "gen", "--family", "labeled-mwc", "--n", str(n),
            "--mwcs", ";".join(groups), "--id", f"quota-{seed}", "--out", str(out),
        ]
    )
    assert code == 0
    return out


def test_call_efficiency(tmp_path):
    """Desk-scale efficiency: on 32 labeled winning-coalition games with
    n=10 and the exact full-lattice holdout, constraint generation with
    random seeding and a sampling oracle reaches within 0.01 of the
    sample-then-solve baseline's final holdout deficit using at most a third
    of its distinct oracle calls, in at least 75% of instances."""
    n = 10
    wins = 0
    for seed in range(32):
        inst_path = _labeled_quota_instance(n, seed, tmp_path)
        from leastcore.games import load_instance

        instance = load_instance(inst_path)
        yp_game = build_oracle(instance)
        _, yp_trace = run_yp(yp_game, budget=4096, seed=seed)
        holdout = full_lattice_holdout(build_oracle(instance))
        yp_trace = attach_holdout(yp_trace, holdout, q=1.0)
        yp_final = yp_trace.rounds[-1].holdout_eps
        yp_calls = yp_trace.total_calls

        cg_game = build_oracle(instance)
        config = CgConfig(
            seeding=RandomSeeds(16, seed=seed),
            oracle="sampling",
            sampling=SamplingSpec(distribution="size-stratified", m=128, seed=seed),
            batch_k=64,
            budget=4096,
            egalitarian=True,
            max_rounds=64,
        )
        _, cg_trace = run_cg(cg_game, config)
        cg_trace = attach_holdout(cg_trace, holdout, q=1.0)
        hit = calls_to_target([cg_trace], yp_final, tol=0.01)[0]
        if hit is not None and hit <= yp_calls / 3:
            wins += 1
    assert wins >= 24, f"only {wins}/32 instances met the call-efficiency target"
    _pass("call efficiency", f"{wins}/32 instances at <= 1/3 of baseline calls")


def test_cli_determinism(tmp_path):
    """Every command rerun from its manifest with a warm cache is
    byte-identical."""
    inst = tmp_path / "game.json"
    assert cli_main(["gen", "--family", "labeled-mwc", "--n", "8", "--mwcs", "0;1,2,3;4,5", "--out", str(inst)]) == 0

    for method, extra in [
        ("cg", ["--seeding", "R", "--seed-count", "8", "--oracle", "sample", "--m", "32"]),
        ("yp", ["--budget", "100"]),
        ("full", []),
    ]:
        cold = tmp_path / f"{method}-cold"
        warm1 = tmp_path / f"{method}-warm1"
        warm2 = tmp_path / f"{method}-warm2"
        cache = tmp_path / f"{method}-cache.jsonl"
        base = ["solve", "--instance", str(inst), "--method", method, "--seed", "5", "--cache", str(cache)]
        assert cli_main(base + extra + ["--out", str(cold)]) == 0
        # warm-cache reruns from the manifest must agree byte for byte
        assert cli_main(["solve", "--from-manifest", str(cold / "manifest.json"), "--out", str(warm1)]) == 0
        assert cli_main(["solve", "--from-manifest", str(cold / "manifest.json"), "--out", str(warm2)]) == 0
        for artifact in ("allocation.json", "trace.tsv", "manifest.json"):
            assert (warm1 / artifact).read_bytes() == (warm2 / artifact).read_bytes(), (
                f"{method}/{artifact} differs across warm reruns"
            )
        # the solution itself is identical from the cold run onward
        assert (cold / "allocation.json").read_bytes() == (warm1 / "allocation.json").read_bytes()

    metrics1, metrics2 = tmp_path / "m1.tsv", tmp_path / "m2.tsv"
    alloc = tmp_path / "full-cold" / "allocation.json"
    for out in (metrics1, metrics2):
        assert cli_main(
            ["eval", "--instance", str(inst), "--allocation", str(alloc), "--full-holdout", "--q", "1.0", "--out", str(out)]
        ) == 0
    assert metrics1.read_bytes() == metrics2.read_bytes()

    cli_main(["gen", "--family", "example-pair", "--n", "4", "--out", str(tmp_path / "pair.json")])
    r1, r2 = tmp_path / "r1.tsv", tmp_path / "r2.tsv"
    for out in (r1, r2):
        assert cli_main(
            [
                "sensitivity",
                "--true-instance", str(tmp_path / "pair-true.json"),
                "--estimated-instance", str(tmp_path / "pair-est.json"),
                "--out", str(out),
            ]
        ) == 0
    assert r1.read_bytes() == r2.read_bytes()
    _pass("determinism", "solve/eval/sensitivity reruns byte-identical")


BRIDGE_DIR = Path(__file__).resolve().parents[1] / "bridge"


def _bridge_argv() -> list[str]:
    dist = BRIDGE_DIR / "dist" / "main.js"
    if not dist.exists():
        import subprocess

        subprocess.run(["npx", "tsc", "-p", "."], cwd=BRIDGE_DIR, check=True)
    return ["node", str(dist)]


@pytest.mark.skipif(
    not (BRIDGE_DIR / "package.json").exists(), reason="bridge package not present"
)
def test_bridge_protocol_conformance(tmp_path):
    """[SECONDARY] The bridge in mock-API mode completes a scripted session
    covering all five request types with zero parse errors, and its cache
    file replays into the engine with zero new oracle calls."""
    game_file = tmp_path / "mock-game.json"
    game_file.write_text(
        json.dumps(
            {
                "n": 6,
                "mwcs": [[0], [1, 2, 3]],
                "question": "which ingredients complete the recipe?",
                "answer": "flour and water",
                "documents": [f"doc {i}" for i in range(6)],
            }
        ),
        encoding="utf-8",
    )
    cache_file = tmp_path / "bridge-cache.jsonl"
    queried = [[0], [1, 2, 3], [1, 2], [4, 5], [0, 4], [2, 3, 4, 5]]
    argv = _bridge_argv() + ["--mock-game", str(game_file), "--cache", str(cache_file)]
    with PluginSession(argv, timeout=30.0) as session:
        hello = session.hello(6, labels=["gold", "evidence", "evidence", "evidence", "negative", "negative"])
        assert hello["name"] == "leastcore-bridge"
        values = {tuple(c): session.value(c) for c in queried}
        assert values[(0,)] == 1.0
        assert values[(1, 2, 3)] == 1.0
        assert values[(1, 2)] == 0.0
        assert values[(4, 5)] == 0.0
        seeds = session.propose_seeds(4)
        assert seeds == [[0], [1, 2, 3]]
        violated = session.propose_violated([0.0, 0.2, 0.2, 0.2, 0.2, 0.2], 0.0, 4)
        assert violated == [[0], [1, 2, 3]]
        proposal = session.propose_allocation()
        assert len(proposal) == 6
        assert sum(proposal) == pytest.approx(1.0, abs=1e-9)
        protocol_warnings = [w for w in session.warnings if "protocol" in w]
        assert protocol_warnings == []

    # replay: the bridge's cache file drives the engine without new calls
    cache = read_cache_file(cache_file, 6)
    instance = GameInstance(id="replay", n=6, oracle_spec={"kind": "cache"}, cache=cache)
    oracle = build_oracle(instance)
    for coalition in queried:
        mask = sum(1 << i for i in coalition)
        assert oracle.query_mask(mask) == cache[mask]
    assert oracle.calls == 0
    _pass("bridge protocol conformance", "five request types, cache replay with 0 calls")
