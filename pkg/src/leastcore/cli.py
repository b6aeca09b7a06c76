"""Command-line surface.

Subcommands:
    gen          write a synthetic game instance file
    solve        run a solver on an instance, writing allocation + trace
    eval         compute metrics for a stored allocation
    sensitivity  compare a true/estimated instance pair

Every solve writes a manifest echoing the resolved configuration; re-running
from the manifest with a warm cache reproduces the outputs byte for byte.

Exit codes: 0 solved/converged, 2 usage, 3 budget exhausted, 4 plugin
failure, 5 numerical failure, 6 invalid instance or parameters, 7 problem
too large, 8 round cap hit, 9 no feasible point found.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from . import bench
from .cg import CgConfig, run_cg
from .ellipsoid import EllipsoidConfig, run_ellipsoid_lp, run_ellipsoid_qp
from .errors import (
    FailureNoFeasible,
    InvalidParams,
    InvariantViolation,
    LeastCoreError,
    NumericalFailure,
    ParseError,
    PluginProtocolError,
    PluginTimeout,
    SpawnError,
    TooLarge,
)
from .games import (
    Allocation,
    Coalition,
    GameInstance,
    build_oracle,
    load_instance,
    make_power_game,
    save_instance,
)
from .lp import dump_lp_format, enumerate_constraints, solve_full_lp, solve_restricted_qp
from .plugin import PluginSession
from .sensitivity import sensitivity_report
from .separation import (
    ExternalSeeds,
    MwcSeeds,
    RandomSeeds,
    SamplingSpec,
    SingletonSeeds,
    exhaustive_oracle,
    external_oracle,
    required_samples,
    sampling_oracle,
)
from .trace import RoundRecord, SolveTrace, write_trace

EXIT_OK = 0
EXIT_BUDGET = 3
EXIT_PLUGIN = 4
EXIT_NUMERICAL = 5
EXIT_INVALID = 6
EXIT_TOO_LARGE = 7
EXIT_MAX_ROUNDS = 8
EXIT_NO_FEASIBLE = 9

_REASON_CODES = {"Converged": EXIT_OK, "BudgetExhausted": EXIT_BUDGET, "MaxRounds": EXIT_MAX_ROUNDS}


def _json_default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    raise TypeError(f"not serializable: {obj!r}")


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )
    tmp.replace(path)


def manifest_hash(manifest: dict) -> str:
    canonical = json.dumps(manifest, sort_keys=True, default=_json_default)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# gen


def _parse_mwcs(text: str, n: int) -> list[Coalition]:
    groups = [g for g in text.split(";") if g.strip()]
    return [
        Coalition.from_indices([int(i) for i in g.split(",")], n) for g in groups
    ]


def _labeled_mwc_labels(n: int, mwcs: list[Coalition]) -> list[str]:
    # gold: members of singleton winning sets; evidence: members of larger
    # winning sets; negative: everyone else
    labels = ["negative"] * n
    for c in mwcs:
        for i in c.indices():
            if c.size == 1:
                labels[i] = "gold"
            elif labels[i] != "gold":
                labels[i] = "evidence"
    return labels


def cmd_gen(args: argparse.Namespace) -> int:
    n = args.n
    out = Path(args.out)
    instance_id = args.id or f"{args.family}-n{n}"
    if args.family in ("mwc", "labeled-mwc"):
        if not args.mwcs:
            raise InvalidParams("--mwcs is required for winning-coalition families")
        mwcs = _parse_mwcs(args.mwcs, n)
        spec = {"kind": "mwc", "mwcs": [c.to_hex() for c in mwcs]}
        labels = _labeled_mwc_labels(n, mwcs) if args.family == "labeled-mwc" else None
        save_instance(GameInstance(id=instance_id, n=n, oracle_spec=spec, labels=labels), out)
    elif args.family == "veto":
        if args.veto is None:
            raise InvalidParams("--veto is required for the veto family")
        spec = {"kind": "veto", "veto": args.veto}
        save_instance(GameInstance(id=instance_id, n=n, oracle_spec=spec), out)
    elif args.family == "power":
        if args.p is None:
            raise InvalidParams("--p is required for the power family")
        make_power_game(n, args.p)  # validates the exponent
        spec = {"kind": "power", "p": args.p}
        save_instance(GameInstance(id=instance_id, n=n, oracle_spec=spec), out)
    elif args.family == "example-pair":
        stem = out.with_suffix("")
        for side, suffix in (("true", "-true"), ("estimated", "-est")):
            save_instance(
                GameInstance(
                    id=f"{instance_id}-{side}",
                    n=n,
                    oracle_spec={"kind": "example-pair", "side": side},
                ),
                Path(str(stem) + suffix + ".json"),
            )
    else:
        raise InvalidParams(f"unknown family {args.family!r}")
    return EXIT_OK


# --------------------------------------------------------------------------
# solve


def _solve_manifest(args: argparse.Namespace) -> dict:
    return {
        "command": "solve",
        "instance": str(args.instance),
        "method": args.method,
        "seeding": args.seeding,
        "seed_count": args.seed_count,
        "oracle": args.oracle,
        "egalitarian": bool(args.egalitarian),
        "budget": args.budget,
        "batch_k": args.batch_k,
        "m": args.m,
        "delta": args.delta,
        "gamma": args.gamma,
        "r": args.r,
        "seed": args.seed,
        "max_rounds": args.max_rounds,
        "plugin": args.plugin,
        "cache": str(args.cache) if args.cache else None,
    }


def _seeding_strategy(args: argparse.Namespace, instance: GameInstance):
    if args.seeding == "R":
        return RandomSeeds(args.seed_count, seed=args.seed)
    if args.seeding == "S":
        return SingletonSeeds()
    if args.seeding == "L":
        return ExternalSeeds(k=args.seed_count)
    if args.seeding == "mwc":
        if instance.oracle_spec.get("kind") != "mwc":
            raise InvalidParams("mwc seeding needs an instance with a winning-coalition oracle")
        mwcs = [Coalition.from_hex(h, instance.n) for h in instance.oracle_spec["mwcs"]]
        return MwcSeeds(tuple(mwcs))
    raise InvalidParams(f"unknown seeding {args.seeding!r}")


def _sampling_spec(args: argparse.Namespace) -> SamplingSpec:
    m = args.m
    if m is None:
        m = required_samples(args.delta, args.gamma, args.max_rounds)
    return SamplingSpec(m=m, seed=args.seed)


def _run_solve(args: argparse.Namespace, manifest: dict) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    instance = load_instance(args.instance)
    digest = manifest_hash(manifest)

    plugin = None
    needs_plugin = (
        args.method == "zs"
        or args.oracle == "external"
        or args.seeding == "L"
        or instance.oracle_spec.get("kind") == "external"
    )
    if needs_plugin:
        if not args.plugin:
            raise InvalidParams("this configuration requires --plugin")
        plugin = PluginSession(shlex.split(args.plugin), timeout=args.plugin_timeout)
        plugin.hello(instance.n, labels=instance.labels)
    try:
        oracle = build_oracle(instance, plugin=plugin, persist_path=args.cache)
        reason = "Converged"
        if args.method == "cg":
            config = CgConfig(
                seeding=_seeding_strategy(args, instance),
                oracle={"sample": "sampling"}.get(args.oracle, args.oracle),
                batch_k=args.batch_k,
                max_rounds=args.max_rounds,
                budget=args.budget,
                egalitarian=args.egalitarian,
                sampling=_sampling_spec(args),
                external_m=args.batch_k,
            )
            allocation, trace = run_cg(oracle, config, plugin=plugin)
            reason = trace.reason
        elif args.method == "ellipsoid":
            config = EllipsoidConfig(inner_radius=args.r, batch_k=1)
            if args.oracle == "exhaustive":
                sep = exhaustive_oracle(oracle)
            elif args.oracle == "sample":
                sep = sampling_oracle(oracle, _sampling_spec(args))
            else:
                sep = external_oracle(oracle, plugin, args.batch_k)
            allocation, trace = run_ellipsoid_lp(oracle, sep, config)
            if args.egalitarian:
                allocation = run_ellipsoid_qp(oracle, allocation.eps, sep, config)
        elif args.method == "yp":
            allocation, trace = bench.run_yp(
                oracle,
                budget=args.budget,
                seed=args.seed,
                singleton_seed=args.seeding == "S",
                egalitarian=args.egalitarian,
            )
        elif args.method == "zs":
            allocation, _ = bench.run_zs(plugin, oracle)
            trace = SolveTrace(
                n=instance.n,
                rounds=[RoundRecord(round=1, calls=1, eps=0.0, u=allocation.u)],
                reason="Converged",
                total_calls=oracle.calls,
                method="zs",
            )
        elif args.method == "full":
            cs = enumerate_constraints(oracle, cap=args.enum_cap)
            lp = solve_full_lp(oracle, cap=args.enum_cap)
            if args.egalitarian:
                allocation = solve_restricted_qp(cs, lp.eps)
            else:
                u = np.maximum(lp.u, 0.0)
                allocation = Allocation(u / u.sum(), max(lp.eps, 0.0))
            trace = SolveTrace(
                n=instance.n,
                rounds=[RoundRecord(round=1, calls=oracle.calls, eps=lp.eps, u=allocation.u)],
                reason="Converged",
                total_calls=oracle.calls,
                method="full",
            )
            if args.dump_lp:
                (outdir / "restricted.lp").write_text(dump_lp_format(cs), encoding="utf-8")
        else:
            raise InvalidParams(f"unknown method {args.method!r}")
    finally:
        if plugin is not None:
            plugin.shutdown()

    _write_json(manifest, outdir / "manifest.json")
    _write_json(
        {
            "u": [float(x) for x in allocation.u],
            "eps": float(allocation.eps),
            "method": args.method,
            "manifest_hash": digest,
        },
        outdir / "allocation.json",
    )
    write_trace(trace, outdir / "trace.tsv")
    return _REASON_CODES.get(reason, EXIT_OK)


def cmd_solve(args: argparse.Namespace) -> int:
    if args.from_manifest:
        stored = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        for key, value in stored.items():
            if key == "command":
                continue
            setattr(args, key, value)
    manifest = _solve_manifest(args)
    return _run_solve(args, manifest)


# --------------------------------------------------------------------------
# eval


def cmd_eval(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    payload = json.loads(Path(args.allocation).read_text(encoding="utf-8"))
    u = np.asarray(payload["u"], dtype=np.float64)
    if len(u) != instance.n:
        raise InvalidParams(
            f"allocation has {len(u)} entries but the instance has n={instance.n}"
        )
    allocation = Allocation(u, float(payload.get("eps", 0.0)))
    oracle = build_oracle(instance, persist_path=args.cache)
    if args.full_holdout:
        holdout = bench.full_lattice_holdout(oracle)
    elif instance.holdout:
        holdout = bench.make_holdout(oracle, masks=[c.mask for c in instance.holdout])
    else:
        holdout = bench.make_holdout(oracle, size=args.holdout_size, seed=args.holdout_seed)
    report = bench.compute_metrics(
        allocation,
        holdout,
        instance.labels,
        q=args.q,
        total_calls=oracle.calls,
    )
    rows = [report.to_record()]
    rows[0]["instance"] = instance.id
    rows[0]["method"] = payload.get("method", "unknown")
    bench.write_records(rows, Path(args.out))
    return EXIT_OK


# --------------------------------------------------------------------------
# sensitivity


def cmd_sensitivity(args: argparse.Namespace) -> int:
    true_instance = load_instance(args.true_instance)
    est_instance = load_instance(args.estimated_instance)
    v = build_oracle(true_instance)
    vhat = build_oracle(est_instance)
    report = sensitivity_report(v, vhat, cap=args.enum_cap)
    lines = [
        f"eps_true\t{report.eps_true!r}",
        f"eps_hat\t{report.eps_hat!r}",
        f"gap\t{report.gap!r}",
        f"dual_bound\t{report.dual_bound!r}",
        f"worst_delta\t{report.worst_delta!r}",
    ]
    for coalition in sorted(report.witness.weights, key=Coalition.sort_key):
        lines.append(f"lambda:{coalition.to_hex()}\t{report.witness.weights[coalition]!r}")
    out = Path(args.out)
    tmp = out.with_suffix(out.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leastcore",
        description="Least-core credit assignment: solvers, metrics, and instance tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic game instance")
    gen.add_argument("--family", required=True, choices=["mwc", "veto", "power", "example-pair", "labeled-mwc"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--mwcs", help="winning coalitions, e.g. '0;1,2,3'")
    gen.add_argument("--veto", type=int)
    gen.add_argument("--p", type=float)
    gen.add_argument("--id")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="solve an instance")
    solve.add_argument("--instance")
    solve.add_argument("--method", choices=["cg", "ellipsoid", "yp", "zs", "full"], default="cg")
    solve.add_argument("--seeding", choices=["R", "S", "L", "mwc"], default="S")
    solve.add_argument("--seed-count", type=int, default=64)
    solve.add_argument("--oracle", choices=["exhaustive", "sample", "external"], default="exhaustive")
    solve.add_argument("--egalitarian", action=argparse.BooleanOptionalAction, default=True)
    solve.add_argument("--budget", type=int, default=4096)
    solve.add_argument("--batch-k", type=int, default=64)
    solve.add_argument("--m", type=int, default=None, help="samples per separation call")
    solve.add_argument("--delta", type=float, default=0.1)
    solve.add_argument("--gamma", type=float, default=0.1)
    solve.add_argument("--r", type=float, default=1e-6, help="ellipsoid inner radius")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--max-rounds", type=int, default=64)
    solve.add_argument("--enum-cap", type=int, default=16)
    solve.add_argument("--plugin", default=None, help="plugin command line (one shell-quoted string)")
    solve.add_argument("--plugin-timeout", type=float, default=120.0)
    solve.add_argument("--cache", default=None, help="oracle cache file (read and append)")
    solve.add_argument("--dump-lp", action="store_true")
    solve.add_argument("--from-manifest", default=None)
    solve.add_argument("--out", required=True)
    solve.set_defaults(func=cmd_solve)

    ev = sub.add_parser("eval", help="metrics for a stored allocation")
    ev.add_argument("--instance", required=True)
    ev.add_argument("--allocation", required=True)
    ev.add_argument("--q", type=float, default=0.99)
    ev.add_argument("--holdout-size", type=int, default=4096)
    ev.add_argument("--holdout-seed", type=int, default=0)
    ev.add_argument("--full-holdout", action="store_true")
    ev.add_argument("--cache", default=None)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    sens = sub.add_parser("sensitivity", help="true-vs-estimated sensitivity report")
    sens.add_argument("--true-instance", required=True)
    sens.add_argument("--estimated-instance", required=True)
    sens.add_argument("--enum-cap", type=int, default=16)
    sens.add_argument("--out", required=True)
    sens.set_defaults(func=cmd_sensitivity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpawnError, PluginTimeout, PluginProtocolError) as exc:
        print(f"plugin failure: {exc}", file=sys.stderr)
        return EXIT_PLUGIN
    except TooLarge as exc:
        print(f"too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FailureNoFeasible as exc:
        print(f"no feasible point: {exc}", file=sys.stderr)
        return EXIT_NO_FEASIBLE
    except (ParseError, InvariantViolation, InvalidParams) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LeastCoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
