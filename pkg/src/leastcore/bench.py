"""Evaluation protocol: holdout deficits, rank and classification metrics,
and the sample-then-solve and zero-shot baselines.

The headline metric is the holdout deficit: a high quantile (nearest-rank)
of the under-compensation of held-out coalitions under a candidate
allocation. At full lattice coverage and q = 1 it equals the exact worst
deficit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, Stream, Tolerances, rng_for
from .errors import (
    DegenerateLabels,
    DegenerateProposal,
    DimensionMismatch,
    EmptyHoldout,
    InvalidParams,
    MissingHoldoutColumn,
    NoLabels,
)
from .games import Allocation, CachedOracle, Coalition, ValueOracle, mask_payoffs
from .lp import ConstraintSet, SolveStatus, solve_restricted_lp, solve_restricted_qp
from .trace import RoundRecord, SolveTrace

LABEL_RANK = {"gold": 2, "evidence": 1, "negative": 0}

YP_SNAPSHOT_BATCH = 128  # incremental re-solve granularity for curves
DEFAULT_HOLDOUT_SIZE = 4096


@dataclass
class HoldoutSet:
    """Uniformly sampled (without replacement) nonempty proper coalitions
    with their cached estimated values."""

    n: int
    masks: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.masks)

    def coalitions(self) -> list[Coalition]:
        return [Coalition(int(m), self.n) for m in self.masks]


def make_holdout(
    oracle: ValueOracle,
    size: int | None = None,
    seed: int = 0,
    *,
    masks: list[int] | None = None,
) -> HoldoutSet:
    """Sample a holdout set and evaluate it once. ``masks`` overrides the
    sampling with an explicit list (e.g. an instance's stored holdout)."""
    n = oracle.n
    space = (1 << n) - 2
    if masks is None:
        size = min(size if size is not None else DEFAULT_HOLDOUT_SIZE, space)
        rng = rng_for(seed, Stream.HOLDOUT)
        if n <= 20:
            pool = np.arange(1, space + 1, dtype=np.uint64)
            masks_arr = rng.choice(pool, size=size, replace=False)
        else:
            chosen: set[int] = set()
            while len(chosen) < size:
                chosen.add(int(rng.integers(1, space + 1)))
            masks_arr = np.asarray(sorted(chosen), dtype=np.uint64)
        masks_arr = np.sort(masks_arr)
    else:
        masks_arr = np.asarray([int(m) for m in masks], dtype=np.uint64)
        if ((masks_arr == 0) | (masks_arr == np.uint64((1 << n) - 1))).any():
            raise InvalidParams("holdout masks must be nonempty proper subsets")
    values = oracle.query_masks(masks_arr)
    return HoldoutSet(n=n, masks=masks_arr, values=values)


def full_lattice_holdout(oracle: ValueOracle) -> HoldoutSet:
    """Every nonempty proper coalition; makes the q=1 holdout deficit exact."""
    n = oracle.n
    masks = np.arange(1, (1 << n) - 1, dtype=np.uint64)
    return HoldoutSet(n=n, masks=masks, values=oracle.query_masks(masks))


def holdout_epsilon(u: np.ndarray, holdout: HoldoutSet, q: float = 0.99) -> float:
    """Nearest-rank q-quantile of the holdout deficits; q=1 is the maximum."""
    if len(holdout) == 0:
        raise EmptyHoldout("holdout set is empty")
    if not 0 < q <= 1:
        raise InvalidParams(f"quantile must lie in (0, 1], got {q}")
    deficits = np.sort(holdout.values - mask_payoffs(holdout.masks, u))
    rank = math.ceil(q * len(deficits))
    return float(deficits[rank - 1])


def kendall_tau_b(u: np.ndarray, labels: list[str]) -> float:
    """Tie-corrected rank correlation between allocation entries and the
    label ranks gold > evidence > negative. Fully tied allocations return 0
    (the correlation is undefined; callers can detect it via ties)."""
    if labels is None or len(labels) == 0:
        raise NoLabels("labels are required for rank correlation")
    if len(labels) != len(u):
        raise DimensionMismatch(f"{len(labels)} labels for {len(u)} players")
    try:
        ranks = np.asarray([LABEL_RANK[lab] for lab in labels], dtype=np.float64)
    except KeyError as exc:
        raise NoLabels(f"unknown label {exc.args[0]!r}") from exc
    if len(set(labels)) < 2:
        raise DegenerateLabels("at least two distinct label ranks are required")
    u = np.asarray(u, dtype=np.float64)
    concordant = discordant = ties_u = ties_r = 0
    n = len(u)
    for i in range(n):
        for j in range(i + 1, n):
            du = u[i] - u[j]
            dr = ranks[i] - ranks[j]
            if du == 0 and dr == 0:
                continue
            if du == 0:
                ties_u += 1
            elif dr == 0:
                ties_r += 1
            elif du * dr > 0:
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_u) * (concordant + discordant + ties_r)
    )
    if denom == 0:
        return 0.0
    return (concordant - discordant) / denom


def classification_rates(
    u: np.ndarray, labels: list[str], zero_tol: float = 1e-6
) -> tuple[float, float, float]:
    """(gold false-negative rate, negative false-positive rate, fraction of
    players with allocation above the zero threshold)."""
    if labels is None or len(labels) == 0:
        raise NoLabels("labels are required for classification rates")
    if len(labels) != len(u):
        raise DimensionMismatch(f"{len(labels)} labels for {len(u)} players")
    u = np.asarray(u, dtype=np.float64)
    gold = [i for i, lab in enumerate(labels) if lab == "gold"]
    negative = [i for i, lab in enumerate(labels) if lab == "negative"]
    gold_fn = float(np.mean([u[i] <= zero_tol for i in gold])) if gold else 0.0
    neg_fp = float(np.mean([u[i] > zero_tol for i in negative])) if negative else 0.0
    pct_nonzero = float((u > zero_tol).mean())
    return gold_fn, neg_fp, pct_nonzero


@dataclass
class MetricsReport:
    holdout_eps: float | None = None
    tau_b: float | None = None
    gold_fn: float | None = None
    neg_fp: float | None = None
    pct_nonzero: float | None = None
    total_calls: int = 0
    quantile: float = 0.99
    degenerate_tau: bool = False
    raw_proposal: list[float] | None = None  # zero-shot only: pre-normalization

    def to_record(self) -> dict[str, str]:
        def fmt(x):
            return "absent" if x is None else repr(x)

        record = {
            "holdout_eps": fmt(self.holdout_eps),
            "tau_b": fmt(self.tau_b),
            "gold_fn": fmt(self.gold_fn),
            "neg_fp": fmt(self.neg_fp),
            "pct_nonzero": fmt(self.pct_nonzero),
            "total_calls": str(self.total_calls),
            "quantile": repr(self.quantile),
            "degenerate_tau": str(self.degenerate_tau).lower(),
        }
        if self.raw_proposal is not None:
            record["raw_proposal"] = ",".join(repr(x) for x in self.raw_proposal)
        return record


def compute_metrics(
    allocation: Allocation,
    holdout: HoldoutSet | None,
    labels: list[str] | None,
    *,
    q: float = 0.99,
    zero_tol: float = 1e-6,
    total_calls: int = 0,
) -> MetricsReport:
    """Metrics that apply given the available inputs; label metrics report
    as absent when labels are missing."""
    report = MetricsReport(total_calls=total_calls, quantile=q)
    if holdout is not None and len(holdout):
        report.holdout_eps = holdout_epsilon(allocation.u, holdout, q)
    if labels:
        u = allocation.u
        if len(set(labels)) >= 2:
            report.tau_b = kendall_tau_b(u, labels)
            report.degenerate_tau = bool(np.all(u == u[0]))
        gold_fn, neg_fp, pct = classification_rates(u, labels, zero_tol)
        report.gold_fn, report.neg_fp, report.pct_nonzero = gold_fn, neg_fp, pct
    else:
        report.pct_nonzero = float((allocation.u > zero_tol).mean())
    return report


# --------------------------------------------------------------------------
# Baselines


def run_yp(
    game: ValueOracle,
    budget: int,
    seed: int = 0,
    singleton_seed: bool = False,
    *,
    egalitarian: bool = True,
    tols: Tolerances = DEFAULT_TOLS,
) -> tuple[Allocation, SolveTrace]:
    """Sample-then-solve baseline: draw ``budget`` distinct uniform
    coalitions (plus all singletons with ``singleton_seed``), evaluate them
    all, then solve the restricted LP (and QP) once at the end.

    Intermediate snapshots are recorded per batch of 128 coalitions so
    calls-to-target curves can be plotted; they are re-solves over prefixes
    of the same draw sequence.
    """
    if budget < 1:
        raise InvalidParams(f"budget must be >= 1, got {budget}")
    cached_game = game if isinstance(game, CachedOracle) else CachedOracle(game)
    n = cached_game.n
    space = (1 << n) - 2
    rng = rng_for(seed, Stream.SAMPLE_THEN_SOLVE)
    rows: list[tuple[Coalition, float]] = []
    seen: set[int] = set()
    if singleton_seed:
        for i in range(n):
            mask = 1 << i
            seen.add(mask)
            rows.append((Coalition(mask, n), cached_game.query_mask(mask)))
    target = min(budget, space)
    while len(seen) < min(target + (n if singleton_seed else 0), space):
        mask = int(rng.integers(1, space + 1))
        if mask in seen:
            continue
        seen.add(mask)
        rows.append((Coalition(mask, n), cached_game.query_mask(mask)))

    trace = SolveTrace(n=n, method="yp-s" if singleton_seed else "yp")
    cs = ConstraintSet(n)
    cursor = 0
    snapshot_points = list(range(YP_SNAPSHOT_BATCH, len(rows), YP_SNAPSHOT_BATCH))
    snapshot_points.append(len(rows))
    last: Allocation | None = None
    for index, point in enumerate(snapshot_points, start=1):
        while cursor < point:
            coalition, value = rows[cursor]
            cs.add(coalition, value)
            cursor += 1
        lp = solve_restricted_lp(cs, tols)
        if lp.status != SolveStatus.OPTIMAL:
            raise InvalidParams(f"restricted LP failed with {lp.status.value}")
        if egalitarian:
            last = solve_restricted_qp(cs, lp.eps, tols, warm=lp)
        else:
            u = np.maximum(lp.u, 0.0)
            last = Allocation(u / u.sum(), max(lp.eps, 0.0))
        trace.rounds.append(
            RoundRecord(round=index, calls=point, eps=lp.eps, u=last.u, added=point)
        )
    trace.reason = "Converged"
    trace.total_calls = cached_game.calls
    assert last is not None
    last.validate()
    return last, trace


def run_zs(
    plugin,
    game: ValueOracle,
    validate: bool = False,
    *,
    holdout: HoldoutSet | None = None,
    labels: list[str] | None = None,
    q: float = 0.99,
) -> tuple[Allocation, MetricsReport]:
    """Zero-shot baseline: one external allocation proposal, renormalized
    (clamped to [0,1], divided by its sum) with the raw proposal recorded.
    No value-oracle calls are made unless ``validate`` asks for holdout
    metrics."""
    raw = plugin.propose_allocation()
    u = np.asarray([float(x) for x in raw], dtype=np.float64)
    if len(u) != game.n:
        raise DimensionMismatch(f"proposal has {len(u)} entries for n={game.n}")
    clipped = np.clip(u, 0.0, 1.0)
    total = float(clipped.sum())
    if total <= 0.0:
        raise DegenerateProposal(f"proposal {u.tolist()} has nonpositive mass")
    allocation = Allocation(clipped / total, 0.0)
    report = MetricsReport(total_calls=0, quantile=q)
    if validate:
        holdout = holdout if holdout is not None else make_holdout(game)
        report = compute_metrics(allocation, holdout, labels, q=q)
    elif labels:
        report = compute_metrics(allocation, None, labels, q=q)
    report.raw_proposal = [float(x) for x in u]
    return allocation, report


# --------------------------------------------------------------------------
# Calls-to-target aggregation


def attach_holdout(trace: SolveTrace, holdout: HoldoutSet, q: float = 0.99) -> SolveTrace:
    """Annotate every snapshot with its holdout deficit."""
    values = [holdout_epsilon(r.u, holdout, q) for r in trace.rounds]
    return trace.with_holdout(values)


def calls_to_target(
    traces: list[SolveTrace], target_eps: float, tol: float = 0.01
) -> list[int | None]:
    """Per trace: the smallest snapshot call count whose holdout deficit is
    within ``tol`` of the target, or None if never reached."""
    results: list[int | None] = []
    for trace in traces:
        hit: int | None = None
        for record in trace.rounds:
            if record.holdout_eps is None:
                raise MissingHoldoutColumn(
                    "trace snapshots lack holdout deficits; attach_holdout first"
                )
            if record.holdout_eps <= target_eps + tol:
                hit = record.calls
                break
        results.append(hit)
    return results


def calls_to_target_table(
    per_method: dict[str, list[int | None]]
) -> list[dict[str, str]]:
    """CDF rows over instances: for each method, the fraction of instances
    on target within each distinct observed call count."""
    rows = []
    for method in sorted(per_method):
        counts = per_method[method]
        total = len(counts)
        reached = sorted(c for c in counts if c is not None)
        for calls in sorted(set(reached)):
            fraction = sum(1 for c in reached if c <= calls) / total
            rows.append(
                {"method": method, "calls": str(calls), "fraction": repr(fraction)}
            )
        rows.append(
            {
                "method": method,
                "calls": "inf",
                "fraction": repr(len(reached) / total if total else 0.0),
            }
        )
    return rows


def write_records(rows: list[dict[str, str]], path) -> None:
    """Columnar text emission: tab-separated with a header."""
    from pathlib import Path

    path = Path(path)
    if not rows:
        path.write_text("", encoding="utf-8")
        return
    header = list(rows[0])
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(row[h] for h in header))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)
