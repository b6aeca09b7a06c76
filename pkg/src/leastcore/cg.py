"""Joint constraint generation for the (egalitarian) least core.

Each round solves the restricted LP for the deficit, optionally re-solves
the restricted QP at that deficit for the egalitarian allocation, then asks
the separation oracle for under-compensated coalitions. An empty answer
terminates the run; otherwise the violated coalitions join the constraint
set and the loop continues, subject to round and oracle-call budgets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import (
    BudgetExceeded,
    InvalidParams,
    NotBinary,
    NotMonotone,
    NumericalFailure,
)
from .games import Allocation, CachedOracle, Coalition, ValueOracle
from .lp import ConstraintSet, SolveStatus, solve_restricted_lp, solve_restricted_qp
from .separation import (
    MwcSeeds,
    SamplingSpec,
    SeedStrategy,
    SeparationOracle,
    SingletonSeeds,
    exhaustive_oracle,
    external_oracle,
    sampling_oracle,
    seed_constraints,
)
from .trace import RoundRecord, SolveTrace


@dataclass
class CgConfig:
    """Constraint-generation run parameters.

    ``budget`` caps the distinct value-oracle evaluations across seeding and
    separation; ``batch_k`` is the number of coalitions requested from the
    separation oracle per round.
    """

    seeding: SeedStrategy = field(default_factory=SingletonSeeds)
    oracle: str = "exhaustive"  # exhaustive | sampling | external
    batch_k: int = 64
    max_rounds: int = 64
    budget: int | None = 4096
    egalitarian: bool = True
    sampling: SamplingSpec | None = None
    external_m: int = 16
    tolerances: Tolerances = DEFAULT_TOLS

    def validated(self, n: int) -> "CgConfig":
        if self.batch_k < 1:
            raise InvalidParams(f"batch_k must be >= 1, got {self.batch_k}")
        if self.max_rounds < 1:
            raise InvalidParams(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.budget is not None and self.budget < n:
            raise InvalidParams(
                f"budget {self.budget} leaves no room for the {n} structural evaluations"
            )
        if self.oracle not in ("exhaustive", "sampling", "external"):
            raise InvalidParams(f"unknown separation oracle {self.oracle!r}")
        return self


def _prepare_game(game: ValueOracle, budget: int | None) -> CachedOracle:
    cached_game = game if isinstance(game, CachedOracle) else CachedOracle(game)
    cached_game.budget = budget
    return cached_game


def _build_separation(
    game: CachedOracle, config: CgConfig, plugin
) -> SeparationOracle:
    if config.oracle == "exhaustive":
        return exhaustive_oracle(game, config.tolerances)
    if config.oracle == "sampling":
        spec = config.sampling if config.sampling is not None else SamplingSpec()
        return sampling_oracle(game, spec, config.tolerances)
    if plugin is None:
        raise InvalidParams("external separation requires a plugin session")
    return external_oracle(game, plugin, config.external_m, config.tolerances)


def _solve_round(
    cs: ConstraintSet, egalitarian: bool, tols: Tolerances
) -> tuple[np.ndarray, float]:
    lp = solve_restricted_lp(cs, tols)
    if lp.status != SolveStatus.OPTIMAL:
        raise NumericalFailure(f"restricted LP ended with status {lp.status.value}")
    if egalitarian:
        alloc = solve_restricted_qp(cs, lp.eps, tols, warm=lp)
        return alloc.u, lp.eps
    u = np.maximum(lp.u, 0.0)  # shave pivoting dust off the vertex
    return u / u.sum(), lp.eps


def run_cg(
    game: ValueOracle, config: CgConfig | None = None, *, plugin=None
) -> tuple[Allocation, SolveTrace]:
    """Run constraint generation until no violated coalition is found or a
    budget/round cap is hit. Returns the last allocation and the per-round
    trace."""
    config = (config or CgConfig()).validated(game.n)
    cached_game = _prepare_game(game, config.budget)
    sep = _build_separation(cached_game, config, plugin)
    trace = SolveTrace(n=game.n, method=f"cg-{config.oracle}")
    tols = config.tolerances

    try:
        cs = seed_constraints(config.seeding, cached_game, plugin=plugin)
        seed_exhausted = False
    except BudgetExceeded:
        cs = ConstraintSet(game.n)
        seed_exhausted = True

    u = np.zeros(game.n)
    eps = 0.0
    reason = "MaxRounds"
    for t in range(1, config.max_rounds + 1):
        u, eps = _solve_round(cs, config.egalitarian, tols)
        record = RoundRecord(round=t, calls=cached_game.calls, eps=eps, u=u)
        trace.rounds.append(record)
        if seed_exhausted:
            reason = "BudgetExhausted"
            break
        try:
            violated = sep.find_violated(u, eps, k=config.batch_k)
        except BudgetExceeded:
            reason = "BudgetExhausted"
            break
        trace.separation_calls += 1
        if not violated:
            reason = "Converged"
            break
        added = 0
        for coalition in violated:
            added += cs.add(coalition, cached_game.query(coalition))
        record.added = added
        if added == 0:
            raise NumericalFailure(
                "separation returned only already-known rows; violation tolerance broken"
            )
    trace.reason = reason
    trace.total_calls = cached_game.calls
    allocation = Allocation(u, max(eps, 0.0))
    allocation.validate(equality_tol=1e-9, box_tol=1e-9)
    return allocation, trace


# --------------------------------------------------------------------------
# Binary games: constraint generation over minimal winning coalitions


def _assert_binary_value(value: float, context: str) -> float:
    if value not in (0.0, 1.0):
        raise NotBinary(f"{context}: value {value!r} is not binary")
    return value


def _minimize_winning(
    game: CachedOracle, coalition: Coalition, known_winning: list[int]
) -> Coalition:
    """Strip players (highest index first) while the set stays winning."""
    mask = coalition.mask
    for i in reversed(range(coalition.n)):
        bit = 1 << i
        if not mask & bit:
            continue
        candidate = mask & ~bit
        if candidate == 0:
            continue  # the empty set never wins
        value = _assert_binary_value(
            game.query_mask(candidate), f"minimizing {coalition}"
        )
        if value == 1.0:
            mask = candidate
        else:
            for w in known_winning:
                if w & ~candidate == 0:
                    raise NotMonotone(
                        f"{Coalition(candidate, coalition.n)} loses but contains the "
                        f"winning {Coalition(w, coalition.n)}"
                    )
    return Coalition(mask, coalition.n)


def _scan_monotonicity(values: dict[int, float], winning: list[int], n: int) -> None:
    """Raise when an observed losing coalition contains a known winning one."""
    losing = [mask for mask, value in values.items() if value == 0.0]
    for w in winning:
        for mask in losing:
            if w & ~mask == 0 and w != mask:
                raise NotMonotone(
                    f"{Coalition(mask, n)} loses but contains the winning {Coalition(w, n)}"
                )


def run_cg_mwc(
    game: ValueOracle,
    known_mwcs: list[Coalition],
    config: CgConfig | None = None,
    *,
    verify_seeds: bool = False,
) -> tuple[Allocation, SolveTrace, list[Coalition]]:
    """Constraint generation specialized to binary monotone games.

    Seeds the LP with the supplied winning coalitions (value 1, no
    evaluation unless ``verify_seeds``), uses the max-violation oracle, and
    minimizes every returned winning coalition to a minimal winning
    coalition before inserting it. Returns the newly discovered MWCs; with
    eta seeds missing from the true MWC list, at most eta + 1 separation
    calls are made.
    """
    config = (config or CgConfig()).validated(game.n)
    if not game.binary:
        raise NotBinary("run_cg_mwc requires a binary value oracle")
    cached_game = _prepare_game(game, config.budget)
    sep = exhaustive_oracle(cached_game, config.tolerances)
    trace = SolveTrace(n=game.n, method="cg-mwc")
    tols = config.tolerances

    cs = seed_constraints(
        MwcSeeds(tuple(known_mwcs), verify=verify_seeds), cached_game
    )
    known_winning = [c.mask for c in known_mwcs]
    discovered: list[Coalition] = []

    u = np.zeros(game.n)
    eps = 0.0
    reason = "MaxRounds"
    for t in range(1, config.max_rounds + 1):
        u, eps = _solve_round(cs, config.egalitarian, tols)
        record = RoundRecord(round=t, calls=cached_game.calls, eps=eps, u=u)
        trace.rounds.append(record)
        try:
            violated = sep.find_violated(u, eps, k=config.batch_k)
        except BudgetExceeded:
            reason = "BudgetExhausted"
            break
        trace.separation_calls += 1
        if not violated:
            reason = "Converged"
            break
        added = 0
        for coalition in violated:
            _assert_binary_value(cached_game.query(coalition), f"violated {coalition}")
            mwc = _minimize_winning(cached_game, coalition, known_winning)
            if cs.add(mwc, 1.0):
                added += 1
                discovered.append(mwc)
                known_winning.append(mwc.mask)
        record.added = added
        if added == 0:
            raise NumericalFailure(
                "max-violation separation re-proposed known minimal winning coalitions"
            )
    trace.reason = reason
    trace.total_calls = cached_game.calls
    _scan_monotonicity(cached_game.snapshot(), known_winning, game.n)
    allocation = Allocation(u, max(eps, 0.0))
    allocation.validate()
    return allocation, trace, discovered
