"""Separation oracles and constraint seeding.

A separation oracle, given a candidate allocation ``u`` and deficit ``eps``,
returns coalitions whose value exceeds their payoff by more than the
violation tolerance, or nothing when it cannot find one. Every coalition
returned by any oracle here has been re-checked against the value oracle,
so violations are real rather than proposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .config import DEFAULT_TOLS, ENUMERATION_CAP, Stream, Tolerances, rng_for
from .errors import InvalidParams, InvalidProbability, TooLarge
from .games import Coalition, ValueOracle, mask_payoffs, proper_masks
from .lp import ConstraintSet


class SeparationOracle:
    """Interface: ``find_violated(u, eps, k)`` returns up to k distinct
    nonempty proper coalitions with ``payoff(S) + eps < v(S) - tol``."""

    def __init__(self, oracle: ValueOracle, tols: Tolerances = DEFAULT_TOLS):
        self.oracle = oracle
        self.tols = tols

    @property
    def oracle_calls(self) -> int:
        """Distinct value-oracle evaluations consumed through the backing oracle."""
        return self.oracle.calls

    def find_violated(self, u: np.ndarray, eps: float, k: int = 1) -> list[Coalition]:
        raise NotImplementedError

    def _is_violated(self, mask: int, payoff: float, eps: float) -> bool:
        return payoff + eps < self.oracle.query_mask(mask) - self.tols.violation


class ExhaustiveOracle(SeparationOracle):
    """Max-violation oracle by enumeration of all nonempty proper coalitions.

    Results come in decreasing violation order (ties broken canonically), so
    for a binary game the top result minimizes the payoff over winning
    coalitions.
    """

    def __init__(
        self,
        oracle: ValueOracle,
        tols: Tolerances = DEFAULT_TOLS,
        cap: int = ENUMERATION_CAP,
    ):
        if oracle.n > cap:
            raise TooLarge(
                f"exhaustive separation over 2^{oracle.n} coalitions exceeds the cap ({cap})"
            )
        super().__init__(oracle, tols)
        self._masks = proper_masks(oracle.n)

    def find_violated(self, u: np.ndarray, eps: float, k: int = 1) -> list[Coalition]:
        payoffs = mask_payoffs(self._masks, u)
        values = self.oracle.query_masks(self._masks)
        violation = values - payoffs - eps
        hit = np.where(violation > self.tols.violation)[0]
        if len(hit) == 0:
            return []
        order = sorted(hit, key=lambda i: (-violation[i], int(self._masks[i]).bit_count(), int(self._masks[i])))
        return [Coalition(int(self._masks[i]), self.oracle.n) for i in order[:k]]


def _uniform_proper_mask(rng: np.random.Generator, n: int) -> int:
    # uniform over {1, ..., 2^n - 2}
    return int(rng.integers(1, (1 << n) - 1))


def _size_stratified_mask(rng: np.random.Generator, n: int) -> int:
    size = int(rng.integers(1, n))
    members = rng.choice(n, size=size, replace=False)
    mask = 0
    for i in members:
        mask |= 1 << int(i)
    return mask


@dataclass
class SamplingSpec:
    """Sampler configuration: draw ``m`` i.i.d. coalitions per invocation.

    ``distribution`` is "uniform" (over nonempty proper subsets) or
    "size-stratified" (uniform size, then uniform subset of that size, which
    avoids concentrating on size n/2); a callable ``(rng, n) -> mask`` is
    also accepted. Fixed seeds make the draw sequence reproducible across
    runs; ``dedup_draws`` collapses duplicate draws within one invocation
    before evaluation.
    """

    distribution: str | Callable[[np.random.Generator, int], int] = "uniform"
    m: int = 64
    seed: int = 0
    dedup_draws: bool = False

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidParams(f"samples per invocation must be >= 1, got {self.m}")
        if isinstance(self.distribution, str) and self.distribution not in (
            "uniform",
            "size-stratified",
        ):
            raise InvalidParams(f"unknown distribution {self.distribution!r}")

    def sampler(self) -> Callable[[np.random.Generator, int], int]:
        if callable(self.distribution):
            return self.distribution
        if self.distribution == "uniform":
            return _uniform_proper_mask
        return _size_stratified_mask


class SamplingOracle(SeparationOracle):
    """Sampling-based oracle: draw m coalitions i.i.d., return the violated
    ones in draw order. The RNG stream persists across invocations, so a
    fixed seed reproduces the full sequence of returned coalitions."""

    def __init__(
        self, oracle: ValueOracle, spec: SamplingSpec, tols: Tolerances = DEFAULT_TOLS
    ):
        super().__init__(oracle, tols)
        self.spec = spec
        self._rng = rng_for(spec.seed, Stream.SAMPLING)
        self._draw = spec.sampler()

    def find_violated(self, u: np.ndarray, eps: float, k: int = 1) -> list[Coalition]:
        draws = [self._draw(self._rng, self.oracle.n) for _ in range(self.spec.m)]
        if self.spec.dedup_draws:
            draws = list(dict.fromkeys(draws))
        found: list[Coalition] = []
        seen: set[int] = set()
        for mask in draws:
            if mask in seen:
                continue
            seen.add(mask)
            payoff = float(mask_payoffs(np.asarray([mask], dtype=np.uint64), u)[0])
            if self._is_violated(mask, payoff, eps):
                found.append(Coalition(mask, self.oracle.n))
                if len(found) >= k:
                    break
        return found


class ExternalProposerOracle(SeparationOracle):
    """Oracle that asks an external proposer (plugin) for candidate
    coalitions and keeps only the ones whose violation verifies against the
    value oracle. Malformed or out-of-range proposals are dropped with a
    recorded warning, never a crash."""

    def __init__(
        self,
        oracle: ValueOracle,
        plugin,
        m: int = 16,
        tols: Tolerances = DEFAULT_TOLS,
    ):
        super().__init__(oracle, tols)
        self.plugin = plugin
        self.m = m
        self.warnings: list[str] = []

    def _parse_proposals(self, raw: Iterable) -> list[int]:
        masks: list[int] = []
        seen: set[int] = set()
        n = self.oracle.n
        for entry in raw:
            try:
                coalition = Coalition.from_indices([int(i) for i in entry], n)
            except Exception as exc:
                self.warnings.append(f"dropped malformed proposal {entry!r}: {exc}")
                continue
            if coalition.is_empty or coalition.is_full:
                self.warnings.append(f"dropped structural proposal {coalition}")
                continue
            if coalition.mask in seen:
                continue
            seen.add(coalition.mask)
            masks.append(coalition.mask)
        return masks

    def find_violated(self, u: np.ndarray, eps: float, k: int = 1) -> list[Coalition]:
        raw = self.plugin.propose_violated(list(map(float, u)), float(eps), self.m)
        found = []
        for mask in self._parse_proposals(raw):
            payoff = float(mask_payoffs(np.asarray([mask], dtype=np.uint64), u)[0])
            if self._is_violated(mask, payoff, eps):
                found.append(Coalition(mask, self.oracle.n))
                if len(found) >= k:
                    break
        return found


def exhaustive_oracle(
    oracle: ValueOracle, tols: Tolerances = DEFAULT_TOLS, cap: int = ENUMERATION_CAP
) -> ExhaustiveOracle:
    return ExhaustiveOracle(oracle, tols, cap)


def sampling_oracle(
    oracle: ValueOracle, spec: SamplingSpec, tols: Tolerances = DEFAULT_TOLS
) -> SamplingOracle:
    return SamplingOracle(oracle, spec, tols)


def external_oracle(
    oracle: ValueOracle, plugin, m: int = 16, tols: Tolerances = DEFAULT_TOLS
) -> ExternalProposerOracle:
    return ExternalProposerOracle(oracle, plugin, m, tols)


def required_samples(delta: float, gamma: float, rounds: int) -> int:
    """Samples per invocation so that, over ``rounds`` invocations, every
    call on a point with violated mass >= delta finds a violation except
    with probability gamma: ceil(log(rounds/gamma) / delta)."""
    if not 0 < delta < 1 or not 0 < gamma < 1:
        raise InvalidProbability(
            f"delta and gamma must lie strictly inside (0, 1), got {delta}, {gamma}"
        )
    if rounds < 1:
        raise InvalidProbability(f"rounds must be >= 1, got {rounds}")
    return math.ceil(math.log(rounds / gamma) / delta)


def required_samples_single_round(n: int, delta: float, gamma: float) -> int:
    """The per-round sample count stated for ellipsoid-style analyses,
    ceil(log(n/gamma) / delta). The bound carries an unspecified constant;
    this is its constant-one instantiation."""
    if not 0 < delta < 1 or not 0 < gamma < 1:
        raise InvalidProbability(
            f"delta and gamma must lie strictly inside (0, 1), got {delta}, {gamma}"
        )
    if n < 1:
        raise InvalidProbability(f"n must be >= 1, got {n}")
    return math.ceil(math.log(n / gamma) / delta)


# --------------------------------------------------------------------------
# Constraint seeding


@dataclass(frozen=True)
class RandomSeeds:
    """c distinct uniform nonempty proper coalitions, each evaluated."""

    count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 0:
            raise InvalidParams(f"seed count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class SingletonSeeds:
    """All n singletons, evaluated (each player's standalone value)."""


@dataclass(frozen=True)
class MwcSeeds:
    """Caller-supplied winning coalitions inserted with value 1. With
    ``verify`` each is evaluated and checked to actually win."""

    coalitions: tuple[Coalition, ...]
    verify: bool = False

    def __post_init__(self) -> None:
        for c in self.coalitions:
            if c.is_empty:
                raise InvalidParams("seeded winning coalitions must be nonempty")


@dataclass(frozen=True)
class ExternalSeeds:
    """Plugin-proposed coalitions, each evaluated."""

    k: int = 16


SeedStrategy = RandomSeeds | SingletonSeeds | MwcSeeds | ExternalSeeds


def seed_constraints(
    strategy: SeedStrategy,
    oracle: ValueOracle,
    *,
    plugin=None,
    warnings: list[str] | None = None,
) -> ConstraintSet:
    """Build the initial constraint set for a solver run."""
    n = oracle.n
    cs = ConstraintSet(n)
    if isinstance(strategy, RandomSeeds):
        if strategy.count > (1 << n) - 2:
            raise InvalidParams(
                f"cannot draw {strategy.count} distinct proper coalitions of {n} players"
            )
        rng = rng_for(strategy.seed, Stream.SEEDING)
        chosen: set[int] = set()
        while len(chosen) < strategy.count:
            mask = _uniform_proper_mask(rng, n)
            if mask not in chosen:
                chosen.add(mask)
                cs.add(Coalition(mask, n), oracle.query_mask(mask))
    elif isinstance(strategy, SingletonSeeds):
        for i in range(n):
            c = Coalition.singleton(i, n)
            cs.add(c, oracle.query(c))
    elif isinstance(strategy, MwcSeeds):
        for c in strategy.coalitions:
            if c.is_full:
                continue  # the grand coalition row is structural
            if strategy.verify:
                value = oracle.query(c)
                if value != 1.0:
                    raise InvalidParams(
                        f"seeded coalition {c} is not winning (value {value})"
                    )
            cs.add(c, 1.0)
    elif isinstance(strategy, ExternalSeeds):
        if plugin is None:
            raise InvalidParams("external seeding requires a plugin session")
        raw = plugin.propose_seeds(strategy.k)
        sink = warnings if warnings is not None else []
        for entry in raw:
            try:
                c = Coalition.from_indices([int(i) for i in entry], n)
            except Exception as exc:
                sink.append(f"dropped malformed seed {entry!r}: {exc}")
                continue
            if c.is_empty or c.is_full:
                continue
            cs.add(c, oracle.query(c))
    else:
        raise InvalidParams(f"unknown seeding strategy {strategy!r}")
    return cs
