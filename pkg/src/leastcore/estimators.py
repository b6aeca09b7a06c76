"""Estimator-style solver wrappers.

Each solver is exposed as a scikit-learn compatible estimator: construct
with plain keyword parameters, call ``fit`` on a value oracle (or a game
instance), then read the fitted attributes ``u_``, ``eps_``, ``trace_`` and
``n_calls_``. ``get_params``/``set_params``/``clone`` work as usual, so the
solvers drop into parameter sweeps and model-selection tooling unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .bench import run_yp
from .cg import CgConfig, run_cg
from .ellipsoid import EllipsoidConfig, run_ellipsoid_lp, run_ellipsoid_qp
from .errors import InvalidParams
from .games import CachedOracle, GameInstance, ValueOracle, build_oracle
from .lp import solve_full_lp, solve_full_qp
from .separation import (
    RandomSeeds,
    SamplingSpec,
    SingletonSeeds,
    exhaustive_oracle,
    sampling_oracle,
)
from .trace import RoundRecord, SolveTrace


def validate_game(game) -> CachedOracle:
    """Accept a value oracle or a game instance; return a cached oracle."""
    if isinstance(game, GameInstance):
        return build_oracle(game)
    if isinstance(game, CachedOracle):
        return game
    if isinstance(game, ValueOracle):
        return CachedOracle(game)
    raise InvalidParams(
        f"expected a ValueOracle or GameInstance, got {type(game).__name__}"
    )


def validate_allocation(u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (n,):
        raise InvalidParams(f"allocation must have shape ({n},), got {u.shape}")
    if abs(float(u.sum()) - 1.0) > 1e-6 or (u < -1e-9).any():
        raise InvalidParams("allocation must be nonnegative and sum to 1")
    return u


class _FittedMixin:
    def _finish(self, allocation, trace: SolveTrace):
        self.u_ = allocation.u
        self.eps_ = allocation.eps
        self.trace_ = trace
        self.n_calls_ = trace.total_calls
        return self


class ConstraintGenerationAllocator(BaseEstimator, _FittedMixin):
    """Least-core allocation by constraint generation.

    Parameters mirror the solver configuration: ``seeding`` in
    {"singletons", "random"}, ``oracle`` in {"exhaustive", "sampling"},
    ``m`` samples per separation call, ``batch_k`` coalitions per round.
    """

    def __init__(
        self,
        seeding: str = "singletons",
        seed_count: int = 64,
        oracle: str = "exhaustive",
        m: int = 64,
        batch_k: int = 64,
        max_rounds: int = 64,
        budget: int | None = 4096,
        egalitarian: bool = True,
        seed: int = 0,
    ):
        self.seeding = seeding
        self.seed_count = seed_count
        self.oracle = oracle
        self.m = m
        self.batch_k = batch_k
        self.max_rounds = max_rounds
        self.budget = budget
        self.egalitarian = egalitarian
        self.seed = seed

    def fit(self, game, y=None):
        oracle = validate_game(game)
        if self.seeding == "singletons":
            strategy = SingletonSeeds()
        elif self.seeding == "random":
            strategy = RandomSeeds(self.seed_count, seed=self.seed)
        else:
            raise InvalidParams(f"unknown seeding {self.seeding!r}")
        config = CgConfig(
            seeding=strategy,
            oracle=self.oracle,
            batch_k=self.batch_k,
            max_rounds=self.max_rounds,
            budget=self.budget,
            egalitarian=self.egalitarian,
            sampling=SamplingSpec(m=self.m, seed=self.seed),
        )
        allocation, trace = run_cg(oracle, config)
        return self._finish(allocation, trace)


class EllipsoidAllocator(BaseEstimator, _FittedMixin):
    """Least-core allocation by the central-cut ellipsoid method."""

    def __init__(
        self,
        oracle: str = "exhaustive",
        m: int = 64,
        inner_radius: float = 1e-6,
        egalitarian: bool = False,
        seed: int = 0,
    ):
        self.oracle = oracle
        self.m = m
        self.inner_radius = inner_radius
        self.egalitarian = egalitarian
        self.seed = seed

    def fit(self, game, y=None):
        oracle = validate_game(game)
        if self.oracle == "exhaustive":
            sep = exhaustive_oracle(oracle)
        elif self.oracle == "sampling":
            sep = sampling_oracle(oracle, SamplingSpec(m=self.m, seed=self.seed))
        else:
            raise InvalidParams(f"unknown separation oracle {self.oracle!r}")
        config = EllipsoidConfig(inner_radius=self.inner_radius)
        allocation, trace = run_ellipsoid_lp(oracle, sep, config)
        if self.egalitarian:
            allocation = run_ellipsoid_qp(oracle, allocation.eps, sep, config)
        return self._finish(allocation, trace)


class SampleThenSolveAllocator(BaseEstimator, _FittedMixin):
    """Baseline: evaluate a fixed sample of coalitions, then solve once."""

    def __init__(
        self,
        budget: int = 4096,
        singleton_seed: bool = False,
        egalitarian: bool = True,
        seed: int = 0,
    ):
        self.budget = budget
        self.singleton_seed = singleton_seed
        self.egalitarian = egalitarian
        self.seed = seed

    def fit(self, game, y=None):
        oracle = validate_game(game)
        allocation, trace = run_yp(
            oracle,
            budget=self.budget,
            seed=self.seed,
            singleton_seed=self.singleton_seed,
            egalitarian=self.egalitarian,
        )
        return self._finish(allocation, trace)


class ExactAllocator(BaseEstimator, _FittedMixin):
    """Ground truth by full enumeration (small player counts only)."""

    def __init__(self, egalitarian: bool = True, enum_cap: int = 16):
        self.egalitarian = egalitarian
        self.enum_cap = enum_cap

    def fit(self, game, y=None):
        oracle = validate_game(game)
        if self.egalitarian:
            allocation = solve_full_qp(oracle, cap=self.enum_cap)
            eps = allocation.eps
            u = allocation.u
        else:
            lp = solve_full_lp(oracle, cap=self.enum_cap)
            u = np.maximum(lp.u, 0.0)
            u = u / u.sum()
            from .games import Allocation

            allocation = Allocation(u, max(lp.eps, 0.0))
            eps = allocation.eps
        trace = SolveTrace(
            n=oracle.n,
            rounds=[RoundRecord(round=1, calls=oracle.calls, eps=eps, u=u)],
            reason="Converged",
            total_calls=oracle.calls,
            method="full",
        )
        return self._finish(allocation, trace)
