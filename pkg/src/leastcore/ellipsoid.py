"""Central-cut ellipsoid method for the least-core LP and egalitarian QP.

The LP search runs in dimension d = n + 1 (allocation entries, then the
deficit) starting from the ball centered at (1/2, ..., 1/2) with radius
sqrt(d)/2. Each round checks, in order: the allocation-sum band, the box
constraints, then the separation oracle; the first failed check supplies
the cut normal. Fully feasible centers are recorded and a sliding objective
cut (deficit below the incumbent) keeps the search minimizing.

The QP variant optimizes min t over (u, t) in epigraph form: the objective
cut is on t, and whenever t at the center underestimates half the squared
norm, the first-order supporting hyperplane of the quadratic provides the
cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import DegenerateCut, FailureNoFeasible, InvalidParams, NumericalFailure
from .games import Allocation, ValueOracle
from .separation import SeparationOracle
from .trace import RoundRecord, SolveTrace

_RESYMMETRIZE_EVERY = 50


@dataclass
class Ellipsoid:
    """E = {x : (x - center)^T shape^{-1} (x - center) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    @classmethod
    def ball(cls, center: np.ndarray, radius: float) -> "Ellipsoid":
        d = len(center)
        return cls(np.asarray(center, dtype=np.float64), radius**2 * np.eye(d))

    @property
    def dim(self) -> int:
        return len(self.center)

    def check_positive_definite(self) -> None:
        try:
            np.linalg.cholesky((self.shape + self.shape.T) / 2.0)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("ellipsoid shape matrix lost positive definiteness") from exc


def ellipsoid_cut(e: Ellipsoid, a: np.ndarray, through_center: bool = True) -> Ellipsoid:
    """Minimum-volume ellipsoid containing {x in e : a^T x <= a^T center}.

    Only central cuts are supported. det(shape) shrinks by the factor
    (d^2/(d^2-1))^(d-1) * (d/(d+1))^2 per cut.
    """
    if not through_center:
        raise InvalidParams("only central cuts are supported")
    a = np.asarray(a, dtype=np.float64)
    d = e.dim
    pa = e.shape @ a
    denom = float(a @ pa)
    if not math.isfinite(denom) or denom <= 0.0:
        raise DegenerateCut(f"cut normal has nonpositive ellipsoid norm {denom!r}")
    g = pa / math.sqrt(denom)
    center = e.center - g / (d + 1)
    shape = (d * d / (d * d - 1.0)) * (e.shape - (2.0 / (d + 1)) * np.outer(g, g))
    return Ellipsoid(center, shape)


def predicted_det_factor(d: int) -> float:
    """Per-cut determinant contraction of the shape matrix."""
    return (d * d / (d * d - 1.0)) ** (d - 1) * (d / (d + 1.0)) ** 2


@dataclass
class EllipsoidConfig:
    """Ellipsoid run parameters.

    ``inner_radius`` is the geometric resolution r; the round count is
    T = ceil(2 (n+1) (n+2) ln(R/r)) with R = sqrt(n+1)/2 unless overridden.
    """

    inner_radius: float = 1e-6
    max_rounds: int | None = None
    batch_k: int = 1
    budget: int | None = None
    tolerances: Tolerances = DEFAULT_TOLS

    def rounds(self, n: int) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        radius = math.sqrt(n + 1) / 2.0
        if not 0 < self.inner_radius < radius:
            raise InvalidParams(
                f"inner radius must lie in (0, {radius}), got {self.inner_radius}"
            )
        return math.ceil(2 * (n + 1) * (n + 2) * math.log(radius / self.inner_radius))


def _box_cut(x: np.ndarray, lo: float, hi: float, dim: int, offset: int = 0):
    """First out-of-box coordinate yields a cut normal, else None."""
    for i, value in enumerate(x):
        if value < lo:
            a = np.zeros(dim)
            a[offset + i] = -1.0
            return a
        if value > hi:
            a = np.zeros(dim)
            a[offset + i] = 1.0
            return a
    return None


def _renormalized(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    total = float(u.sum())
    if total <= 0.0:
        raise NumericalFailure("feasible center collapsed to the zero allocation")
    return u / total


class _FactorState:
    """Search state in square-root form: shape = F F^T.

    The factor update halves the condition number of the shape matrix, so
    the thin feasible band around ``sum u = 1`` stays representable; the
    matrix cannot lose positive semi-definiteness structurally.
    """

    def __init__(self, center: np.ndarray, radius: float):
        self.center = np.asarray(center, dtype=np.float64)
        self.factor = radius * np.eye(len(self.center))

    def cut(self, a: np.ndarray) -> None:
        d = len(self.center)
        w = self.factor.T @ a
        s2 = float(w @ w)
        if not math.isfinite(s2) or s2 <= 0.0:
            raise DegenerateCut(f"cut normal has nonpositive ellipsoid norm {s2!r}")
        s = math.sqrt(s2)
        g = self.factor @ (w / s)
        self.center = self.center - g / (d + 1)
        beta = 2.0 / (d + 1)
        shrink = 1.0 - math.sqrt(1.0 - beta)
        kappa = math.sqrt(d * d / (d * d - 1.0))
        self.factor = kappa * (self.factor - shrink * np.outer(g, w / s))

    def below_resolution(self, r: float) -> bool:
        diag = (self.factor * self.factor).sum(axis=1)
        return float(diag.max(initial=0.0)) < (r / 4.0) ** 2

    def check_health(self) -> None:
        if not np.isfinite(self.factor).all():
            raise NumericalFailure("ellipsoid factor overflowed")


def _advance(
    state: _FactorState, cut: np.ndarray, round_index: int, inner_radius: float, have_incumbent: bool
) -> bool:
    """Apply one cut in place; True means the search is exhausted (the
    ellipsoid fell below the resolution or degenerated numerically, which is
    a hard failure only when no feasible incumbent exists yet)."""
    try:
        state.cut(cut)
    except DegenerateCut:
        if not have_incumbent:
            raise
        return True
    if state.below_resolution(inner_radius):
        return True  # thinner than the resolution in every direction
    if round_index % _RESYMMETRIZE_EVERY == 0:
        state.check_health()
    return False


def run_ellipsoid_lp(
    oracle: ValueOracle,
    sep: SeparationOracle,
    config: EllipsoidConfig | None = None,
) -> tuple[Allocation, SolveTrace]:
    """Minimize the deficit over the estimated core via central cuts.

    Returns the best fully feasible center seen (allocation re-projected
    onto the simplex slice exactly); raises :class:`FailureNoFeasible` if no
    center ever passed every check within the round budget.
    """
    config = config or EllipsoidConfig()
    n = oracle.n
    d = n + 1
    rounds = config.rounds(n)
    band = config.inner_radius / 2.0
    state = _FactorState(np.full(d, 0.5), math.sqrt(d) / 2.0)
    trace = SolveTrace(n=n, method="ellipsoid")

    best: tuple[float, np.ndarray] | None = None
    for t in range(1, rounds + 1):
        u = state.center[:n]
        eps = float(state.center[n])
        cut = None
        total = float(u.sum())
        if total > 1.0 + band:
            cut = np.concatenate([np.ones(n), [0.0]])
        elif total < 1.0 - band:
            cut = np.concatenate([-np.ones(n), [0.0]])
        if cut is None:
            cut = _box_cut(u, 0.0, 1.0, d)
        if cut is None and (eps < 0.0 or eps > 1.0):
            cut = np.zeros(d)
            cut[n] = -1.0 if eps < 0.0 else 1.0
        if cut is None:
            violated = sep.find_violated(u, eps, k=config.batch_k)
            trace.separation_calls += 1
            if violated:
                cut = np.zeros(d)
                for i in violated[0].indices():
                    cut[i] = -1.0
                cut[n] = -1.0
            else:
                if best is None or eps < best[0]:
                    best = (eps, u.copy())
                    trace.rounds.append(
                        RoundRecord(
                            round=t,
                            calls=oracle.calls,
                            eps=eps,
                            u=_renormalized(u),
                        )
                    )
                # sliding objective: demand a strictly better deficit
                cut = np.zeros(d)
                cut[n] = 1.0
        if _advance(state, cut, t, config.inner_radius, best is not None):
            break
    if best is None:
        raise FailureNoFeasible(
            f"no fully feasible center within {rounds} ellipsoid rounds"
        )
    eps, u = best
    trace.reason = "Converged"
    trace.total_calls = oracle.calls
    allocation = Allocation(_renormalized(u), max(eps, 0.0))
    allocation.validate()
    return allocation, trace


def run_ellipsoid_qp(
    oracle: ValueOracle,
    eps_fixed: float,
    sep: SeparationOracle,
    config: EllipsoidConfig | None = None,
) -> Allocation:
    """Minimize the squared norm over the fixed-deficit estimated core, in
    epigraph form min t subject to t >= ||u||^2 / 2."""
    config = config or EllipsoidConfig()
    n = oracle.n
    d = n + 1  # (u, t)
    rounds = config.rounds(n)
    band = config.inner_radius / 2.0
    state = _FactorState(np.full(d, 0.5), math.sqrt(d) / 2.0)

    best: tuple[float, np.ndarray] | None = None
    for t_round in range(1, rounds + 1):
        u = state.center[:n]
        t = float(state.center[n])
        cut = None
        total = float(u.sum())
        if total > 1.0 + band:
            cut = np.concatenate([np.ones(n), [0.0]])
        elif total < 1.0 - band:
            cut = np.concatenate([-np.ones(n), [0.0]])
        if cut is None:
            cut = _box_cut(u, 0.0, 1.0, d)
        if cut is None and (t < 0.0 or t > 1.0):
            cut = np.zeros(d)
            cut[n] = -1.0 if t < 0.0 else 1.0
        if cut is None and t < 0.5 * float(u @ u):
            # epigraph violated: supporting hyperplane t >= u0.u - ||u0||^2/2
            cut = np.concatenate([u, [-1.0]])
        if cut is None:
            violated = sep.find_violated(u, eps_fixed, k=config.batch_k)
            if violated:
                cut = np.zeros(d)
                for i in violated[0].indices():
                    cut[i] = -1.0
            else:
                if best is None or t < best[0]:
                    best = (t, u.copy())
                cut = np.zeros(d)
                cut[n] = 1.0
        if _advance(state, cut, t_round, config.inner_radius, best is not None):
            break
    if best is None:
        raise FailureNoFeasible(
            f"no fully feasible center within {rounds} ellipsoid rounds"
        )
    return Allocation(_renormalized(best[1]), max(float(eps_fixed), 0.0))
