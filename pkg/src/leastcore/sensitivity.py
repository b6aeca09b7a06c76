"""Sensitivity of the least-core deficit to value-estimation error.

The central quantity is the balanced-distribution bound: the gap between
the true and estimated deficits is at most the largest error mass any
balanced distribution over coalitions (equal per-player inclusion
marginals) can place on the disagreements. This refines the trivial bound
by the single worst-case error, and specializes in the binary case to a
worst-case disagreement probability. Supermodular estimated games admit a
closed-form chain allocation whose stability degrades only with the total
variation of the estimation error along the chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, ENUMERATION_CAP, PAIRWISE_CAP, Stream, Tolerances, rng_for
from .errors import MismatchedN, NotBinary, NumericalFailure, TooLarge
from .games import Allocation, Coalition, ValueOracle, mask_payoffs, proper_masks
from .lp import (
    SolveStatus,
    _solve_standard_form,
    enumerate_constraints,
    solve_polytope_lp,
    solve_restricted_lp,
)


@dataclass
class BalancedDistribution:
    """Weights over nonempty coalitions (including the grand coalition) with
    equal per-player inclusion mass."""

    n: int
    weights: dict[Coalition, float]

    @property
    def marginal(self) -> float:
        return sum(w for c, w in self.weights.items() if c.contains(0))

    def validate(self, tol: float = 1e-7) -> None:
        total = sum(self.weights.values())
        if abs(total - 1.0) > tol:
            raise NumericalFailure(f"balanced weights sum to {total!r}")
        marginals = np.zeros(self.n)
        for c, w in self.weights.items():
            for i in c.indices():
                marginals[i] += w
        if float(marginals.max() - marginals.min()) > tol:
            raise NumericalFailure(f"unequal marginals {marginals!r}")


@dataclass
class SensitivityReport:
    eps_true: float
    eps_hat: float
    gap: float
    dual_bound: float
    worst_delta: float
    witness: BalancedDistribution


def _require_same_small_n(v: ValueOracle, vhat: ValueOracle, cap: int) -> int:
    if v.n != vhat.n:
        raise MismatchedN(f"oracles have n={v.n} and n={vhat.n}")
    if v.n > cap:
        raise TooLarge(f"enumeration over 2^{v.n} coalitions exceeds the cap ({cap})")
    return v.n


def _nonempty_masks(n: int) -> np.ndarray:
    masks = sorted(range(1, 1 << n), key=lambda m: (m.bit_count(), m))
    return np.asarray(masks, dtype=np.uint64)


def _max_balanced_mass(costs: np.ndarray, masks: np.ndarray, n: int, tols: Tolerances):
    """Maximize sum lambda_S * costs_S over balanced distributions lambda.

    Variables are one weight per nonempty coalition; constraints fix the
    total mass to one and equalize every player's inclusion marginal with
    player 0's.
    """
    k = len(masks)
    bits = (masks[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & np.uint64(1)
    bits = bits.astype(np.float64)
    A = np.zeros((n, k))
    A[0, :] = 1.0
    b = np.zeros(n)
    b[0] = 1.0
    for i in range(1, n):
        A[i, :] = bits[:, i] - bits[:, 0]
    status, x, _, _ = _solve_standard_form(
        A, b, -np.asarray(costs, dtype=np.float64), tols, cap=10 * (n + k) ** 2
    )
    if status != SolveStatus.OPTIMAL:
        raise NumericalFailure("balanced-distribution LP did not converge")
    bound = float(costs @ x)
    weights = {
        Coalition(int(m), n): float(w) for m, w in zip(masks, x) if w > 1e-12
    }
    return bound, BalancedDistribution(n, weights)


def dual_bound(
    v: ValueOracle,
    vhat: ValueOracle,
    cap: int = ENUMERATION_CAP,
    tols: Tolerances = DEFAULT_TOLS,
) -> tuple[float, BalancedDistribution]:
    """Largest |v - vhat| mass any balanced distribution can collect, with a
    witness distribution attaining it. Upper-bounds |eps_true - eps_hat| and
    is itself at most the worst single-coalition error."""
    n = _require_same_small_n(v, vhat, cap)
    masks = _nonempty_masks(n)
    errors = np.abs(v.query_masks(masks) - vhat.query_masks(masks))
    return _max_balanced_mass(errors, masks, n, tols)


def binary_disagreement_bound(
    v: ValueOracle,
    vhat: ValueOracle,
    cap: int = ENUMERATION_CAP,
    tols: Tolerances = DEFAULT_TOLS,
) -> tuple[float, float, BalancedDistribution]:
    """Binary specialization: the bound is the worst balanced probability of
    disagreement. Also returns the raw disagreement fraction over nonempty
    proper coalitions, which can be exponentially smaller than the bound."""
    if not (v.binary and vhat.binary):
        raise NotBinary("both oracles must be binary")
    n = _require_same_small_n(v, vhat, cap)
    masks = _nonempty_masks(n)
    disagree = (v.query_masks(masks) != vhat.query_masks(masks)).astype(np.float64)
    bound, witness = _max_balanced_mass(disagree, masks, n, tols)
    proper = masks != np.uint64((1 << n) - 1)
    fraction = float(disagree[proper].sum() / ((1 << n) - 2))
    return bound, fraction, witness


@dataclass
class ContainmentReport:
    delta: float
    eps_hat: float
    eps_true: float
    max_true_deficit: float
    within_expanded_core: bool
    within_double_expanded_core: bool


def check_containment(
    u_hat: Allocation,
    v: ValueOracle,
    vhat: ValueOracle,
    cap: int = ENUMERATION_CAP,
    slack: float = 1e-7,
) -> ContainmentReport:
    """Verify that an estimated-core allocation sits in the expanded true
    cores: with delta the worst coalition error, a point of the estimated
    eps_hat-core must lie in the true (eps_hat + delta)-core and in the true
    (eps_true + 2 delta)-core."""
    n = _require_same_small_n(v, vhat, cap)
    masks = proper_masks(n)
    true_vals = v.query_masks(masks)
    est_vals = vhat.query_masks(masks)
    delta = float(np.abs(true_vals - est_vals).max(initial=0.0))
    payoffs = mask_payoffs(masks, u_hat.u)
    max_true_deficit = float((true_vals - payoffs).max(initial=0.0))
    eps_true = solve_restricted_lp(enumerate_constraints(v, cap)).eps
    eps_hat = u_hat.eps
    return ContainmentReport(
        delta=delta,
        eps_hat=eps_hat,
        eps_true=eps_true,
        max_true_deficit=max_true_deficit,
        within_expanded_core=max_true_deficit <= eps_hat + delta + slack,
        within_double_expanded_core=max_true_deficit <= eps_true + 2 * delta + slack,
    )


def sample_core_vertices(
    oracle: ValueOracle,
    eps: float,
    count: int,
    seed: int = 0,
    cap: int = ENUMERATION_CAP,
) -> list[np.ndarray]:
    """Vertices of the eps-core polytope under random linear objectives."""
    cs = enumerate_constraints(oracle, cap)
    rng = rng_for(seed, Stream.VERTICES)
    vertices = []
    for _ in range(count):
        x, _ = solve_polytope_lp(cs, eps, rng.standard_normal(oracle.n))
        vertices.append(x)
    return vertices


@dataclass
class ChainAllocation:
    """Marginal increments of the estimated value along a player chain.

    The increments always sum to one (telescoping) but can leave [0, 1] for
    non-supermodular games; ``within_box`` reports that instead of clamping,
    since the stability guarantee concerns the raw increments.
    """

    u: np.ndarray
    order: tuple[int, ...]
    within_box: bool

    def as_allocation(self, eps: float = 0.0) -> Allocation:
        return Allocation(self.u, eps)


def chain_allocation(vhat: ValueOracle, order: list[int] | None = None) -> ChainAllocation:
    """u_i = vhat(first k players) - vhat(first k-1 players) along ``order``
    (defaults to the identity)."""
    n = vhat.n
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise MismatchedN(f"order must be a permutation of 0..{n - 1}")
    u = np.zeros(n)
    mask = 0
    previous = 0.0
    for player in order:
        mask |= 1 << player
        current = vhat.query_mask(mask)
        u[player] = current - previous
        previous = current
    within = bool((u >= -1e-12).all() and (u <= 1.0 + 1e-12).all())
    return ChainAllocation(u, tuple(order), within)


def tv_along_chain(
    v: ValueOracle, vhat: ValueOracle, order: list[int] | None = None
) -> float:
    """Half the summed prefix-coalition error along the chain; n evaluations
    of each oracle."""
    if v.n != vhat.n:
        raise MismatchedN(f"oracles have n={v.n} and n={vhat.n}")
    n = v.n
    order = list(range(n)) if order is None else list(order)
    total = 0.0
    mask = 0
    for player in order:
        mask |= 1 << player
        total += abs(v.query_mask(mask) - vhat.query_mask(mask))
    return 0.5 * total


def is_supermodular(
    oracle: ValueOracle, cap: int = PAIRWISE_CAP, tol: float = 1e-9
) -> tuple[bool, tuple[Coalition, Coalition] | None]:
    """Exhaustive pairwise check of v(S) + v(T) <= v(S | T) + v(S & T);
    returns a violating pair as the counterexample when it fails."""
    n = oracle.n
    if n > cap:
        raise TooLarge(f"pairwise enumeration over 4^{n} pairs exceeds the cap ({cap})")
    full = 1 << n
    values = np.empty(full)
    values[0] = 0.0
    values[full - 1] = 1.0
    for mask in range(1, full - 1):
        values[mask] = oracle.query_mask(mask)
    for s in range(full):
        for t in range(s, full):
            if values[s] + values[t] > values[s | t] + values[s & t] + tol:
                return False, (Coalition(s, n), Coalition(t, n))
    return True, None


def sensitivity_report(
    v: ValueOracle,
    vhat: ValueOracle,
    cap: int = ENUMERATION_CAP,
    tols: Tolerances = DEFAULT_TOLS,
) -> SensitivityReport:
    """Full sensitivity summary: exact deficits by enumeration, their gap,
    the balanced-distribution bound with witness, and the worst error."""
    n = _require_same_small_n(v, vhat, cap)
    eps_true = solve_restricted_lp(enumerate_constraints(v, cap), tols).eps
    eps_hat = solve_restricted_lp(enumerate_constraints(vhat, cap), tols).eps
    bound, witness = dual_bound(v, vhat, cap, tols)
    masks = proper_masks(n)
    delta = float(np.abs(v.query_masks(masks) - vhat.query_masks(masks)).max(initial=0.0))
    return SensitivityReport(
        eps_true=eps_true,
        eps_hat=eps_hat,
        gap=abs(eps_true - eps_hat),
        dual_bound=bound,
        worst_delta=delta,
        witness=witness,
    )
