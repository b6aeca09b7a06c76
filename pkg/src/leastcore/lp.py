"""Restricted least-core LP and egalitarian QP solvers.

The LP path is a dense two-phase simplex with Bland's anti-cycling pivot
rule; determinism matters more than asymptotics at the row counts seen here,
so no sparsity or revised-simplex machinery is used. For the least-core LP
specifically, a structure-aware crash basis (the deficit variable priced
against the largest coalition value) makes phase one near-trivial.

The QP path is a primal active-set method on the strictly convex objective
``sum u_i^2``, warm-started from the rows the LP vertex sits on exactly.
Optimality is certified by the existence of nonnegative multipliers; if the
iteration stalls on degenerate rows, the solve is retried under a
deterministic lexicographic relaxation, with projected gradient as the last
resort before reporting a numerical failure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, ENUMERATION_CAP, Tolerances
from .errors import Infeasible, InvariantViolation, NumericalFailure, TooLarge
from .games import Allocation, Coalition, ValueOracle

_ENTER_TOL = 1e-9


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


class ConstraintSet:
    """Ordered, deduplicated coalition/value rows of a restricted LP.

    The structural rows (empty set, grand coalition) are excluded: the
    equality ``sum u = 1`` is built into the solvers, not stored here.
    """

    def __init__(self, n: int):
        self.n = n
        self._masks: list[int] = []
        self._values: list[float] = []
        self._index: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._masks)

    def __iter__(self):
        return (
            (Coalition(m, self.n), v) for m, v in zip(self._masks, self._values)
        )

    def add(self, coalition: Coalition, value: float) -> bool:
        """Insert a row; returns False (a no-op) if the coalition is present."""
        if coalition.n != self.n:
            raise InvariantViolation(
                f"coalition has n={coalition.n}, constraint set has n={self.n}"
            )
        if coalition.is_empty or coalition.is_full:
            raise InvariantViolation(
                "the empty and grand coalitions are structural, not rows"
            )
        if coalition.mask in self._index:
            return False
        self._index[coalition.mask] = len(self._masks)
        self._masks.append(coalition.mask)
        self._values.append(float(value))
        return True

    def __contains__(self, coalition: Coalition) -> bool:
        return coalition.mask in self._index

    def coalitions(self) -> list[Coalition]:
        return [Coalition(m, self.n) for m in self._masks]

    def masks(self) -> np.ndarray:
        return np.asarray(self._masks, dtype=np.uint64)

    def values(self) -> np.ndarray:
        return np.asarray(self._values, dtype=np.float64)

    def incidence(self) -> np.ndarray:
        """m x n 0/1 membership matrix in row order."""
        if not self._masks:
            return np.zeros((0, self.n))
        masks = self.masks()
        bits = (masks[:, None] >> np.arange(self.n, dtype=np.uint64)[None, :]) & np.uint64(1)
        return bits.astype(np.float64)

    def copy(self) -> "ConstraintSet":
        cs = ConstraintSet(self.n)
        cs._masks = list(self._masks)
        cs._values = list(self._values)
        cs._index = dict(self._index)
        return cs


@dataclass
class LpSolution:
    u: np.ndarray
    eps: float
    tight_rows: tuple[int, ...]
    status: SolveStatus
    iterations: int = 0


# --------------------------------------------------------------------------
# Dense two-phase simplex


def _pivot(T: np.ndarray, col: int, row: int) -> None:
    T[row] = T[row] / T[row, col]
    column = T[:, col].copy()
    column[row] = 0.0
    T -= np.outer(column, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _bland_loop(
    T: np.ndarray, basis: np.ndarray, banned: np.ndarray, cap: int, tols: Tolerances
) -> tuple[str, int]:
    """Iterate to optimality of the current cost row. Returns (status, pivots)
    with status in {"optimal", "unbounded", "capped"}."""
    m = T.shape[0] - 1
    rhs_col = T.shape[1] - 1
    iterations = 0
    while iterations < cap:
        z = T[m, :rhs_col]
        improving = np.where(z < -_ENTER_TOL)[0]
        enter = -1
        for j in improving:  # Bland: lowest eligible index enters
            if not banned[j]:
                enter = int(j)
                break
        if enter < 0:
            return "optimal", iterations
        col = T[:m, enter]
        positive = col > tols.pivot
        if not positive.any():
            return "unbounded", iterations
        rows = np.where(positive)[0]
        ratios = T[rows, rhs_col] / col[rows]
        rmin = ratios.min()
        tied = rows[ratios <= rmin + 1e-12 * (1.0 + abs(rmin))]
        leave = int(tied[np.argmin(basis[tied])])  # Bland: lowest basis index leaves
        _pivot(T, enter, leave)
        basis[leave] = enter
        iterations += 1
    return "capped", iterations


def _set_cost_row(T: np.ndarray, basis: np.ndarray, c_ext: np.ndarray) -> None:
    m = T.shape[0] - 1
    cb = c_ext[basis]
    T[m, :-1] = c_ext - cb @ T[:m, :-1]
    T[m, -1] = -(cb @ T[:m, -1])


def _iteration_cap(rows: int, n: int) -> int:
    return 10 * (rows + n) ** 2 + 64


def _solve_standard_form(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    tols: Tolerances,
    cap: int,
) -> tuple[SolveStatus, np.ndarray, np.ndarray, int]:
    """min c@x s.t. Ax = b, x >= 0, via generic phase-1 artificials.

    Returns (status, x, basis, iterations); x has the structural length.
    """
    m, nc = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    T = np.zeros((m + 1, nc + m + 1))
    T[:m, :nc] = A
    T[:m, nc : nc + m] = np.eye(m)
    T[:m, -1] = b
    basis = np.arange(nc, nc + m)
    T[m, :nc] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    banned = np.zeros(nc + m, dtype=bool)
    status, it1 = _bland_loop(T, basis, banned, cap, tols)
    if status == "capped":
        return SolveStatus.NUMERICAL_FAILURE, np.zeros(nc), basis, it1
    infeasibility = -T[m, -1]
    if infeasibility > tols.feasibility * max(1.0, float(np.abs(b).max(initial=0.0))):
        return SolveStatus.INFEASIBLE, np.zeros(nc), basis, it1
    for i in range(m):  # drive leftover artificials out of the basis
        if basis[i] >= nc:
            row = T[i, :nc]
            usable = np.where(np.abs(row) > tols.pivot)[0]
            if len(usable) == 0:
                continue  # redundant row; artificial stays basic at zero
            _pivot(T, int(usable[0]), i)
            basis[i] = int(usable[0])
    banned[nc:] = True
    c_ext = np.concatenate([c, np.zeros(m)])
    _set_cost_row(T, basis, c_ext)
    status, it2 = _bland_loop(T, basis, banned, cap, tols)
    if status != "optimal":
        return SolveStatus.NUMERICAL_FAILURE, np.zeros(nc), basis, it1 + it2
    x = np.zeros(nc + m)
    x[basis] = T[:m, -1]
    return SolveStatus.OPTIMAL, x[:nc], basis, it1 + it2


def solve_restricted_lp(cs: ConstraintSet, tols: Tolerances = DEFAULT_TOLS) -> LpSolution:
    """Minimize the deficit eps over {u in [0,1]^n, sum u = 1,
    sum_{i in S} u_i >= value(S) - eps for every row}.

    ``u <= 1`` is implied by the simplex constraint and is not materialized.
    Deterministic for a fixed row order.
    """
    n, m = cs.n, len(cs)
    cap = _iteration_cap(m, n)
    if m == 0:
        A = np.zeros((1, n + 1))
        A[0, :n] = 1.0
        c = np.zeros(n + 1)
        c[n] = 1.0
        status, x, _, iterations = _solve_standard_form(A, np.array([1.0]), c, tols, cap)
        if status != SolveStatus.OPTIMAL:
            return LpSolution(np.zeros(n), 0.0, (), status, iterations)
        solution = LpSolution(x[:n], float(x[n]), (), status, iterations)
        _check_lp_solution(cs, solution, tols)
        return solution

    inc = cs.incidence()
    vals = cs.values()
    # Columns: u (n), eps, surplus s (m), one artificial for the simplex row.
    nc = n + 1 + m + 1
    T = np.zeros((m + 2, nc + 1))
    T[0, :n] = 1.0
    T[0, nc - 1] = 1.0
    T[0, -1] = 1.0
    T[1:-1, :n] = inc
    T[1:-1, n] = 1.0
    T[1:-1, n + 1 : n + 1 + m] = -np.eye(m)
    T[1:-1, -1] = vals
    jstar = int(np.argmax(vals))
    # Crash basis: eps basic on the max-value row, surpluses elsewhere. The
    # reduction row_j <- row_{j*} - row_j leaves a feasible identity basis.
    star = T[1 + jstar].copy()
    for j in range(m):
        if j != jstar:
            T[1 + j] = star - T[1 + j]
    basis = np.empty(m + 1, dtype=np.int64)
    basis[0] = nc - 1  # artificial on the simplex row
    basis[1 + jstar] = n
    for j in range(m):
        if j != jstar:
            basis[1 + j] = n + 1 + j
    banned = np.zeros(nc, dtype=bool)
    # Phase 1: price out the single artificial.
    T[-1, :] = -T[0, :]
    T[-1, nc - 1] = 0.0
    status, it1 = _bland_loop(T, basis, banned, cap, tols)
    if status == "capped":
        return LpSolution(np.zeros(n), 0.0, (), SolveStatus.NUMERICAL_FAILURE, it1)
    if -T[-1, -1] > tols.feasibility:
        # Cannot happen: eps is free upward. Treat as a numerical failure.
        return LpSolution(np.zeros(n), 0.0, (), SolveStatus.NUMERICAL_FAILURE, it1)
    for i in range(m + 1):
        if basis[i] == nc - 1:
            usable = np.where(np.abs(T[i, : nc - 1]) > tols.pivot)[0]
            if len(usable):
                _pivot(T, int(usable[0]), i)
                basis[i] = int(usable[0])
    banned[nc - 1] = True
    c_ext = np.zeros(nc)
    c_ext[n] = 1.0
    _set_cost_row(T, basis, c_ext)
    status, it2 = _bland_loop(T, basis, banned, cap, tols)
    if status != "optimal":
        return LpSolution(np.zeros(n), 0.0, (), SolveStatus.NUMERICAL_FAILURE, it1 + it2)
    x = np.zeros(nc)
    x[basis] = T[:-1, -1]
    u = x[:n].copy()
    eps = float(x[n])
    surplus = x[n + 1 : n + 1 + m]
    tight = tuple(int(j) for j in range(m) if surplus[j] <= tols.feasibility)
    solution = LpSolution(u, eps, tight, SolveStatus.OPTIMAL, it1 + it2)
    _check_lp_solution(cs, solution, tols)
    return solution


def _check_lp_solution(cs: ConstraintSet, sol: LpSolution, tols: Tolerances) -> None:
    if sol.status != SolveStatus.OPTIMAL:
        return
    u, eps = sol.u, sol.eps
    if abs(float(u.sum()) - 1.0) > 1e-9:
        raise NumericalFailure(f"simplex returned sum(u) = {u.sum()!r}")
    if (u < -tols.feasibility).any() or eps < -tols.feasibility:
        raise NumericalFailure("simplex returned out-of-box variables")
    if len(cs):
        slack = cs.incidence() @ u + eps - cs.values()
        if slack.min() < -tols.feasibility:
            raise NumericalFailure(
                f"constraint violated by {-slack.min():.3e} at the LP optimum"
            )


def solve_polytope_lp(
    cs: ConstraintSet,
    eps: float,
    objective: np.ndarray,
    tols: Tolerances = DEFAULT_TOLS,
) -> tuple[np.ndarray, SolveStatus]:
    """min objective@u over the fixed-deficit polytope
    {u >= 0, sum u = 1, sum_{i in S} u_i >= value(S) - eps}.

    Used to pick vertices of a core polytope under arbitrary linear
    objectives; raises :class:`Infeasible` if eps is below the restricted
    least-core deficit.
    """
    n, m = cs.n, len(cs)
    A = np.zeros((1 + m, n + m))
    b = np.empty(1 + m)
    A[0, :n] = 1.0
    b[0] = 1.0
    if m:
        A[1:, :n] = cs.incidence()
        A[1:, n:] = -np.eye(m)
        b[1:] = cs.values() - eps
    c = np.concatenate([np.asarray(objective, dtype=np.float64), np.zeros(m)])
    status, x, _, _ = _solve_standard_form(A, b, c, tols, _iteration_cap(m, n))
    if status == SolveStatus.INFEASIBLE:
        raise Infeasible(f"the restricted polytope is empty at eps={eps}")
    if status != SolveStatus.OPTIMAL:
        raise NumericalFailure("fixed-deficit LP did not converge")
    return x[:n].copy(), status


# --------------------------------------------------------------------------
# Egalitarian QP (min sum u_i^2) via a primal active-set method


def _feasible_vertex(
    cs: ConstraintSet, eps: float, tols: Tolerances
) -> tuple[np.ndarray, tuple[int, ...]]:
    if len(cs) == 0 or float((cs.values() - eps).max(initial=0.0)) <= 0.0:
        u = np.zeros(cs.n)
        u[0] = 1.0
        if len(cs):
            slack = cs.incidence() @ u + 0.0 - (cs.values() - eps)
            tight = tuple(int(j) for j in np.where(slack <= tols.feasibility)[0])
        else:
            tight = ()
        return u, tight
    shifted = ConstraintSet(cs.n)
    vals = cs.values() - eps
    for (coalition, _), v in zip(cs, vals):
        shifted.add(coalition, float(v))
    probe = solve_restricted_lp(shifted, tols)
    if probe.status != SolveStatus.OPTIMAL:
        raise NumericalFailure("feasibility probe LP failed")
    if probe.eps > 10 * tols.feasibility:
        raise Infeasible(
            f"no allocation satisfies the rows at eps={eps} (missing {probe.eps:.3e})"
        )
    return probe.u, probe.tight_rows


def _qp_constraint_system(
    cs: ConstraintSet, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    n, m = cs.n, len(cs)
    rows = np.vstack([np.ones((1, n)), cs.incidence(), np.eye(n)])
    rhs = np.concatenate([[1.0], cs.values() - eps, np.zeros(n)])
    return rows, rhs


def solve_restricted_qp(
    cs: ConstraintSet,
    eps: float,
    tols: Tolerances = DEFAULT_TOLS,
    warm: LpSolution | None = None,
) -> Allocation:
    """The unique minimizer of ``sum u_i^2`` over the fixed-deficit polytope.

    ``eps`` normally comes from :func:`solve_restricted_lp` on the same rows;
    :class:`Infeasible` is raised when the polytope at ``eps`` is empty.
    """
    n, m = cs.n, len(cs)
    rows, rhs = _qp_constraint_system(cs, eps)
    if warm is not None and warm.status == SolveStatus.OPTIMAL:
        slack = rows[1:] @ warm.u - rhs[1:]
        if abs(warm.u.sum() - 1.0) <= 1e-9 and slack.min(initial=0.0) >= -tols.feasibility:
            u0 = warm.u.copy()
            start_tight = tuple(int(j) for j in warm.tight_rows)
        else:
            u0, start_tight = _feasible_vertex(cs, eps, tols)
    else:
        u0, start_tight = _feasible_vertex(cs, eps, tols)

    # Warm-start only from rows the start point sits on exactly; rows tight
    # merely to LP tolerance would make the first working system
    # inconsistent at round-off scale.
    slack0 = rows @ u0 - rhs
    working = [0] + [
        1 + j for j in start_tight if abs(slack0[1 + j]) <= 1e-11
    ]
    working += [1 + m + i for i in range(n) if abs(u0[i]) <= 1e-11]
    working = _independent_subset(rows, working)

    cap = 50 * (m + n + 8)
    u, _, _ = _active_set_loop(rows, rhs, u0, list(working), tols, cap)
    if not _optimality_certificate(rows, rhs, u, tols):
        # Degenerate inputs (duplicated or knife-edge row values) can make
        # the working systems inconsistent at round-off scale and stall the
        # iteration. A deterministic lexicographic relaxation of the
        # coalition rows breaks the ties; the perturbed optimum stays within
        # certificate tolerance of the true one.
        jitter = rhs.copy()
        if m:
            jitter[1 : 1 + m] -= 1e-9 * (1.0 + np.arange(m)) / m
        u2, _, _ = _active_set_loop(rows, jitter, u0, list(working), tols, cap)
        if _optimality_certificate(rows, rhs, u2, tols):
            u = u2
        else:
            u = _projected_gradient(cs, eps, u, tols)
            if not _optimality_certificate(rows, rhs, u, tols):
                raise NumericalFailure("QP failed the KKT residual check")
    u = np.maximum(u, 0.0)
    u = u / u.sum()
    return Allocation(u, max(float(eps), 0.0))


def _independent_subset(rows: np.ndarray, candidate: list[int]) -> list[int]:
    kept: list[int] = []
    for k in sorted(set(candidate)):
        trial = rows[kept + [k]]
        if np.linalg.matrix_rank(trial) == len(kept) + 1:
            kept.append(k)
        if len(kept) == rows.shape[1]:
            break
    return kept


def _active_set_loop(
    rows: np.ndarray,
    rhs: np.ndarray,
    u0: np.ndarray,
    working: list[int],
    tols: Tolerances,
    cap: int,
) -> tuple[np.ndarray, list[int], bool]:
    u = u0.copy()
    total = rows.shape[0]
    stall = 0
    stall_limit = 8 * (rows.shape[1] + 4)
    for iteration in range(cap):
        if stall > stall_limit:
            break  # degenerate add/drop ping-pong; let the caller reperturb
        if iteration % 128 == 127 and _optimality_certificate(rows, rhs, u, tols):
            return u, working, True
        AW = rows[working]
        bW = rhs[working]
        target, *_ = np.linalg.lstsq(AW, bW, rcond=None)
        step = target - u
        if float(np.abs(step).max(initial=0.0)) <= 1e-11:
            lam, *_ = np.linalg.lstsq(AW.T, u, rcond=None)
            negative = [
                (working[i], lam[i])
                for i in range(len(working))
                if working[i] != 0 and lam[i] < -1e-9
            ]
            if not negative:
                return u, working, True
            drop = min(k for k, _ in negative)  # lowest index, anti-cycling
            working.remove(drop)
            stall += 1
            continue
        alpha = 1.0
        blocker = -1
        for k in range(1, total):
            if k in working:
                continue
            advance = float(rows[k] @ step)
            if advance >= -1e-12:
                continue
            gap = float(rhs[k] - rows[k] @ u)
            bound = max(gap / advance, 0.0)
            if bound < alpha - 1e-12:
                alpha = bound
                blocker = k
        u = u + alpha * step
        stall = stall + 1 if alpha <= 1e-12 else 0
        if blocker >= 0:
            # Only independent rows may join: a dependent working system is
            # inconsistent under round-off and poisons every later solve.
            # A dependent blocker instead swaps out one of the inequality
            # rows it is a combination of (exchange pivot).
            trial = working + [blocker]
            if np.linalg.matrix_rank(rows[trial]) == len(trial):
                working.append(blocker)
                working.sort()
            else:
                combo, *_ = np.linalg.lstsq(rows[working].T, rows[blocker], rcond=None)
                swappable = [
                    working[i]
                    for i in range(len(working))
                    if working[i] != 0 and abs(combo[i]) > 1e-8
                ]
                if swappable:
                    working.remove(min(swappable))
                    working.append(blocker)
                    working.sort()
                stall += 1
    return u, working, False


def _optimality_certificate(
    rows: np.ndarray, rhs: np.ndarray, u: np.ndarray, tols: Tolerances
) -> bool:
    """Global-optimality check for the strictly convex QP: u is feasible and
    the gradient lies in the cone of active constraint normals, i.e. there
    exist multipliers lambda >= 0 (free on the equality) with A_W^T lambda
    = u up to the stationarity tolerance.

    A least-squares multiplier fit decides the common case; when it carries
    negative entries (multipliers are not unique once the active normals are
    dependent), existence is settled exactly by minimizing the L1
    stationarity residual over nonnegative multipliers with the simplex.
    """
    slack = rows @ u - rhs
    if abs(slack[0]) > tols.feasibility:
        return False
    if slack[1:].min(initial=0.0) < -tols.feasibility:
        return False
    active = [0] + [k for k in range(1, rows.shape[0]) if slack[k] <= 1e-7]
    AW = rows[active]
    lam, *_ = np.linalg.lstsq(AW.T, u, rcond=None)
    residual = float(np.abs(AW.T @ lam - u).max(initial=0.0))
    if residual <= tols.kkt and (lam[1:] >= -1e-9).all():
        return True
    n = len(u)
    k = len(active)
    # columns: equality multiplier split into +/-, active inequality
    # multipliers, then +/- residual absorbers
    A = np.column_stack([AW[0], -AW[0], AW[1:].T, np.eye(n), -np.eye(n)])
    c = np.concatenate([np.zeros(k + 1), np.ones(2 * n)])
    status, x, _, _ = _solve_standard_form(
        A, u.copy(), c, tols, cap=_iteration_cap(n, k + 2 * n)
    )
    if status != SolveStatus.OPTIMAL:
        return False
    return float(c @ x) <= tols.kkt * max(1, n)


def _projected_gradient(
    cs: ConstraintSet, eps: float, u0: np.ndarray, tols: Tolerances, iters: int = 5000
) -> np.ndarray:
    """Fallback minimizer: shrink toward the origin with diminishing steps,
    re-projecting onto the polytope by alternating projections."""
    inc = cs.incidence()
    vals = cs.values() - eps if len(cs) else np.zeros(0)
    u = u0.copy()
    for k in range(1, iters + 1):
        u = (1.0 - 1.0 / (k + 1.0)) * u
        u = _project_polytope(u, inc, vals, tols)
    return u


def _project_simplex(v: np.ndarray) -> np.ndarray:
    # Euclidean projection onto the probability simplex (sorted threshold).
    n = len(v)
    srt = np.sort(v)[::-1]
    css = np.cumsum(srt) - 1.0
    idx = np.arange(1, n + 1)
    cond = srt - css / idx > 0
    rho = int(idx[cond][-1])
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _project_polytope(
    v: np.ndarray, inc: np.ndarray, vals: np.ndarray, tols: Tolerances, rounds: int = 400
) -> np.ndarray:
    u = _project_simplex(v)
    if len(vals) == 0:
        return u
    for _ in range(rounds):
        slack = inc @ u - vals
        worst = int(np.argmin(slack))
        if slack[worst] >= -tols.feasibility:
            return u
        a = inc[worst]
        u = u + a * (-slack[worst]) / float(a @ a)
        u = _project_simplex(u)
    return u


# --------------------------------------------------------------------------
# Full-enumeration (brute force) solvers


def enumerate_constraints(
    oracle: ValueOracle,
    cap: int = ENUMERATION_CAP,
    *,
    prune: bool = True,
) -> ConstraintSet:
    """All nonempty proper coalition rows of a game, in canonical order.

    With ``prune`` (default), rows dominated by a subset with at least the
    same value are dropped: when ``T subset S`` and ``v(T) >= v(S)``, the row
    for T implies the row for S for every deficit, since u >= 0. The pruned
    LP/QP have identical optima. For binary monotone games this keeps
    exactly the minimal winning coalitions.
    """
    n = oracle.n
    if n > cap:
        raise TooLarge(f"enumeration over 2^{n} coalitions exceeds the cap ({cap})")
    full = 1 << n
    values = np.empty(full)
    values[0] = 0.0
    values[full - 1] = 1.0
    for mask in range(1, full - 1):
        values[mask] = oracle.query_mask(mask)
    cs = ConstraintSet(n)
    if not prune:
        for mask in sorted(range(1, full - 1), key=lambda m: (m.bit_count(), m)):
            cs.add(Coalition(mask, n), float(values[mask]))
        return cs
    best = values.copy()  # best[S] = max value over subsets of S (incl. S)
    keep: list[int] = []
    for mask in range(1, full):
        sub_best = 0.0
        mm = mask
        while mm:
            bit = mm & -mm
            cand = best[mask ^ bit]
            if cand > sub_best:
                sub_best = cand
            mm ^= bit
        if values[mask] > sub_best:
            if mask != full - 1:
                keep.append(mask)
            best[mask] = values[mask]
        else:
            best[mask] = sub_best
    for mask in sorted(keep, key=lambda m: (m.bit_count(), m)):
        cs.add(Coalition(mask, n), float(values[mask]))
    return cs


def solve_full_lp(
    oracle: ValueOracle, cap: int = ENUMERATION_CAP, tols: Tolerances = DEFAULT_TOLS
) -> LpSolution:
    """Least-core LP over every nonempty proper coalition (ground truth)."""
    return solve_restricted_lp(enumerate_constraints(oracle, cap), tols)


def solve_full_qp(
    oracle: ValueOracle, cap: int = ENUMERATION_CAP, tols: Tolerances = DEFAULT_TOLS
) -> Allocation:
    """Egalitarian least-core allocation by full enumeration (ground truth)."""
    cs = enumerate_constraints(oracle, cap)
    lp = solve_restricted_lp(cs, tols)
    if lp.status != SolveStatus.OPTIMAL:
        raise NumericalFailure("full LP did not reach optimality")
    return solve_restricted_qp(cs, lp.eps, tols, warm=lp)


# --------------------------------------------------------------------------
# LP interchange dump (for cross-checking against independent solvers)


def dump_lp_format(cs: ConstraintSet, name: str = "restricted_least_core") -> str:
    """Render the restricted LP in CPLEX LP text format."""
    n = cs.n
    lines = [f"\\ {name}: {len(cs)} coalition rows, {n} players", "Minimize", " obj: eps", "Subject To"]
    total = " + ".join(f"u{i}" for i in range(n))
    lines.append(f" total: {total} = 1")
    for j, (coalition, value) in enumerate(cs):
        terms = " + ".join(f"u{i}" for i in coalition.indices())
        lines.append(f" r{j}: {terms} + eps >= {value!r}")
    lines.append("Bounds")
    for i in range(n):
        lines.append(f" 0 <= u{i} <= 1")
    lines.append(" 0 <= eps <= 1")
    lines.append("End")
    return "\n".join(lines) + "\n"
