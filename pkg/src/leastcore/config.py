"""Centralized numeric tolerances.

One frozen record is threaded through the solvers so that feasibility,
optimality and violation thresholds are never duplicated as magic numbers.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Shared numeric thresholds.

    feasibility: max constraint violation accepted in an optimal LP/QP point.
    kkt:         max stationarity residual accepted for the QP minimizer.
    equality:    tolerance on structural equalities (allocation sums to 1).
    violation:   margin by which a coalition must be under-compensated before
                 a separation oracle reports it (distinguishes real violations
                 from LP round-off).
    zero:        threshold below which an allocation entry counts as zero.
    pivot:       magnitude below which a tableau entry is unusable as a pivot.
    """

    feasibility: float = 1e-8
    kkt: float = 1e-7
    equality: float = 1e-9
    violation: float = 1e-7
    zero: float = 1e-6
    pivot: float = 1e-10


DEFAULT_TOLS = Tolerances()

# Enumeration caps: full-lattice work is exponential in n, so the solvers
# refuse above these sizes unless the caller raises the cap explicitly.
ENUMERATION_CAP = 16
PAIRWISE_CAP = 10


class Stream:
    """Stream tags for deriving independent generators from one user seed.

    Reusing a single seed across seeding, separation sampling and holdout
    construction must not correlate their draws (a sampler that re-draws the
    seeded coalitions can never separate them), so every consumer derives
    its generator through its own tag.
    """

    SEEDING = 1
    SAMPLING = 2
    HOLDOUT = 3
    SAMPLE_THEN_SOLVE = 4
    VERTICES = 5


def rng_for(seed: int, stream: int):
    import numpy as np

    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
