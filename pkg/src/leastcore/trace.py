"""Per-round solve traces and their columnar text format.

One record per round: round number, cumulative distinct oracle calls when
the snapshot's allocation was produced, reported deficit, optional holdout
deficit, the allocation entries, and the number of constraints the round
added. Files are tab-separated with a header and are byte-deterministic
(floats rendered with repr).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ParseError

REASONS = ("Converged", "BudgetExhausted", "MaxRounds")


@dataclass
class RoundRecord:
    round: int
    calls: int
    eps: float
    u: np.ndarray
    added: int = 0
    holdout_eps: float | None = None


@dataclass
class SolveTrace:
    n: int
    rounds: list[RoundRecord] = field(default_factory=list)
    reason: str = "Converged"
    total_calls: int = 0
    method: str = ""
    separation_calls: int = 0

    def with_holdout(self, values: list[float]) -> "SolveTrace":
        if len(values) != len(self.rounds):
            raise ParseError(
                f"{len(values)} holdout values for {len(self.rounds)} rounds"
            )
        rounds = [replace(r, holdout_eps=float(v)) for r, v in zip(self.rounds, values)]
        return replace(self, rounds=rounds)


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_trace(trace: SolveTrace, path: str | Path) -> None:
    path = Path(path)
    header = ["round", "calls", "eps", "holdout_eps"]
    header += [f"u{i}" for i in range(trace.n)]
    header += ["added", "reason", "method", "total_calls", "separation_calls"]
    lines = ["\t".join(header)]
    for r in trace.rounds:
        row = [str(r.round), str(r.calls), _fmt(r.eps), _fmt(r.holdout_eps)]
        row += [_fmt(x) for x in r.u]
        row += [
            str(r.added),
            trace.reason,
            trace.method,
            str(trace.total_calls),
            str(trace.separation_calls),
        ]
        lines.append("\t".join(row))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_trace(path: str | Path) -> SolveTrace:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{path}: empty trace file")
    header = lines[0].split("\t")
    try:
        n = len([h for h in header if h.startswith("u") and h[1:].isdigit()])
        idx = {name: header.index(name) for name in ("round", "calls", "eps", "holdout_eps", "added", "reason", "method", "total_calls", "separation_calls")}
    except ValueError as exc:
        raise ParseError(f"{path}: malformed trace header") from exc
    rounds = []
    reason, method, total_calls, separation_calls = "Converged", "", 0, 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        try:
            u = np.asarray([float(cells[header.index(f"u{i}")]) for i in range(n)])
            holdout_raw = cells[idx["holdout_eps"]]
            rounds.append(
                RoundRecord(
                    round=int(cells[idx["round"]]),
                    calls=int(cells[idx["calls"]]),
                    eps=float(cells[idx["eps"]]),
                    u=u,
                    added=int(cells[idx["added"]]),
                    holdout_eps=float(holdout_raw) if holdout_raw else None,
                )
            )
            reason = cells[idx["reason"]]
            method = cells[idx["method"]]
            total_calls = int(cells[idx["total_calls"]])
            separation_calls = int(cells[idx["separation_calls"]])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed trace row") from exc
    return SolveTrace(
        n=n,
        rounds=rounds,
        reason=reason,
        total_calls=total_calls,
        method=method,
        separation_calls=separation_calls,
    )
