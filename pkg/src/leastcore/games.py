"""Coalitional game model.

Coalitions are fixed-width bitmasks over player indices ``0..n-1`` (n <= 63),
value functions are :class:`ValueOracle` objects mapping coalitions to values
in ``[0, 1]`` with ``v(empty) = 0`` and ``v(full) = 1``. The module also
provides the synthetic game families used for testing and benchmarking, a
memoizing/persisting oracle wrapper, and game-instance file I/O.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    CacheMiss,
    CacheReadError,
    CacheWriteError,
    DuplicateIndex,
    EmptyMwcList,
    IndexOutOfRange,
    InvalidExponent,
    InvalidParams,
    InvariantViolation,
    NotAntichain,
    OddN,
    ParseError,
)

MAX_PLAYERS = 63

LABELS = ("gold", "evidence", "negative")
_LABEL_ALIASES = {"g": "gold", "e": "evidence", "n": "negative"}


@dataclass(frozen=True)
class Coalition:
    """A subset of the n players, encoded as a bitmask.

    Coalitions order canonically by ``(popcount, mask)`` so that iteration
    over collections of them is deterministic.
    """

    mask: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_PLAYERS:
            raise IndexOutOfRange(f"player count must be in [1, {MAX_PLAYERS}], got {self.n}")
        if self.mask < 0 or self.mask >> self.n:
            raise IndexOutOfRange(f"mask {self.mask:#x} has bits outside [0, {self.n})")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "Coalition":
        mask = 0
        for i in indices:
            if not 0 <= i < n:
                raise IndexOutOfRange(f"player index {i} not in [0, {n})")
            bit = 1 << i
            if mask & bit:
                raise DuplicateIndex(f"player index {i} listed twice")
            mask |= bit
        return cls(mask, n)

    @classmethod
    def empty(cls, n: int) -> "Coalition":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "Coalition":
        return cls((1 << n) - 1, n)

    @classmethod
    def singleton(cls, i: int, n: int) -> "Coalition":
        if not 0 <= i < n:
            raise IndexOutOfRange(f"player index {i} not in [0, {n})")
        return cls(1 << i, n)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.n) - 1

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.mask >> i & 1)

    def contains(self, i: int) -> bool:
        return bool(self.mask >> i & 1)

    def issubset(self, other: "Coalition") -> bool:
        return self.mask & ~other.mask == 0

    def union(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask | other.mask, self.n)

    def intersection(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask & other.mask, self.n)

    def without(self, i: int) -> "Coalition":
        return Coalition(self.mask & ~(1 << i), self.n)

    def sort_key(self) -> tuple[int, int]:
        return (self.size, self.mask)

    def to_hex(self) -> str:
        return format(self.mask, "x")

    @classmethod
    def from_hex(cls, text: str, n: int) -> "Coalition":
        try:
            mask = int(text, 16)
        except ValueError as exc:
            raise ParseError(f"invalid coalition mask {text!r}") from exc
        return cls(mask, n)

    def __str__(self) -> str:  # {0,2} style, for diagnostics
        return "{" + ",".join(map(str, self.indices())) + "}"


def coalition_from_indices(indices: Iterable[int], n: int) -> Coalition:
    """Build a coalition from explicit player indices."""
    return Coalition.from_indices(indices, n)


def iter_proper_coalitions(n: int) -> Iterator[Coalition]:
    """All nonempty proper coalitions in canonical (popcount, mask) order."""
    masks = sorted(range(1, (1 << n) - 1), key=lambda m: (m.bit_count(), m))
    for m in masks:
        yield Coalition(m, n)


def proper_masks(n: int) -> np.ndarray:
    """Nonempty proper coalition masks in canonical order, as uint64."""
    masks = sorted(range(1, (1 << n) - 1), key=lambda m: (m.bit_count(), m))
    return np.asarray(masks, dtype=np.uint64)


def mask_payoffs(masks: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Coalition payoffs ``sum_{i in S} u_i`` for an array of masks."""
    n = len(u)
    bits = (masks[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & np.uint64(1)
    return bits.astype(np.float64) @ np.asarray(u, dtype=np.float64)


@dataclass(frozen=True)
class Allocation:
    """A value-sharing vector u (entries in [0,1], summing to 1) together
    with the deficit eps it was computed at."""

    u: np.ndarray
    eps: float

    def validate(self, *, equality_tol: float = 1e-9, box_tol: float = 1e-9) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        if abs(float(u.sum()) - 1.0) > equality_tol:
            raise InvariantViolation(f"allocation sums to {u.sum()!r}, expected 1")
        if (u < -box_tol).any() or (u > 1.0 + box_tol).any():
            raise InvariantViolation("allocation entries outside [0, 1]")
        if self.eps < -box_tol:
            raise InvariantViolation(f"deficit must be nonnegative, got {self.eps!r}")


class ValueOracle:
    """Coalition -> value map, normalized so v(empty)=0 and v(full)=1.

    Subclasses implement :meth:`_evaluate` on raw masks. Values are clamped
    to [0, 1]. The ``calls`` counter tracks distinct nonempty proper
    coalitions evaluated (the structurally pinned empty/full sets are free).
    Queries are thread-safe.
    """

    def __init__(self, n: int, *, binary: bool = False):
        if not 1 <= n <= MAX_PLAYERS:
            raise IndexOutOfRange(f"player count must be in [1, {MAX_PLAYERS}], got {n}")
        self.n = n
        self.binary = binary
        self._seen: set[int] = set()
        self._lock = threading.Lock()

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def calls(self) -> int:
        return len(self._seen)

    def query(self, coalition: Coalition) -> float:
        if coalition.n != self.n:
            raise IndexOutOfRange(
                f"coalition has n={coalition.n} but oracle has n={self.n}"
            )
        return self.query_mask(coalition.mask)

    def query_mask(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        if mask == self.full_mask:
            return 1.0
        with self._lock:
            self._seen.add(mask)
        value = self._evaluate(mask)
        return min(1.0, max(0.0, value))

    def _evaluate(self, mask: int) -> float:
        raise NotImplementedError

    def query_masks(self, masks: Iterable[int]) -> np.ndarray:
        return np.asarray([self.query_mask(int(m)) for m in masks], dtype=np.float64)


class FunctionOracle(ValueOracle):
    """Oracle backed by an arbitrary mask -> value callable."""

    def __init__(self, n: int, fn: Callable[[int], float], *, binary: bool = False):
        super().__init__(n, binary=binary)
        self._fn = fn

    def _evaluate(self, mask: int) -> float:
        return float(self._fn(mask))


class MwcOracle(ValueOracle):
    """Binary monotone game: a coalition wins iff it contains a listed
    minimal winning coalition."""

    def __init__(self, n: int, mwcs: Sequence[Coalition]):
        super().__init__(n, binary=True)
        if not mwcs:
            raise EmptyMwcList("at least one minimal winning coalition is required")
        masks = []
        for c in mwcs:
            if c.n != n:
                raise IndexOutOfRange(f"MWC {c} has n={c.n}, expected {n}")
            if c.is_empty:
                raise EmptyMwcList("minimal winning coalitions must be nonempty")
            masks.append(c.mask)
        for a in masks:
            for b in masks:
                if a != b and a & ~b == 0:
                    raise NotAntichain(
                        f"MWC {Coalition(a, n)} is a strict subset of {Coalition(b, n)}"
                    )
        self.mwc_masks = tuple(sorted(set(masks), key=lambda m: (m.bit_count(), m)))

    def _evaluate(self, mask: int) -> float:
        for m in self.mwc_masks:
            if m & ~mask == 0:
                return 1.0
        return 0.0


class VetoOracle(ValueOracle):
    """Binary game won exactly by the coalitions containing the veto player."""

    def __init__(self, n: int, veto: int):
        super().__init__(n, binary=True)
        if not 0 <= veto < n:
            raise IndexOutOfRange(f"veto player {veto} not in [0, {n})")
        self.veto = veto

    def _evaluate(self, mask: int) -> float:
        return 1.0 if mask >> self.veto & 1 else 0.0


class PowerOracle(ValueOracle):
    """v(S) = (|S|/n)^p; supermodular for p >= 1, additive at p = 1."""

    def __init__(self, n: int, p: float):
        if not (isinstance(p, (int, float)) and math.isfinite(p)) or p < 1:
            raise InvalidExponent(f"exponent must be a finite number >= 1, got {p!r}")
        super().__init__(n, binary=False)
        self.p = float(p)

    def _evaluate(self, mask: int) -> float:
        return (mask.bit_count() / self.n) ** self.p


class TableOracle(ValueOracle):
    """Oracle backed by an explicit mask -> value table (replay/cache mode).

    Raises :class:`CacheMiss` on coalitions absent from the table.
    """

    def __init__(self, n: int, values: dict[int, float], *, binary: bool | None = None):
        table = {}
        full = (1 << n) - 1
        for mask, value in values.items():
            mask = int(mask)
            if mask < 0 or mask >> n:
                raise InvariantViolation(f"mask {mask:#x} outside the {n}-player lattice")
            value = float(value)
            if mask == 0 and abs(value) > 1e-12:
                raise InvariantViolation(f"v(empty) must be 0, table has {value}")
            if mask == full and abs(value - 1.0) > 1e-12:
                raise InvariantViolation(f"v(full) must be 1, table has {value}")
            table[mask] = min(1.0, max(0.0, value))
        if binary is None:
            binary = all(v in (0.0, 1.0) for v in table.values())
        super().__init__(n, binary=binary)
        self.table = table

    def _evaluate(self, mask: int) -> float:
        try:
            return self.table[mask]
        except KeyError:
            raise CacheMiss(f"coalition {Coalition(mask, self.n)} not in table") from None


def make_mwc_game(n: int, mwcs: Sequence[Coalition]) -> MwcOracle:
    """Binary monotone oracle winning exactly on supersets of the given MWCs."""
    return MwcOracle(n, mwcs)


def make_veto_game(n: int, veto: int) -> VetoOracle:
    """Binary oracle with a single veto player."""
    return VetoOracle(n, veto)


def make_power_game(n: int, p: float) -> PowerOracle:
    """Supermodular family v(S) = (|S|/n)^p for p >= 1."""
    return PowerOracle(n, p)


def make_example_pair(n: int) -> tuple[ValueOracle, ValueOracle]:
    """A true/estimated pair of binary games with exponentially small
    disagreement but maximally different least-core deficits.

    With A the first n/2 players and B the rest: the true game is won by
    supersets of A, the estimated game by supersets of A or of B. The two
    agree everywhere except on the supersets of B that miss a member of A.
    """
    if n < 2 or n % 2:
        raise OddN(f"player count must be even and >= 2, got {n}")
    half = n // 2
    a_mask = (1 << half) - 1
    b_mask = ((1 << n) - 1) ^ a_mask

    def true_fn(mask: int) -> float:
        return 1.0 if a_mask & ~mask == 0 else 0.0

    def est_fn(mask: int) -> float:
        return 1.0 if (a_mask & ~mask == 0) or (b_mask & ~mask == 0) else 0.0

    v = FunctionOracle(n, true_fn, binary=True)
    vhat = FunctionOracle(n, est_fn, binary=True)
    return v, vhat


def make_random_game(n: int, seed: int | np.random.Generator = 0) -> TableOracle:
    """Continuous game with i.i.d. uniform values on every proper coalition."""
    rng = np.random.default_rng(seed)
    values = {int(m): float(v) for m, v in zip(range(1, (1 << n) - 1), rng.random((1 << n) - 2))}
    values[0] = 0.0
    values[(1 << n) - 1] = 1.0
    return TableOracle(n, values)


def make_random_mwc_game(
    n: int, seed: int | np.random.Generator = 0, *, max_mwcs: int = 6, max_size: int | None = None
) -> MwcOracle:
    """Random binary monotone game from a random antichain of winning sets."""
    rng = np.random.default_rng(seed)
    max_size = max_size or max(2, n // 2 + 1)
    count = int(rng.integers(1, max_mwcs + 1))
    picked: list[int] = []
    attempts = 0
    while len(picked) < count and attempts < 200:
        attempts += 1
        size = int(rng.integers(1, max_size + 1))
        members = rng.choice(n, size=size, replace=False)
        mask = 0
        for i in members:
            mask |= 1 << int(i)
        if any(m & ~mask == 0 or mask & ~m == 0 for m in picked):
            continue
        picked.append(mask)
    return MwcOracle(n, [Coalition(m, n) for m in picked])


def make_random_supermodular_game(
    n: int, seed: int | np.random.Generator = 0, *, components: int = 3
) -> TableOracle:
    """Random supermodular game: a convex mix of terms g_k(|S ∩ T_k|) with
    convex increasing g_k, tabulated over the full lattice (small n only)."""
    rng = np.random.default_rng(seed)
    full = (1 << n) - 1
    terms = []
    for _ in range(components):
        size = int(rng.integers(1, n + 1))
        members = rng.choice(n, size=size, replace=False)
        tmask = 0
        for i in members:
            tmask |= 1 << int(i)
        p = float(rng.uniform(1.0, 3.0))
        terms.append((tmask, size, p))
    weights = rng.random(components)
    weights = weights / weights.sum()
    values = {}
    for mask in range(0, full + 1):
        total = 0.0
        for w, (tmask, size, p) in zip(weights, terms):
            total += w * ((mask & tmask).bit_count() / size) ** p
        values[mask] = total
    values[0] = 0.0
    values[full] = 1.0
    return TableOracle(n, values)


def perturb_game(
    oracle: ValueOracle,
    seed: int | np.random.Generator = 0,
    *,
    noise: float = 0.1,
    flip_prob: float | None = None,
) -> TableOracle:
    """Tabulated noisy copy of a game (small n): additive uniform noise for
    continuous games, or value flips with probability ``flip_prob`` for
    binary ones. The empty/full normalization is preserved."""
    rng = np.random.default_rng(seed)
    n = oracle.n
    full = (1 << n) - 1
    values = {}
    for mask in range(1, full):
        v = oracle.query_mask(mask)
        if flip_prob is not None:
            if rng.random() < flip_prob:
                v = 1.0 - v
        else:
            v = min(1.0, max(0.0, v + rng.uniform(-noise, noise)))
        values[mask] = v
    values[0] = 0.0
    values[full] = 1.0
    return TableOracle(n, values, binary=flip_prob is not None and oracle.binary)


class CachedOracle(ValueOracle):
    """Memoizing wrapper around another oracle.

    ``calls`` counts distinct inner evaluations only; repeat queries are
    free. If ``persist_path`` is set, the cache is loaded at construction
    and every new evaluation is appended as a JSON line ``{"mask": hex,
    "value": float}``. An optional ``budget`` caps the number of distinct
    inner evaluations; a miss beyond it raises :class:`BudgetExceeded`.

    Misses are evaluated under the wrapper lock, so each coalition hits the
    inner oracle at most once even under concurrent queries.
    """

    def __init__(
        self,
        inner: ValueOracle,
        persist_path: str | Path | None = None,
        *,
        preload: dict[int, float] | None = None,
        budget: int | None = None,
    ):
        super().__init__(inner.n, binary=inner.binary)
        self.inner = inner
        self.budget = budget
        self._map: dict[int, float] = {}
        self._persist_path = Path(persist_path) if persist_path is not None else None
        if preload:
            for mask, value in preload.items():
                self._map[int(mask)] = float(value)
        if self._persist_path is not None and self._persist_path.exists():
            self._map.update(read_cache_file(self._persist_path, self.n))

    @property
    def remaining_budget(self) -> int | None:
        if self.budget is None:
            return None
        return max(0, self.budget - self.calls)

    def query_mask(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        if mask == self.full_mask:
            return 1.0
        with self._lock:
            if mask in self._map:
                return self._map[mask]
            if self.budget is not None and len(self._seen) >= self.budget:
                raise BudgetExceeded(
                    f"distinct-evaluation budget of {self.budget} exhausted"
                )
            value = self.inner.query_mask(mask)
            self._map[mask] = value
            self._seen.add(mask)
            if self._persist_path is not None:
                append_cache_record(self._persist_path, mask, value)
        return value

    def _evaluate(self, mask: int) -> float:  # pragma: no cover - unreachable
        raise AssertionError("CachedOracle overrides query_mask directly")

    def snapshot(self) -> dict[int, float]:
        with self._lock:
            return dict(self._map)


def cached(inner: ValueOracle, persist_path: str | Path | None = None) -> CachedOracle:
    """Wrap an oracle with memoization and optional on-disk persistence."""
    return CachedOracle(inner, persist_path)


def read_cache_file(path: str | Path, n: int) -> dict[int, float]:
    """Load a newline-delimited cache file of {"mask": hex, "value": v} records."""
    result: dict[int, float] = {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CacheReadError(f"cannot read cache file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            mask = int(record["mask"], 16)
            value = float(record["value"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CacheReadError(f"{path}:{lineno}: malformed cache record") from exc
        if mask < 0 or mask >> n:
            raise CacheReadError(f"{path}:{lineno}: mask {mask:#x} outside the lattice")
        result[mask] = value
    return result


def append_cache_record(path: str | Path, mask: int, value: float) -> None:
    """Append one cache record; the single write keeps the append atomic."""
    line = json.dumps({"mask": format(mask, "x"), "value": value}) + "\n"
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line)
    except OSError as exc:
        raise CacheWriteError(f"cannot append to cache file {path}: {exc}") from exc


# --------------------------------------------------------------------------
# Game instances (file format)


@dataclass
class GameInstance:
    """A named game: player count, optional player labels, an oracle
    descriptor, and optional cached values and holdout coalitions."""

    id: str
    n: int
    oracle_spec: dict
    labels: list[str] | None = None
    cache: dict[int, float] = field(default_factory=dict)
    holdout: list[Coalition] | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_PLAYERS:
            raise InvariantViolation(f"n must be in [1, {MAX_PLAYERS}], got {self.n}")
        if self.labels is not None:
            if len(self.labels) != self.n:
                raise InvariantViolation(
                    f"labels has length {len(self.labels)}, expected n={self.n}"
                )
            canon = []
            for lab in self.labels:
                lab = _LABEL_ALIASES.get(lab, lab)
                if lab not in LABELS:
                    raise InvariantViolation(f"unknown label {lab!r}")
                canon.append(lab)
            self.labels = canon
        if self.holdout is not None:
            for c in self.holdout:
                if c.n != self.n:
                    raise InvariantViolation(f"holdout coalition {c} has n={c.n}")
                if c.is_empty or c.is_full:
                    raise InvariantViolation(
                        "holdout coalitions must be nonempty proper subsets"
                    )


_ORACLE_KINDS = ("mwc", "veto", "power", "example-pair", "cache", "external")


def build_oracle(
    instance: GameInstance, *, plugin=None, persist_path: str | Path | None = None
) -> CachedOracle:
    """Construct the instance's value oracle, wrapped in a cache preloaded
    with the instance's stored values (and, when ``persist_path`` is given,
    with an on-disk cache that new evaluations are appended to).

    ``plugin`` must be an object with a ``value(indices) -> float`` method
    (see :mod:`leastcore.plugin`); it is required for kind "external".
    """
    spec = instance.oracle_spec
    kind = spec.get("kind")
    n = instance.n
    if kind == "mwc":
        mwcs = [Coalition.from_hex(h, n) for h in spec["mwcs"]]
        inner: ValueOracle = make_mwc_game(n, mwcs)
    elif kind == "veto":
        inner = make_veto_game(n, int(spec["veto"]))
    elif kind == "power":
        inner = make_power_game(n, float(spec["p"]))
    elif kind == "example-pair":
        v, vhat = make_example_pair(n)
        side = spec.get("side", "true")
        if side not in ("true", "estimated"):
            raise ParseError(f"example-pair side must be true|estimated, got {side!r}")
        inner = v if side == "true" else vhat
    elif kind == "cache":
        inner = TableOracle(n, instance.cache)
    elif kind == "external":
        if plugin is None:
            raise InvalidParams("external oracle requires a plugin session")
        from .plugin import ExternalValueOracle

        inner = ExternalValueOracle(plugin, n)
    else:
        raise ParseError(f"unknown oracle kind {kind!r}; expected one of {_ORACLE_KINDS}")
    return CachedOracle(inner, persist_path, preload=instance.cache or None)


def load_instance(path: str | Path) -> GameInstance:
    """Load a game instance from its JSON file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read instance file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top-level record must be an object")
    for fld in ("id", "n", "oracle"):
        if fld not in raw:
            raise ParseError(f"{path}: missing required field {fld!r}")
    n = raw["n"]
    if not isinstance(n, int):
        raise ParseError(f"{path}: field 'n' must be an integer")
    cache = {}
    for key, value in (raw.get("cache") or {}).items():
        try:
            cache[int(key, 16)] = float(value)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad cache entry {key!r}") from exc
    holdout = None
    if raw.get("holdout") is not None:
        holdout = [Coalition.from_hex(h, n) for h in raw["holdout"]]
    try:
        return GameInstance(
            id=str(raw["id"]),
            n=n,
            oracle_spec=raw["oracle"],
            labels=raw.get("labels"),
            cache=cache,
            holdout=holdout,
        )
    except InvariantViolation:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_instance(instance: GameInstance, path: str | Path) -> None:
    """Write an instance to JSON; round-trips through :func:`load_instance`."""
    record: dict = {
        "id": instance.id,
        "n": instance.n,
        "oracle": instance.oracle_spec,
    }
    if instance.labels is not None:
        record["labels"] = instance.labels
    if instance.cache:
        record["cache"] = {
            format(mask, "x"): instance.cache[mask]
            for mask in sorted(instance.cache, key=lambda m: (m.bit_count(), m))
        }
    if instance.holdout is not None:
        record["holdout"] = [c.to_hex() for c in instance.holdout]
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
