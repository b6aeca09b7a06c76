"""External proposer/value plugin sessions.

A plugin is a subprocess speaking newline-delimited JSON over its standard
input/output. Requests carry monotonically increasing ids; each response
must echo the id of the request it answers. Request types:

    hello {n, labels?, question_context?}   -> {name, version}
    value {coalition: [indices]}            -> {value: float}
    propose_violated {u, eps, k}            -> {coalitions: [[indices]...]}
    propose_seeds {k}                       -> {coalitions: [[indices]...]}
    propose_allocation {}                   -> {u: [floats]}
    shutdown {}                             -> (session end)

Each request has a timeout and is retried once before the session gives up
with :class:`PluginTimeout`.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time

from .errors import PluginProtocolError, PluginTimeout, SpawnError
from .games import ValueOracle

DEFAULT_TIMEOUT = 120.0

_EOF = object()


class PluginSession:
    """One subprocess session; requests are serialized by an internal lock."""

    def __init__(
        self,
        argv: list[str],
        timeout: float = DEFAULT_TIMEOUT,
        *,
        cwd: str | None = None,
    ):
        self.argv = list(argv)
        self.timeout = timeout
        self.warnings: list[str] = []
        self._next_id = 0
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                cwd=cwd,
            )
        except OSError as exc:
            raise SpawnError(f"cannot spawn plugin {self.argv!r}: {exc}") from exc
        self._queue: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._queue.put(line)
        self._queue.put(_EOF)

    def _send(self, record: dict) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(record) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PluginTimeout(f"plugin pipe closed while sending: {exc}") from exc

    def _receive(self, expect_id: int) -> dict:
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PluginTimeout(
                    f"no response within {self.timeout}s (request id {expect_id})"
                )
            try:
                line = self._queue.get(timeout=remaining)
            except queue.Empty:
                raise PluginTimeout(
                    f"no response within {self.timeout}s (request id {expect_id})"
                ) from None
            if line is _EOF:
                raise PluginTimeout("plugin exited mid-session")
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PluginProtocolError(f"malformed response line {line!r}") from exc
            if not isinstance(record, dict):
                raise PluginProtocolError(f"response is not an object: {line!r}")
            rid = record.get("id")
            if isinstance(rid, int) and rid < expect_id:
                self.warnings.append(f"discarding stale response for request {rid}")
                continue  # answer to an earlier, timed-out request
            if rid != expect_id:
                raise PluginProtocolError(
                    f"response id {rid!r} does not match request id {expect_id}"
                )
            if "error" in record:
                raise PluginProtocolError(
                    f"plugin reported an error: {record['error']!r}"
                )
            return record

    def request(self, record_type: str, **fields) -> dict:
        """Send one request; on timeout or a malformed line, retry once."""
        with self._lock:
            last_error: Exception | None = None
            for attempt in range(2):
                self._next_id += 1
                rid = self._next_id
                self._send({"id": rid, "type": record_type, **fields})
                try:
                    return self._receive(rid)
                except PluginProtocolError as exc:
                    last_error = exc
                    self.warnings.append(f"retrying after protocol error: {exc}")
                except PluginTimeout as exc:
                    last_error = exc
                    if "exited" in str(exc):
                        raise  # pointless to retry against a dead process
                    self.warnings.append(f"retrying after timeout: {exc}")
            assert last_error is not None
            raise last_error

    # Typed helpers -------------------------------------------------------

    def hello(
        self, n: int, labels: list[str] | None = None, question_context: str | None = None
    ) -> dict:
        fields: dict = {"n": n}
        if labels is not None:
            fields["labels"] = labels
        if question_context is not None:
            fields["question_context"] = question_context
        return self.request("hello", **fields)

    def value(self, indices: list[int]) -> float:
        record = self.request("value", coalition=[int(i) for i in indices])
        try:
            return float(record["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PluginProtocolError(f"bad value response {record!r}") from exc

    def propose_violated(self, u: list[float], eps: float, k: int) -> list:
        record = self.request("propose_violated", u=u, eps=eps, k=k)
        coalitions = record.get("coalitions", [])
        if not isinstance(coalitions, list):
            raise PluginProtocolError(f"bad propose_violated response {record!r}")
        return coalitions[:k]

    def propose_seeds(self, k: int) -> list:
        record = self.request("propose_seeds", k=k)
        coalitions = record.get("coalitions", [])
        if not isinstance(coalitions, list):
            raise PluginProtocolError(f"bad propose_seeds response {record!r}")
        return coalitions[:k]

    def propose_allocation(self) -> list:
        record = self.request("propose_allocation")
        u = record.get("u")
        if not isinstance(u, list):
            raise PluginProtocolError(f"bad propose_allocation response {record!r}")
        return u

    def shutdown(self, grace: float = 5.0) -> None:
        if self._proc.poll() is None:
            try:
                with self._lock:
                    self._next_id += 1
                    self._send({"id": self._next_id, "type": "shutdown"})
            except PluginTimeout:
                pass
            try:
                self._proc.wait(timeout=grace)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass

    def __enter__(self) -> "PluginSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def plugin_session(argv: list[str], timeout: float = DEFAULT_TIMEOUT) -> PluginSession:
    """Spawn a plugin subprocess session."""
    return PluginSession(argv, timeout)


class ExternalValueOracle(ValueOracle):
    """Value oracle backed by a plugin session.

    The empty/full normalization is enforced by an affine rescale measured
    once at construction: values map through (v - v0) / (v1 - v0) with v0,
    v1 the plugin's answers for the empty and grand coalitions. A rescale
    away from the identity is recorded as a session warning. Wrap in a
    cache: replay determinism is the cache's job, not the plugin's.
    """

    def __init__(self, plugin: PluginSession, n: int):
        super().__init__(n)
        self.plugin = plugin
        v0 = plugin.value([])
        v1 = plugin.value(list(range(n)))
        if v1 - v0 <= 0:
            raise PluginProtocolError(
                f"plugin normalization is degenerate: v(empty)={v0}, v(full)={v1}"
            )
        self._offset = v0
        self._scale = v1 - v0
        if abs(v0) > 1e-9 or abs(v1 - 1.0) > 1e-9:
            plugin.warnings.append(
                f"rescaling plugin values affinely: offset={v0!r}, scale={self._scale!r}"
            )

    def _evaluate(self, mask: int) -> float:
        indices = [i for i in range(self.n) if mask >> i & 1]
        raw = self.plugin.value(indices)
        return (raw - self._offset) / self._scale
