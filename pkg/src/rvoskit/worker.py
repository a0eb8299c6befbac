"""Line-delimited JSON client for external inference worker processes.

One request line yields exactly one response line; a worker handles one
request at a time, so parallelism comes from running several workers. The
first exchange with a fresh worker is the handshake ``{"op": "hello"}``
answered with at least ``{"name": ...}`` (segmenters add ``"coverage"``).
"""

from __future__ import annotations

import json
import os
import queue
import selectors
import shlex
import subprocess
import threading
from collections import deque
from contextlib import contextmanager
from typing import Sequence

from .errors import BackendError, ProtocolError

DEFAULT_TIMEOUT = 300.0


def parse_command(spec: str | Sequence[str]) -> list[str]:
    if isinstance(spec, str):
        cmd = shlex.split(spec)
    else:
        cmd = [str(part) for part in spec]
    if not cmd:
        raise BackendError("empty worker command")
    return cmd


class WorkerProcess:
    """One worker subprocess speaking the line-delimited JSON protocol."""

    def __init__(self, cmd: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.cmd = parse_command(cmd)
        self.timeout = timeout
        self._stderr_tail: deque[str] = deque(maxlen=50)
        self._buffer = b""
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                bufsize=0,
            )
        except OSError as exc:
            raise BackendError(f"cannot start worker {self.cmd!r}: {exc}") from exc
        self._drain = threading.Thread(target=self._drain_stderr, daemon=True)
        self._drain.start()
        self.hello = self.request({"op": "hello"})
        name = self.hello.get("name")
        if not isinstance(name, str) or not name:
            raise ProtocolError(f"worker handshake lacks a name: {self.hello!r}")
        self.name: str = name
        self.coverage = self.hello.get("coverage")

    def _drain_stderr(self) -> None:
        stream = self._proc.stderr
        if stream is None:
            return
        for raw in stream:
            self._stderr_tail.append(raw.decode("utf-8", "replace").rstrip())

    def _stderr_hint(self) -> str:
        tail = "; ".join(list(self._stderr_tail)[-5:])
        return f" (stderr: {tail})" if tail else ""

    def _read_line(self) -> bytes:
        assert self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        sel = selectors.DefaultSelector()
        sel.register(fd, selectors.EVENT_READ)
        try:
            while b"\n" not in self._buffer:
                if not sel.select(self.timeout):
                    raise BackendError(
                        f"worker {self.cmd[0]} timed out after {self.timeout}s{self._stderr_hint()}"
                    )
                chunk = os.read(fd, 1 << 16)
                if not chunk:
                    raise BackendError(
                        f"worker {self.cmd[0]} closed its output (exit code "
                        f"{self._proc.poll()}){self._stderr_hint()}"
                    )
                self._buffer += chunk
        finally:
            sel.close()
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def request(self, obj: dict) -> dict:
        """Send one request object, return the decoded response object."""
        if self._proc.poll() is not None:
            raise BackendError(f"worker {self.cmd[0]} already exited{self._stderr_hint()}")
        payload = json.dumps(obj, ensure_ascii=False).encode("utf-8") + b"\n"
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"worker {self.cmd[0]} pipe broken: {exc}{self._stderr_hint()}") from exc
        line = self._read_line()
        try:
            reply = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"worker {self.cmd[0]} sent a non-JSON line: {line[:200]!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"worker {self.cmd[0]} reply is not an object: {reply!r}")
        if "error" in reply:
            raise BackendError(f"worker {self.cmd[0]} reported an error: {reply['error']}")
        return reply

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "WorkerProcess":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class WorkerPool:
    """A fixed-size pool of identical workers, borrowed one request at a time."""

    def __init__(self, cmd: str | Sequence[str], size: int = 1,
                 timeout: float = DEFAULT_TIMEOUT):
        if size < 1:
            raise BackendError(f"pool size must be >= 1, got {size}")
        self.cmd = parse_command(cmd)
        self.size = size
        self.timeout = timeout
        self._idle: queue.LifoQueue[WorkerProcess] = queue.LifoQueue()
        self._spawned = 0
        self._lock = threading.Lock()
        self._meta: dict | None = None
        self._closed = False

    def _spawn(self) -> WorkerProcess:
        worker = WorkerProcess(self.cmd, timeout=self.timeout)
        with self._lock:
            if self._meta is None:
                self._meta = worker.hello
        return worker

    def meta(self) -> dict:
        """Handshake metadata, spawning the first worker if needed."""
        with self._lock:
            if self._meta is not None:
                return self._meta
        worker = self._acquire()
        self._release(worker)
        assert self._meta is not None
        return self._meta

    def _acquire(self) -> WorkerProcess:
        if self._closed:
            raise BackendError("worker pool is closed")
        try:
            return self._idle.get_nowait()
        except queue.Empty:
            pass
        with self._lock:
            can_spawn = self._spawned < self.size
            if can_spawn:
                self._spawned += 1
        if can_spawn:
            try:
                return self._spawn()
            except Exception:
                with self._lock:
                    self._spawned -= 1
                raise
        return self._idle.get()

    def _release(self, worker: WorkerProcess, broken: bool = False) -> None:
        if broken or self._closed:
            worker.close()
            with self._lock:
                self._spawned -= 1
        else:
            self._idle.put(worker)

    @contextmanager
    def borrow(self):
        worker = self._acquire()
        try:
            yield worker
        except (BackendError, ProtocolError):
            # A failed worker may be mid-stream; never reuse it.
            self._release(worker, broken=True)
            raise
        else:
            self._release(worker)

    def close(self) -> None:
        self._closed = True
        while True:
            try:
                self._idle.get_nowait().close()
            except queue.Empty:
                break

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
