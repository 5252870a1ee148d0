"""Bed-sensor stream simulator and a crash-safe recording client.

The wire protocol is one NDJSON sample per line over plain TCP, 1 Hz by
default. Scripted dropout windows reproduce the two field failure modes:
silent windows (the sensor sends nothing but the link stays up) and
disconnect windows (the link drops and the client must reconnect). The
server's clock keeps running through a dropout, and outside dropouts it
advances only on a successful send, so whatever the script says is lost is
exactly what the recorder's gap log ends up showing.

The recorder splits network and disk work across two threads joined by a
bounded queue; each line is appended with a single unbuffered write so a
kill at any moment leaves only complete lines behind.
"""

from __future__ import annotations

import json
import os
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .core import NightRecord, compute_gaps
from .errors import InitialConnectFailure
from .ingest import sample_line

QUEUE_CAPACITY = 1024
SILENCE = "silence"
DISCONNECT = "disconnect"


@dataclass(frozen=True)
class DropoutWindow:
    """Seconds [start_t, start_t + length) that never reach the recorder."""

    start_t: int
    length: int
    mode: str = SILENCE

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"dropout length must be positive, got {self.length}")
        if self.start_t < 0:
            raise ValueError(f"dropout start must be non-negative, got {self.start_t}")
        if self.mode not in (SILENCE, DISCONNECT):
            raise ValueError(f"unknown dropout mode {self.mode!r}")

    @property
    def end_t(self) -> int:
        return self.start_t + self.length

    def covers(self, t: int) -> bool:
        return self.start_t <= t < self.end_t


def _coerce_window(w) -> DropoutWindow:
    if isinstance(w, DropoutWindow):
        return w
    return DropoutWindow(*w)


@dataclass(frozen=True)
class StreamScript:
    """What the simulated sensor will send, and when it will fail."""

    source: NightRecord
    dropout_windows: tuple[DropoutWindow, ...] = ()
    tick_interval: float = 1.0

    def __post_init__(self):
        windows = tuple(sorted(
            (_coerce_window(w) for w in self.dropout_windows),
            key=lambda w: w.start_t,
        ))
        object.__setattr__(self, "dropout_windows", windows)
        if self.tick_interval < 0:
            raise ValueError("tick_interval must be >= 0")
        last_t = self.source.last_t
        for a, b in zip(windows, windows[1:]):
            if b.start_t < a.end_t:
                raise ValueError(f"dropout windows overlap at t={b.start_t}")
        for w in windows:
            if w.end_t - 1 > last_t:
                raise ValueError(f"dropout window {w} extends past t={last_t}")

    def window_at(self, t: int) -> Optional[DropoutWindow]:
        for w in self.dropout_windows:
            if w.covers(t):
                return w
            if w.start_t > t:
                break
        return None

    def expected_timestamps(self) -> tuple[int, ...]:
        """The t values a recorder should end up with."""
        return tuple(s.t for s in self.source.samples if self.window_at(s.t) is None)


Endpoint = Union[str, tuple]


def _split_endpoint(endpoint: Endpoint) -> tuple[str, int]:
    if isinstance(endpoint, str):
        host, _, port = endpoint.rpartition(":")
        return host or "127.0.0.1", int(port)
    host, port = endpoint
    return host, int(port)


class DeviceServer:
    """Streams a script to one client at a time; extra connects are closed.

    The serving loop owns the script cursor. It blocks while no client is
    attached (except inside dropout windows, where time passes regardless),
    resends nothing, skips nothing it was not told to skip, and closes the
    listener when the script is exhausted.
    """

    def __init__(self, script: StreamScript, host: str = "127.0.0.1", port: int = 0):
        self.script = script
        self._listener = socket.create_server((host, port))
        # polling accept: a plain close() does not wake a blocked accept()
        self._listener.settimeout(0.1)
        self.address = self._listener.getsockname()[:2]
        self._pending: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self.finished = threading.Event()
        self._sent: list[int] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._serve_thread = threading.Thread(target=self._serve_loop, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"{self.address[0]}:{self.address[1]}"

    @property
    def sent_timestamps(self) -> list[int]:
        return list(self._sent)

    def start(self) -> "DeviceServer":
        self._accept_thread.start()
        self._serve_thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._close_listener()
        self._serve_thread.join(timeout=10)

    def wait(self, timeout: Optional[float] = None) -> bool:
        return self.finished.wait(timeout)

    def __enter__(self) -> "DeviceServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _close_listener(self):
        try:
            self._listener.close()
        except OSError:
            pass

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            self._pending.put(conn)

    def _tick(self):
        if self.script.tick_interval > 0:
            time.sleep(self.script.tick_interval)

    def _close_extras(self, active):
        # one client at a time: whoever queued behind the active one is cut
        while True:
            try:
                extra = self._pending.get_nowait()
            except queue.Empty:
                return
            if extra is not active:
                try:
                    extra.close()
                except OSError:
                    pass

    def _next_client(self) -> Optional[socket.socket]:
        while not self._stop.is_set():
            try:
                return self._pending.get(timeout=0.05)
            except queue.Empty:
                continue
        return None

    def _serve_loop(self):
        conn: Optional[socket.socket] = None
        try:
            for sample in self.script.source.samples:
                if self._stop.is_set():
                    return
                window = self.script.window_at(sample.t)
                if window is not None:
                    if window.mode == DISCONNECT and conn is not None:
                        conn.close()
                        conn = None
                    self._tick()
                    continue
                payload = (sample_line(sample) + "\n").encode("ascii")
                while not self._stop.is_set():
                    if conn is None:
                        conn = self._next_client()
                        if conn is None:
                            return
                    self._close_extras(conn)
                    try:
                        conn.sendall(payload)
                        self._sent.append(sample.t)
                        break
                    except OSError:
                        try:
                            conn.close()
                        except OSError:
                            pass
                        conn = None
                self._tick()
        finally:
            if conn is not None:
                try:
                    conn.close()
                except OSError:
                    pass
            # Shut the acceptor down first, then close whatever it queued:
            # a reconnect that raced the end of the script would otherwise
            # stay established and leave the client blocked on read forever.
            self._stop.set()
            self._close_listener()
            self._accept_thread.join(timeout=5)
            self._close_extras(None)
            self.finished.set()


def serve_stream(script: StreamScript, endpoint: Endpoint = ("127.0.0.1", 0)) -> DeviceServer:
    """Bind and start a server; raises OSError if the endpoint is not bindable."""
    host, port = _split_endpoint(endpoint)
    return DeviceServer(script, host, port).start()


@dataclass(frozen=True)
class RetryPolicy:
    """Reconnect cadence after a drop; the deadline bounds each outage."""

    retry_interval: float = 1.0
    deadline: float = 30.0

    def __post_init__(self):
        if self.retry_interval <= 0 or self.deadline <= 0:
            raise ValueError("retry policy values must be positive")


@dataclass(frozen=True)
class RecordingResult:
    path: str
    sidecar_path: str
    n_samples: int
    gaps: tuple[tuple[int, int], ...]
    timestamps: tuple[int, ...] = field(repr=False)


class _DiskWriter(threading.Thread):
    """Pops line bytes off the queue; one unbuffered write per line."""

    def __init__(self, path: str, lines: queue.Queue):
        super().__init__(daemon=True)
        self._path = path
        self._lines = lines
        self.error: Optional[BaseException] = None

    def run(self):
        try:
            with open(self._path, "wb", buffering=0) as fh:
                while True:
                    item = self._lines.get()
                    if item is None:
                        fh.flush()
                        os.fsync(fh.fileno())
                        return
                    fh.write(item)
        except BaseException as exc:
            self.error = exc


def _try_connect(host: str, port: int, timeout: float) -> Optional[socket.socket]:
    try:
        return socket.create_connection((host, port), timeout=timeout)
    except OSError:
        return None


def record_stream(
    endpoint: Endpoint,
    output_path,
    policy: RetryPolicy = RetryPolicy(),
) -> RecordingResult:
    """Record a device stream to an NDJSON file plus a gap-log sidecar.

    Lines are durable before this returns. A drop triggers reconnects every
    policy.retry_interval seconds; when an outage outlasts policy.deadline
    the recording ends (normally if anything was ever received, with
    InitialConnectFailure if the first connection never happened). The end
    of the script looks like a final outage, so every run ends that way.
    """
    host, port = _split_endpoint(endpoint)
    path = str(output_path)
    lines: queue.Queue = queue.Queue(maxsize=QUEUE_CAPACITY)
    writer = _DiskWriter(path, lines)
    writer.start()
    timestamps: list[int] = []
    connected_once = False
    try:
        while True:
            outage_start = time.monotonic()
            sock = None
            while sock is None:
                sock = _try_connect(host, port, timeout=max(policy.retry_interval, 0.05))
                if sock is not None:
                    break
                if time.monotonic() - outage_start >= policy.deadline:
                    break
                time.sleep(policy.retry_interval)
            if sock is None:
                if not connected_once:
                    raise InitialConnectFailure(f"{host}:{port}", policy.deadline)
                break
            connected_once = True
            sock.settimeout(None)
            try:
                with sock, sock.makefile("rb") as stream:
                    for raw in stream:
                        if not raw.endswith(b"\n"):
                            break  # partial tail of a mid-line drop: not received
                        lines.put(raw)
                        timestamps.append(int(json.loads(raw)["t"]))
            except OSError:
                pass  # a reset is just a less polite disconnect
            # server closed or died; loop back into connect-retry
    finally:
        lines.put(None)
        writer.join()
    if writer.error is not None:
        raise writer.error

    gaps = tuple(compute_gaps(timestamps))
    sidecar = path + ".gaps.json"
    doc = {
        "n_samples": len(timestamps),
        "first_t": timestamps[0] if timestamps else None,
        "last_t": timestamps[-1] if timestamps else None,
        "gaps": [[start, length] for start, length in gaps],
    }
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return RecordingResult(
        path=path,
        sidecar_path=sidecar,
        n_samples=len(timestamps),
        gaps=gaps,
        timestamps=tuple(timestamps),
    )
