"""Wire protocol for out-of-process classifier models.

Requests and replies are newline-delimited JSON over either a spawned
subprocess's stdin/stdout or a local TCP socket:

    request: {"id": str, "sample_rate": int, "samples": [float, ...]}
    reply:   {"id": str, "probs": {"SB": f, "MB": f, "CRS": f, "HS": f}}

Replies may arrive in any order; they are matched by id. A reply whose
probabilities do not cover the label set or do not sum to 1 (within 1e-6)
is a malformed-reply error. Requests on one handle are serialized; open
several handles for parallelism.

Run ``python -m bowelsound.adapters --mode uniform`` for a reference
adapter process (see ``main`` below); it answers with uniform, constant,
or rule-derived probabilities and is handy for integration tests.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import uuid
from typing import Optional

import numpy as np

from .audio import AudioClip
from .classify import ClassifyError, ClassProbabilities


class AdapterError(ClassifyError):
    """Base for adapter protocol failures."""


class TransportError(AdapterError):
    """The adapter process or socket went away."""


class MalformedReplyError(AdapterError):
    """The adapter answered with an invalid payload."""


class AdapterTimeout(AdapterError):
    """No reply within the configured deadline."""


class ExternalAdapter:
    """Client handle for one adapter process or socket connection."""

    def __init__(self, reader, writer, timeout_s: float = 10.0, closer=None):
        self._reader = reader
        self._writer = writer
        self._closer = closer
        self.timeout_s = timeout_s
        self._lock = threading.Lock()
        self._cond = threading.Condition()
        self._replies: dict[str, dict] = {}
        self._dead: Optional[str] = None
        self._thread = threading.Thread(target=self._read_loop, daemon=True)
        self._thread.start()

    # -- constructors -------------------------------------------------------

    @classmethod
    def spawn(cls, command: list[str], timeout_s: float = 10.0) -> "ExternalAdapter":
        """Start an adapter subprocess speaking the protocol on stdio."""
        try:
            proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start adapter {command!r}: {exc}") from None

        def close():
            try:
                proc.terminate()
                proc.wait(timeout=3)
            except Exception:
                proc.kill()

        return cls(proc.stdout, proc.stdin, timeout_s=timeout_s, closer=close)

    @classmethod
    def connect(cls, address: str, timeout_s: float = 10.0) -> "ExternalAdapter":
        """Connect to host:port where an adapter is listening."""
        host, _, port = address.rpartition(":")
        try:
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout_s)
        except (OSError, ValueError) as exc:
            raise TransportError(f"cannot connect to adapter at {address}: {exc}") from None
        reader = sock.makefile("r", encoding="utf-8")
        writer = sock.makefile("w", encoding="utf-8")

        def close():
            try:
                sock.close()
            except OSError:
                pass

        return cls(reader, writer, timeout_s=timeout_s, closer=close)

    # -- protocol -----------------------------------------------------------

    def _read_loop(self) -> None:
        try:
            for line in self._reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                    reply_id = str(doc["id"])
                except (json.JSONDecodeError, KeyError, TypeError):
                    doc, reply_id = {"malformed": line}, "?"
                with self._cond:
                    if reply_id == "?":
                        self._dead = f"unparseable reply line: {line[:120]!r}"
                    else:
                        self._replies[reply_id] = doc
                    self._cond.notify_all()
        except (OSError, ValueError):
            pass
        with self._cond:
            if self._dead is None:
                self._dead = "adapter stream closed"
            self._cond.notify_all()

    def classify(self, clip: AudioClip) -> ClassProbabilities:
        """Send one clip, wait for its reply, validate, and return probabilities."""
        request_id = uuid.uuid4().hex
        payload = json.dumps(
            {
                "id": request_id,
                "sample_rate": clip.sample_rate,
                "samples": [float(x) for x in clip.samples],
            }
        )
        with self._lock:
            try:
                self._writer.write(payload + "\n")
                self._writer.flush()
            except (OSError, ValueError, BrokenPipeError) as exc:
                raise TransportError(f"adapter write failed: {exc}") from None

        with self._cond:
            ok = self._cond.wait_for(
                lambda: request_id in self._replies or self._dead is not None,
                timeout=self.timeout_s,
            )
            if request_id in self._replies:
                doc = self._replies.pop(request_id)
            elif self._dead is not None:
                raise TransportError(self._dead)
            elif not ok:
                raise AdapterTimeout(
                    f"no reply for request {request_id} within {self.timeout_s}s"
                )
            else:  # pragma: no cover - wait_for returned without either condition
                raise TransportError("adapter wait interrupted")

        probs = doc.get("probs")
        if not isinstance(probs, dict):
            raise MalformedReplyError(f"reply without probs object: {doc!r}")
        try:
            return ClassProbabilities.from_scores(probs)
        except Exception as exc:
            raise MalformedReplyError(f"invalid probabilities: {exc}") from None

    def close(self) -> None:
        if self._closer is not None:
            self._closer()

    def __enter__(self) -> "ExternalAdapter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# ---------------------------------------------------------------------------
# reference adapter process

def _answer(doc: dict, mode: str) -> dict:
    if mode == "uniform":
        probs = {"SB": 0.25, "MB": 0.25, "CRS": 0.25, "HS": 0.25}
    elif mode == "bad-sum":
        probs = {"SB": 0.2, "MB": 0.2, "CRS": 0.2, "HS": 0.2}
    elif mode == "rule":
        from .classify import rule_classify
        from .detect import EventInterval

        clip = AudioClip(np.asarray(doc["samples"], dtype=np.float64), int(doc["sample_rate"]))
        interval = EventInterval(0.0, clip.duration_s, 0.0, max(1, len(clip) // 8))
        result = rule_classify(clip, interval)
        probs = {label.value: p for label, p in result.probs.items()}
    else:
        raise ValueError(f"unknown adapter mode {mode}")
    return {"id": doc.get("id"), "probs": probs}


def serve_stdio(mode: str) -> None:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        sys.stdout.write(json.dumps(_answer(doc, mode)) + "\n")
        sys.stdout.flush()


def serve_tcp(mode: str, port: int) -> None:
    server = socket.create_server(("127.0.0.1", port))
    sys.stderr.write(f"adapter listening on 127.0.0.1:{port}\n")
    sys.stderr.flush()
    while True:
        conn, _ = server.accept()
        reader = conn.makefile("r", encoding="utf-8")
        writer = conn.makefile("w", encoding="utf-8")
        for line in reader:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            writer.write(json.dumps(_answer(doc, mode)) + "\n")
            writer.flush()
        conn.close()


def main(argv: Optional[list[str]] = None) -> None:
    import argparse

    parser = argparse.ArgumentParser(description="reference classification adapter")
    parser.add_argument("--mode", choices=["uniform", "rule", "bad-sum"], default="uniform")
    parser.add_argument("--tcp", type=int, default=None, metavar="PORT")
    args = parser.parse_args(argv)
    if args.tcp is not None:
        serve_tcp(args.mode, args.tcp)
    else:
        serve_stdio(args.mode)


if __name__ == "__main__":
    main()
