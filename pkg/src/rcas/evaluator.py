"""Client for external evaluators speaking newline-delimited JSON over stdio.

    -> {"cmd":"hello","version":1}
    <- {"cmd":"hello","version":1,"name":"..."}
    -> {"id":1,"cmd":"eval","assignment":[{"position":0,"type":3}],"fidelity":0.1}
    <- {"id":1,"accuracy":0.5831}     or     {"id":1,"error":"..."}
    -> {"cmd":"shutdown"}

One request is outstanding at a time; callers from several threads queue on a lock.
"""
from __future__ import annotations

import json
import logging
import queue
import subprocess
import threading
from typing import Sequence

from .errors import EvaluatorFailure, EvaluatorTimeout, HandshakeFailure, ProtocolError
from .objective import Objective

PROTOCOL_VERSION = 1

log = logging.getLogger(__name__)


class ExternalObjective(Objective):
    source = "external"
    concurrency_safe = False

    def __init__(self, cmd: Sequence[str], timeout: float = 60.0, **kw):
        super().__init__(**kw)
        self.cmd = list(cmd)
        self.timeout = timeout
        self.name: str | None = None
        self.dead = False
        self._next_id = 1
        self._session_lock = threading.Lock()
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._proc: subprocess.Popen | None = None

    def start(self) -> ExternalObjective:
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            self.dead = True
            raise HandshakeFailure(f"cannot spawn evaluator {self.cmd}: {exc}") from exc
        threading.Thread(target=self._pump, daemon=True).start()
        try:
            self._send({"cmd": "hello", "version": PROTOCOL_VERSION})
            line = self._recv()
        except EvaluatorFailure as exc:
            self._kill()
            raise HandshakeFailure(f"handshake failed: {exc}", exc.payload) from exc
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            self._kill()
            raise HandshakeFailure(f"handshake reply is not JSON: {line!r}", line) from None
        if not isinstance(reply, dict) or reply.get("cmd") != "hello":
            self._kill()
            raise HandshakeFailure(f"unexpected handshake reply: {line!r}", line)
        if reply.get("version") != PROTOCOL_VERSION:
            self._kill()
            raise HandshakeFailure(
                f"evaluator speaks version {reply.get('version')!r}, expected {PROTOCOL_VERSION}", line
            )
        if not isinstance(reply.get("name"), str):
            self._kill()
            raise HandshakeFailure("handshake reply lacks an evaluator name", line)
        self.name = reply["name"]
        log.info("connected to evaluator %s", self.name)
        return self

    def _pump(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, obj: dict) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            self.dead = True
            raise EvaluatorFailure(f"evaluator pipe closed: {exc}") from exc

    def _recv(self) -> str:
        while True:
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                self._kill()
                raise EvaluatorTimeout(f"no reply from evaluator within {self.timeout}s") from None
            if line is None:
                self.dead = True
                code = self._proc.poll() if self._proc else None
                raise EvaluatorFailure(f"evaluator exited (code {code})")
            if line.strip():
                return line.rstrip("\n")

    def _kill(self) -> None:
        self.dead = True
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def _score(self, a, fid):
        with self._session_lock:
            if self.dead or self._proc is None:
                raise EvaluatorFailure("evaluator session is not running")
            req_id = self._next_id
            self._next_id += 1
            self._send(
                {
                    "id": req_id,
                    "cmd": "eval",
                    "assignment": a.to_json()["filled"],
                    "fidelity": fid.level,
                }
            )
            line = self._recv()
            try:
                reply = json.loads(line)
            except json.JSONDecodeError:
                self._kill()
                raise ProtocolError(f"malformed reply line: {line!r}", line) from None
            if not isinstance(reply, dict):
                self._kill()
                raise ProtocolError(f"reply is not an object: {line!r}", line)
            if reply.get("id") != req_id:
                self._kill()
                raise ProtocolError(f"reply id {reply.get('id')!r} != request id {req_id}", line)
            if "error" in reply:
                raise EvaluatorFailure(f"evaluator error: {reply['error']}", reply)
            if "accuracy" not in reply:
                self._kill()
                raise ProtocolError(f"reply has neither accuracy nor error: {line!r}", line)
            return reply["accuracy"]

    def close(self) -> None:
        with self._session_lock:
            if self._proc is None:
                return
            if not self.dead and self._proc.poll() is None:
                try:
                    self._send({"cmd": "shutdown"})
                    self._proc.stdin.close()
                    self._proc.wait(timeout=self.timeout)
                except (EvaluatorFailure, subprocess.TimeoutExpired, OSError):
                    pass
            self._kill()

    def __enter__(self) -> ExternalObjective:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_eval_session(cmd: Sequence[str], timeout: float = 60.0, **kw) -> ExternalObjective:
    """Spawn ``cmd`` and complete the handshake; returns a ready objective."""
    return ExternalObjective(cmd, timeout, **kw).start()
