"""Deterministic stand-in evaluator for the stdio protocol.

Run as ``python -m rcas.stub_evaluator [--mode MODE]``. The score of an
assignment is a hash of its canonical form and the fidelity, so repeated
requests return the same value. The non-default modes misbehave on purpose
and exist to exercise the client's error paths.
"""
import argparse
import hashlib
import json
import sys
import time

MODES = ("echo", "malformed", "slow", "badversion", "error", "outofrange", "die", "wrongid")


def stub_score(assignment: list, fidelity: float) -> float:
    key = ",".join(f"{r['position']}:{r['type']}" for r in sorted(assignment, key=lambda r: r["position"]))
    digest = hashlib.sha256(f"{key}|{fidelity!r}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def send(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", choices=MODES, default="echo")
    ap.add_argument("--delay", type=float, default=5.0)
    args = ap.parse_args(argv)

    last_id = 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        cmd = msg.get("cmd")
        if cmd == "hello":
            version = 2 if args.mode == "badversion" else 1
            send({"cmd": "hello", "version": version, "name": f"stub-{args.mode}"})
        elif cmd == "shutdown":
            return 0
        elif cmd == "eval":
            req_id = msg["id"]
            if req_id <= last_id:
                send({"id": req_id, "error": f"id {req_id} not increasing"})
                continue
            last_id = req_id
            if args.mode == "malformed":
                sys.stdout.write("this is not json\n")
                sys.stdout.flush()
            elif args.mode == "slow":
                time.sleep(args.delay)
                send({"id": req_id, "accuracy": 0.5})
            elif args.mode == "error":
                send({"id": req_id, "error": "training diverged"})
            elif args.mode == "outofrange":
                send({"id": req_id, "accuracy": 1.5})
            elif args.mode == "die":
                return 3
            elif args.mode == "wrongid":
                send({"id": req_id + 100, "accuracy": 0.5})
            else:
                send({"id": req_id, "accuracy": stub_score(msg["assignment"], msg["fidelity"]), "note": "ignored"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
