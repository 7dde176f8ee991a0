"""Misbehaving and well-behaved adapters for the external-model tests.

usage: toy_adapter.py MODE, MODE one of constant, bad-proba, hang, crash
"""
import json
import sys
import time

mode = sys.argv[1]
for line in sys.stdin:
    msg = json.loads(line)
    op = msg.get("op")
    if op == "bye":
        break
    if op == "hello":
        reply = {"ok": True}
    elif mode == "constant":
        n = len(msg["rows"])
        reply = {"labels": [1] * n, "probas": [0.9] * n}
    elif mode == "bad-proba":
        n = len(msg["rows"])
        probas = [0.5] * n
        probas[n - 1] = 1.7
        reply = {"labels": [1] * n, "probas": probas}
    elif mode == "hang":
        time.sleep(60)
        continue
    elif mode == "crash":
        sys.stderr.write("boom\n")
        sys.exit(3)
    else:
        reply = {"error": "unknown mode"}
    sys.stdout.write(json.dumps(reply) + "\n")
    sys.stdout.flush()
