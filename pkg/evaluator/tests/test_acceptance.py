"""Acceptance: protocol conformance and toy-training sanity.

Run with ``pytest tests/test_acceptance.py -v -s``.  The training-sanity
test performs three real (if short) CNN training runs and takes a couple of
minutes on one CPU core.
"""

import dataclasses
import io
import json
import time

from toyeval.descriptor import parse_descriptor
from toyeval.server import serve
from toyeval.train import ToyTrainConfig, train_and_score

from test_descriptor import fig1_payload
from test_server import TINY, request_line


def ok(message: str) -> None:
    print(f"[PASS] {message}")


def test_protocol_conformance():
    bad_payload = fig1_payload()
    bad_payload["blocks"][0]["type"] = "bogus"
    lines = [
        request_line("r0"),
        request_line("r1", bad_payload),
        request_line("r2"),
        request_line("r0"),  # repeated id: stateless, answered again
    ]
    stdout = io.StringIO()
    serve(TINY, stdin=iter(line + "\n" for line in lines), stdout=stdout)
    responses = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert [r["id"] for r in responses] == ["r0", "r1", "r2", "r0"]
    assert all(("fitness" in r) != ("error" in r) for r in responses)
    assert "error" in responses[1]
    assert all(0.0 <= r["fitness"] <= 1.0 for r in responses if "fitness" in r)
    ok("protocol: every request answered once with a matching id; malformed"
       " descriptor answered with an error and the loop kept serving")


def test_toy_training_beats_chance():
    descriptor = parse_descriptor(fig1_payload())
    started = time.monotonic()
    accuracies = []
    for seed in (0, 1, 2):
        config = dataclasses.replace(ToyTrainConfig(), seed=seed)
        accuracies.append(train_and_score(descriptor, config))
    elapsed = time.monotonic() - started
    mean_accuracy = sum(accuracies) / len(accuracies)
    assert mean_accuracy > 0.20, f"mean accuracy {mean_accuracy:.3f}"
    assert elapsed < 300.0, f"three runs took {elapsed:.0f}s"
    ok(
        "toy training: reference descriptor reached mean validation accuracy"
        f" {mean_accuracy:.3f} over 3 seeds in {elapsed:.0f}s (chance 0.10)"
    )
