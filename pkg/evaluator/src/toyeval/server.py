"""JSON-lines evaluation server over stdin/stdout.

Request lines carry ``{"id", "sexpr", "descriptor"}``; each produces exactly
one response line: ``{"id", "fitness"}`` on success or ``{"id", "error"}``
when the descriptor is malformed or training fails.  A crash while handling
one request never takes the process down.  Lines whose id cannot even be
recovered are logged to stderr and skipped (the client treats the missing
response as that item's failure).
"""

from __future__ import annotations

import json
import logging
import sys
from typing import IO

from .descriptor import DescriptorError, parse_descriptor
from .train import ToyTrainConfig, train_and_score

logger = logging.getLogger(__name__)


def handle_request(line: str, config: ToyTrainConfig) -> str | None:
    """One response line for one request line, or None when unanswerable."""
    try:
        payload = json.loads(line)
        request_id = payload["id"]
    except (json.JSONDecodeError, TypeError, KeyError):
        logger.error("request without a recoverable id skipped: %.120s", line)
        return None
    try:
        descriptor = parse_descriptor(payload["descriptor"])
        fitness = train_and_score(descriptor, config)
        return json.dumps({"id": request_id, "fitness": fitness})
    except (DescriptorError, KeyError, TypeError, ValueError) as exc:
        return json.dumps({"id": request_id, "error": str(exc)})
    except Exception as exc:  # keep serving whatever a single item does
        logger.exception("training crashed for request %s", request_id)
        return json.dumps({"id": request_id, "error": f"internal error: {exc}"})


def serve(
    config: ToyTrainConfig,
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
) -> None:
    """Answer requests until the input stream closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = handle_request(line, config)
        if response is not None:
            stdout.write(response + "\n")
            stdout.flush()
