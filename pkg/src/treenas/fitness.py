"""Fitness evaluation: deterministic surrogate, external client, cache.

An evaluator maps a batch of (id, genome, descriptor) requests to fitness
values in [0, 1].  The in-process surrogate scores descriptors without any
training so whole searches run in seconds; the external client drives real
evaluator processes over a line-delimited JSON protocol:

    request:  {"id": "...", "sexpr": "...", "descriptor": {...}}
    response: {"id": "...", "fitness": 0.42}   or   {"id": "...", "error": "..."}

One JSON document per line, responses in any order, ids unique per run.
The cache persists one ``<fitness><TAB><canonical s-expression>`` line per
evaluated genome and guarantees a key is never re-bound to a new value.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import queue
import random
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .arch import (
    ArchDescriptor,
    BlockLibrary,
    CompileError,
    block_ratios,
    compile_tree,
    param_count,
)
from .genome import GenomeError, GenomeTree, Individual

logger = logging.getLogger(__name__)


class EvaluatorError(RuntimeError):
    """Run-level evaluator failure (unreachable process, protocol desync)."""


def short_key_hash(key: str) -> str:
    """Stable 16-hex-digit digest of a canonical s-expression."""
    return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalRequest:
    request_id: str
    tree: GenomeTree
    descriptor: ArchDescriptor


@dataclass(frozen=True)
class EvalResult:
    request_id: str
    fitness: float | None
    error: str | None = None


class Evaluator(Protocol):
    def evaluate(self, batch: Sequence[EvalRequest]) -> list[EvalResult]: ...


# -- surrogate -----------------------------------------------------------------


@dataclass(frozen=True)
class SurrogateParams:
    """Shape of the training-free fitness stand-in.

    The surrogate peaks at a target parameter budget, pays a small bonus
    for the favored block types and for up to three down-sampling stages,
    and can add seeded per-genome Gaussian noise (off by default).
    """

    target_params: int = 5_000_000
    width_decades: float = 0.5
    affinity: Mapping[str, float] = field(
        default_factory=lambda: {"b2": 0.05, "b3": 0.05}
    )
    stride_bonus_cap: int = 3
    noise_amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.target_params < 1:
            raise ValueError("target_params must be >= 1")
        if self.width_decades <= 0:
            raise ValueError("width_decades must be > 0")
        if self.stride_bonus_cap < 1:
            raise ValueError("stride_bonus_cap must be >= 1")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")


def surrogate_fitness(
    descriptor: ArchDescriptor,
    tree: GenomeTree,
    params: SurrogateParams,
    library: BlockLibrary,
) -> float:
    """Deterministic score in [0, 1] for a compiled genome.

    0.30 baseline, plus 0.50 at the parameter target falling off as a
    Gaussian in log10-parameter distance, plus the block-affinity bonuses
    (each weight paid in full at a 50% block share), plus up to 0.05 for
    down-sampling stages, plus optional seeded noise; the sum is clamped.
    """
    total_params = param_count(descriptor, library)
    distance = math.log10(total_params / params.target_params) / params.width_decades
    value = 0.30 + 0.50 * math.exp(-(distance * distance))
    ratios = block_ratios(tree)
    for block_id, weight in params.affinity.items():
        value += weight * ratios.get(block_id, 0.0) / 0.5
    strides = tree.stride_count()
    value += 0.05 * min(strides, params.stride_bonus_cap) / params.stride_bonus_cap
    if params.noise_amplitude > 0:
        digest = hashlib.sha256(str(tree).encode()).digest()
        noise_rng = random.Random(int.from_bytes(digest, "big"))
        value += noise_rng.gauss(0.0, params.noise_amplitude)
    return min(1.0, max(0.0, value))


class SurrogateEvaluator:
    """In-process evaluator that scores descriptors without training."""

    def __init__(self, params: SurrogateParams, library: BlockLibrary) -> None:
        self.params = params
        self.library = library

    def evaluate(self, batch: Sequence[EvalRequest]) -> list[EvalResult]:
        return [
            EvalResult(
                request.request_id,
                surrogate_fitness(
                    request.descriptor, request.tree, self.params, self.library
                ),
            )
            for request in batch
        ]


# -- cache ---------------------------------------------------------------------


class FitnessCache:
    """Fitness by canonical s-expression, optionally persisted.

    The backing file holds one ``<fitness><TAB><sexpr>`` line per entry, in
    insertion (= evaluation) order.  A key's value never changes once
    written; re-putting a different value is an error.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self._values: dict[str, float] = {}
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            with self._path.open(encoding="utf-8") as handle:
                for line_number, line in enumerate(handle, start=1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    try:
                        fitness_text, key = line.split("\t", 1)
                        self._values[key] = float(fitness_text)
                    except ValueError as exc:
                        raise ValueError(
                            f"{self._path}:{line_number}: bad cache line"
                        ) from exc

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def get(self, key: str) -> float | None:
        with self._lock:
            return self._values.get(key)

    def put(self, key: str, fitness: float) -> None:
        with self._lock:
            existing = self._values.get(key)
            if existing is not None:
                if existing != fitness:
                    raise ValueError(
                        f"cache key already bound to {existing!r}; refusing {fitness!r}"
                    )
                return
            self._values[key] = fitness
            if self._path is not None:
                with self._path.open("a", encoding="utf-8", newline="\n") as handle:
                    handle.write(f"{fitness!r}\t{key}\n")

    def items_in_order(self) -> list[tuple[str, float]]:
        with self._lock:
            return list(self._values.items())


# -- population evaluation ------------------------------------------------------


def evaluate_population(
    population: Sequence[Individual],
    evaluator: Evaluator,
    cache: FitnessCache,
    library: BlockLibrary,
    input_shape: tuple[int, int, int] = (32, 32, 3),
    num_classes: int = 10,
    global_avg_pool: bool = True,
    shortcut: str = "projection",
) -> list[Individual]:
    """Fill in fitness for every individual, going through the cache.

    Cache hits never reach the evaluator; duplicates within the batch are
    dispatched once; failures (compile errors, evaluator errors, out-of-range
    responses) score 0 with a logged reason rather than aborting the run.
    """
    requests: dict[str, str] = {}  # canonical key -> request id
    batch: list[EvalRequest] = []
    for individual in population:
        if individual.fitness is not None:
            continue
        key = individual.canonical_key
        if key in cache or key in requests:
            continue
        try:
            descriptor = compile_tree(
                individual.genome,
                library,
                input_shape,
                num_classes,
                global_avg_pool,
                shortcut,
            )
        except (CompileError, GenomeError) as exc:
            logger.warning("genome %s failed to compile: %s", short_key_hash(key), exc)
            cache.put(key, 0.0)
            continue
        request_id = short_key_hash(key)
        requests[key] = request_id
        batch.append(EvalRequest(request_id, individual.genome, descriptor))

    if batch:
        results = {result.request_id: result for result in evaluator.evaluate(batch)}
        for key, request_id in requests.items():
            result = results.get(request_id)
            if result is None:
                logger.warning("no response for request %s; scoring 0", request_id)
                cache.put(key, 0.0)
            elif result.fitness is None:
                logger.warning(
                    "evaluation failed for request %s: %s; scoring 0",
                    request_id,
                    result.error,
                )
                cache.put(key, 0.0)
            elif not 0.0 <= result.fitness <= 1.0:
                logger.warning(
                    "fitness %r for request %s outside [0, 1]; scoring 0",
                    result.fitness,
                    request_id,
                )
                cache.put(key, 0.0)
            else:
                cache.put(key, result.fitness)

    return [
        individual
        if individual.fitness is not None
        else individual.with_fitness(cache.get(individual.canonical_key))
        for individual in population
    ]


# -- external evaluator client ----------------------------------------------------


_EOF = object()


class _WorkerDied(Exception):
    pass


class ExternalEvaluator:
    """Client for evaluator processes speaking the line-delimited protocol.

    ``max_in_flight`` worker processes are spawned per batch, each handling
    its share of items sequentially.  A per-item timeout fails just that
    item; a worker that dies is respawned once, and a second death raises
    :class:`EvaluatorError`.
    """

    def __init__(
        self, command: str, timeout: float = 60.0, max_in_flight: int = 1
    ) -> None:
        if not command.strip():
            raise ValueError("evaluator command must not be empty")
        self._argv = shlex.split(command)
        self._timeout = timeout
        self._max_in_flight = max(1, max_in_flight)

    def evaluate(self, batch: Sequence[EvalRequest]) -> list[EvalResult]:
        if not batch:
            return []
        workers = min(self._max_in_flight, len(batch))
        shards = [list(batch[i::workers]) for i in range(workers)]
        results: dict[str, EvalResult] = {}
        failures: list[str] = []
        lock = threading.Lock()
        threads = [
            threading.Thread(
                target=self._serve_shard, args=(shard, results, failures, lock)
            )
            for shard in shards
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        if failures:
            raise EvaluatorError(failures[0])
        return [results[request.request_id] for request in batch]

    # -- worker management --

    def _spawn(self) -> tuple[subprocess.Popen, "queue.Queue"]:
        try:
            process = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluatorError(f"cannot launch evaluator {self._argv!r}: {exc}")
        lines: queue.Queue = queue.Queue()

        def pump() -> None:
            assert process.stdout is not None
            for line in process.stdout:
                lines.put(line)
            lines.put(_EOF)

        threading.Thread(target=pump, daemon=True).start()
        return process, lines

    @staticmethod
    def _shutdown(process: subprocess.Popen) -> None:
        try:
            if process.stdin is not None:
                process.stdin.close()
            process.terminate()
            process.wait(timeout=5)
        except Exception:
            process.kill()

    def _serve_shard(
        self,
        items: list[EvalRequest],
        results: dict[str, EvalResult],
        failures: list[str],
        lock: threading.Lock,
    ) -> None:
        try:
            process, lines = self._spawn()
        except EvaluatorError as exc:
            with lock:
                failures.append(str(exc))
            return
        respawned = False
        resolved: set[str] = set()
        try:
            index = 0
            while index < len(items):
                item = items[index]
                try:
                    self._serve_item(process, lines, item, results, resolved, lock)
                except _WorkerDied:
                    if respawned:
                        with lock:
                            failures.append(
                                "evaluator process died twice; giving up"
                            )
                        return
                    logger.warning("evaluator process died; respawning once")
                    respawned = True
                    self._shutdown(process)
                    try:
                        process, lines = self._spawn()
                    except EvaluatorError as exc:
                        with lock:
                            failures.append(str(exc))
                        return
                    continue  # retry the same item on the fresh process
                index += 1
        finally:
            self._shutdown(process)

    def _serve_item(
        self,
        process: subprocess.Popen,
        lines: "queue.Queue",
        item: EvalRequest,
        results: dict[str, EvalResult],
        resolved: set[str],
        lock: threading.Lock,
    ) -> None:
        request = json.dumps(
            {
                "id": item.request_id,
                "sexpr": str(item.tree),
                "descriptor": item.descriptor.to_json_dict(),
            },
            separators=(",", ":"),
        )
        try:
            assert process.stdin is not None
            process.stdin.write(request + "\n")
            process.stdin.flush()
        except (BrokenPipeError, OSError):
            raise _WorkerDied
        deadline = time.monotonic() + self._timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                with lock:
                    results[item.request_id] = EvalResult(
                        item.request_id, None, "timeout"
                    )
                resolved.add(item.request_id)
                return
            try:
                line = lines.get(timeout=remaining)
            except queue.Empty:
                continue
            if line is _EOF:
                raise _WorkerDied
            response = self._parse_response(line)
            if response is None:
                continue
            response_id, fitness, error = response
            if response_id == item.request_id:
                with lock:
                    results[item.request_id] = EvalResult(
                        item.request_id, fitness, error
                    )
                resolved.add(item.request_id)
                return
            if response_id in resolved:
                logger.warning("late response for %s ignored", response_id)
            else:
                logger.warning("response id %r not in request set; ignored", response_id)

    @staticmethod
    def _parse_response(line: str) -> tuple[str, float | None, str | None] | None:
        line = line.strip()
        if not line:
            return None
        try:
            payload = json.loads(line)
            response_id = payload["id"]
        except (json.JSONDecodeError, TypeError, KeyError):
            logger.warning("unparseable evaluator response %r; ignored", line[:200])
            return None
        if "error" in payload:
            return str(response_id), None, str(payload["error"])
        fitness = payload.get("fitness")
        if not isinstance(fitness, (int, float)):
            return str(response_id), None, f"malformed response: {line[:200]}"
        return str(response_id), float(fitness), None


__all__ = [
    "EvalRequest",
    "EvalResult",
    "Evaluator",
    "EvaluatorError",
    "ExternalEvaluator",
    "FitnessCache",
    "SurrogateEvaluator",
    "SurrogateParams",
    "evaluate_population",
    "short_key_hash",
    "surrogate_fitness",
]
