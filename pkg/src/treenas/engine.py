"""Evolution engine: the generational loop, checkpoints and statistics.

One run executes: ramped-half-and-half initialization, evaluation of the
initial population, then for each generation paired tournament selection
(with the scheduled tournament size), size-difference crossover, mutation
with constant probability, evaluation of the children and an elitism
update.  After every generation the full population is checkpointed as one
``<fitness><TAB><s-expression>`` line per individual, so a run can be
resumed; per-generation random streams are re-derived from the master seed,
which makes a resumed run reproduce the uninterrupted one exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .arch import (
    ArchDescriptor,
    BlockLibrary,
    BlockSpec,
    block_composition,
    block_ratios,
    compile_tree,
    conv_layer_count,
    param_count,
)
from .fitness import (
    EvaluatorError,
    ExternalEvaluator,
    FitnessCache,
    SurrogateEvaluator,
    SurrogateParams,
    evaluate_population,
    short_key_hash,
)
from .genome import Individual
from .operators import (
    RngStream,
    ScheduleParams,
    crossover,
    elitism_update,
    mutate,
    ramped_half_and_half,
    tournament_select,
    tournament_size,
)
from .sexpr import ParseError, parse

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_KERNELS: Mapping[str, tuple[int, ...]] = {
    "b1": (3, 3),
    "b2": (3, 1, 3),
    "b3": (1, 3, 1),
    "b4": (3, 1),
}

_GENERATION_FILE = "gen_{:03d}.pop"
_GENERATION_RE = re.compile(r"^gen_(\d{3,})\.pop$")

#: The stride budget is part of the genome's feasibility rules and is not
#: tunable; the config field exists so files can state it explicitly.
FIXED_STRIDE_BUDGET = 5


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class CheckpointError(RuntimeError):
    """Missing or corrupt checkpoint data."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Every knob of a search run; defaults give the reference setup."""

    population_size: int = 20
    generations: int = 10
    mutation_rate: float = 0.20
    max_depth: int = 10
    mutation_subtree_depth: int = 4
    stride_budget: int = FIXED_STRIDE_BUDGET
    base_filters: int = 16
    block_library: Mapping[str, tuple[int, ...]] = field(
        default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_BLOCK_KERNELS.items()}
    )
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    evaluator: str = "surrogate"
    seed: int = 0
    run_dir: str | None = None
    normalization: str = "max"
    shortcut: str = "projection"
    input_shape: tuple[int, int, int] = (32, 32, 3)
    num_classes: int = 10
    global_avg_pool: bool = True
    evaluator_timeout: float = 60.0
    evaluator_in_flight: int = 1
    node_limit: int | None = None

    def validate(self) -> None:
        if self.population_size < 4 or self.population_size % 2:
            raise ConfigError("population_size must be even and >= 4")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if self.max_depth < 2:
            raise ConfigError("max_depth must be >= 2")
        if self.mutation_subtree_depth < 1:
            raise ConfigError("mutation_subtree_depth must be >= 1")
        if self.stride_budget != FIXED_STRIDE_BUDGET:
            raise ConfigError(f"stride_budget is fixed at {FIXED_STRIDE_BUDGET}")
        if self.base_filters < 1:
            raise ConfigError("base_filters must be >= 1")
        if not self.block_library:
            raise ConfigError("block_library cannot be empty")
        for block_id, kernels in self.block_library.items():
            if not kernels or any(k not in (1, 3) for k in kernels):
                raise ConfigError(
                    f"block {block_id!r}: kernels must be a non-empty list of 1s and 3s"
                )
        if self.evaluator != "surrogate" and not self.evaluator.startswith("external:"):
            raise ConfigError(
                "evaluator must be 'surrogate' or 'external:<command>'"
            )
        if self.normalization not in ("max", "minmax", "sum"):
            raise ConfigError("normalization must be one of max, minmax, sum")
        if self.shortcut not in ("projection", "pad"):
            raise ConfigError("shortcut must be 'projection' or 'pad'")
        if len(self.input_shape) != 3 or any(v < 1 for v in self.input_shape):
            raise ConfigError("input_shape must be three positive integers")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.evaluator_timeout <= 0:
            raise ConfigError("evaluator_timeout must be > 0")
        if self.evaluator_in_flight < 1:
            raise ConfigError("evaluator_in_flight must be >= 1")
        if self.node_limit is not None and self.node_limit < 3:
            raise ConfigError("node_limit must be >= 3 when set")

    # -- (de)serialization --

    def to_dict(self) -> dict:
        """JSON-ready snapshot; run_dir is location metadata and is excluded."""
        return {
            "population_size": self.population_size,
            "generations": self.generations,
            "mutation_rate": self.mutation_rate,
            "max_depth": self.max_depth,
            "mutation_subtree_depth": self.mutation_subtree_depth,
            "stride_budget": self.stride_budget,
            "base_filters": self.base_filters,
            "block_library": {k: list(v) for k, v in self.block_library.items()},
            "surrogate": {
                "target_params": self.surrogate.target_params,
                "width_decades": self.surrogate.width_decades,
                "affinity": dict(self.surrogate.affinity),
                "stride_bonus_cap": self.surrogate.stride_bonus_cap,
                "noise_amplitude": self.surrogate.noise_amplitude,
            },
            "evaluator": self.evaluator,
            "seed": self.seed,
            "normalization": self.normalization,
            "shortcut": self.shortcut,
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "global_avg_pool": self.global_avg_pool,
            "evaluator_timeout": self.evaluator_timeout,
            "evaluator_in_flight": self.evaluator_in_flight,
            "node_limit": self.node_limit,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvolutionConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "block_library" in kwargs:
            kwargs["block_library"] = {
                k: tuple(v) for k, v in kwargs["block_library"].items()
            }
        if "input_shape" in kwargs:
            kwargs["input_shape"] = tuple(kwargs["input_shape"])
        if "surrogate" in kwargs and isinstance(kwargs["surrogate"], Mapping):
            surrogate_known = {f.name for f in dataclasses.fields(SurrogateParams)}
            surrogate_unknown = set(kwargs["surrogate"]) - surrogate_known
            if surrogate_unknown:
                raise ConfigError(
                    f"unknown surrogate keys: {sorted(surrogate_unknown)}"
                )
            kwargs["surrogate"] = SurrogateParams(**kwargs["surrogate"])
        try:
            config = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "EvolutionConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(data, Mapping):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


def make_library(config: EvolutionConfig) -> BlockLibrary:
    return BlockLibrary(
        base_filters=config.base_filters,
        entries={k: BlockSpec(tuple(v)) for k, v in config.block_library.items()},
    )


def make_evaluator(config: EvolutionConfig, library: BlockLibrary):
    if config.evaluator == "surrogate":
        return SurrogateEvaluator(config.surrogate, library)
    command = config.evaluator[len("external:"):]
    return ExternalEvaluator(
        command,
        timeout=config.evaluator_timeout,
        max_in_flight=config.evaluator_in_flight,
    )


# -- statistics -------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionSummary:
    """Five-number summary with Tukey hinges and 1.5-IQR outliers."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
        }


def _middle(sorted_values: Sequence[float]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return float(sorted_values[mid])
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def five_number_summary(values: Sequence[float]) -> DistributionSummary:
    """Quartiles as medians of the lower/upper halves (the middle value is
    shared by both halves when the count is odd)."""
    if not values:
        raise ValueError("cannot summarize an empty sample")
    ordered = sorted(float(v) for v in values)
    n = len(ordered)
    median = _middle(ordered)
    half = n // 2
    lower = ordered[: half + (n % 2)]
    upper = ordered[half:]
    q1 = _middle(lower)
    q3 = _middle(upper)
    spread = q3 - q1
    low_fence = q1 - 1.5 * spread
    high_fence = q3 + 1.5 * spread
    inside = [v for v in ordered if low_fence <= v <= high_fence]
    outliers = tuple(v for v in ordered if v < low_fence or v > high_fence)
    return DistributionSummary(
        minimum=ordered[0],
        q1=q1,
        median=median,
        q3=q3,
        maximum=ordered[-1],
        whisker_low=inside[0] if inside else q1,
        whisker_high=inside[-1] if inside else q3,
        outliers=outliers,
    )


@dataclass(frozen=True)
class IndividualRow:
    """Per-individual statistics line."""

    key_hash: str
    fitness: float
    node_count: int
    depth: int
    param_count: int
    block_ratios: Mapping[str, float]
    stride_count: int


@dataclass(frozen=True)
class GenerationStats:
    """Distribution summaries plus per-individual rows for one generation."""

    generation: int
    fitness: DistributionSummary
    node_count: DistributionSummary
    individuals: tuple[IndividualRow, ...]

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "fitness": self.fitness.to_dict(),
            "node_count": self.node_count.to_dict(),
            "individuals": [
                {
                    "key_hash": row.key_hash,
                    "fitness": row.fitness,
                    "node_count": row.node_count,
                    "depth": row.depth,
                    "param_count": row.param_count,
                    "block_ratios": dict(row.block_ratios),
                    "stride_count": row.stride_count,
                }
                for row in self.individuals
            ],
        }


def stats_snapshot(
    population: Sequence[Individual],
    generation: int,
    library: BlockLibrary,
    input_shape: tuple[int, int, int] = (32, 32, 3),
    num_classes: int = 10,
    global_avg_pool: bool = True,
    shortcut: str = "projection",
) -> GenerationStats:
    """Summarize one evaluated population; rows sorted by ascending fitness."""
    for individual in population:
        if individual.fitness is None:
            raise ValueError("stats require every individual to be evaluated")
    rows: list[IndividualRow] = []
    for individual in sorted(population, key=lambda ind: ind.fitness):
        tree = individual.genome
        descriptor = compile_tree(
            tree, library, input_shape, num_classes, global_avg_pool, shortcut
        )
        rows.append(
            IndividualRow(
                key_hash=short_key_hash(individual.canonical_key),
                fitness=individual.fitness,
                node_count=tree.node_count(),
                depth=tree.depth(),
                param_count=param_count(descriptor, library),
                block_ratios=block_ratios(tree),
                stride_count=tree.stride_count(),
            )
        )
    return GenerationStats(
        generation=generation,
        fitness=five_number_summary([row.fitness for row in rows]),
        node_count=five_number_summary([row.node_count for row in rows]),
        individuals=tuple(rows),
    )


# -- reports ----------------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Final outcome of a run."""

    best_sexpr: str
    best_fitness: float
    best_descriptor: ArchDescriptor
    best_param_count: int
    best_conv_layer_count: int
    best_block_composition: Mapping[str, int]
    generation_stats: tuple[GenerationStats, ...]
    config: EvolutionConfig
    total_evaluations: int

    def to_dict(self) -> dict:
        return {
            "best": {
                "sexpr": self.best_sexpr,
                "fitness": self.best_fitness,
                "descriptor": self.best_descriptor.to_json_dict(),
                "param_count": self.best_param_count,
                "conv_layer_count": self.best_conv_layer_count,
                "block_composition": dict(self.best_block_composition),
            },
            "generations": [stats.to_dict() for stats in self.generation_stats],
            "config": self.config.to_dict(),
            "total_evaluations": self.total_evaluations,
        }


# -- checkpoint files ----------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _write_config(run_dir: Path, config: EvolutionConfig) -> None:
    payload = {"config": config.to_dict(), "config_hash": config.config_hash()}
    _atomic_write(run_dir / "config.json", json.dumps(payload, indent=2) + "\n")


def _load_config(run_dir: Path) -> EvolutionConfig:
    path = run_dir / "config.json"
    if not path.exists():
        raise CheckpointError(f"{path}: missing config snapshot")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        config = EvolutionConfig.from_dict(payload["config"])
        stored_hash = payload["config_hash"]
    except (json.JSONDecodeError, KeyError, ConfigError) as exc:
        raise CheckpointError(f"{path}: corrupt config snapshot: {exc}") from exc
    if config.config_hash() != stored_hash:
        raise CheckpointError(f"{path}: config hash mismatch; refusing to resume")
    return dataclasses.replace(config, run_dir=str(run_dir))


def _write_generation(
    run_dir: Path, generation: int, population: Sequence[Individual]
) -> None:
    lines = [
        f"{individual.fitness!r}\t{individual.canonical_key}\n"
        for individual in population
    ]
    _atomic_write(run_dir / _GENERATION_FILE.format(generation), "".join(lines))


def _load_generation(
    run_dir: Path, generation: int, config: EvolutionConfig
) -> list[Individual]:
    path = run_dir / _GENERATION_FILE.format(generation)
    block_ids = tuple(config.block_library)
    population: list[Individual] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"{path}: unreadable (generation {generation})") from exc
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        try:
            fitness_text, sexpr = line.split("\t", 1)
            fitness = float(fitness_text)
            tree = parse(sexpr, block_ids)
        except (ValueError, ParseError) as exc:
            raise CheckpointError(
                f"{path}:{line_number}: corrupt checkpoint for generation"
                f" {generation}: {exc}"
            ) from exc
        population.append(
            Individual(tree, fitness=fitness, birth_generation=generation)
        )
    if len(population) != config.population_size:
        raise CheckpointError(
            f"{path}: expected {config.population_size} individuals,"
            f" found {len(population)} (generation {generation})"
        )
    return population


def _checkpointed_generations(run_dir: Path) -> list[int]:
    found = []
    for entry in run_dir.iterdir():
        match = _GENERATION_RE.match(entry.name)
        if match:
            found.append(int(match.group(1)))
    return sorted(found)


# -- the run itself -------------------------------------------------------------------


def _snapshot(
    population: Sequence[Individual],
    generation: int,
    config: EvolutionConfig,
    library: BlockLibrary,
) -> GenerationStats:
    return stats_snapshot(
        population,
        generation,
        library,
        config.input_shape,
        config.num_classes,
        config.global_avg_pool,
        config.shortcut,
    )


def _evaluate(
    population: Sequence[Individual],
    evaluator,
    cache: FitnessCache,
    config: EvolutionConfig,
    library: BlockLibrary,
) -> list[Individual]:
    return evaluate_population(
        population,
        evaluator,
        cache,
        library,
        config.input_shape,
        config.num_classes,
        config.global_avg_pool,
        config.shortcut,
    )


def _advance_generation(
    config: EvolutionConfig,
    library: BlockLibrary,
    evaluator,
    cache: FitnessCache,
    population: list[Individual],
    generation: int,
) -> list[Individual]:
    size = config.population_size
    block_ids = tuple(config.block_library)
    kappa = tournament_size(generation, config.generations, size)
    params = ScheduleParams(
        population_size=size,
        max_generations=config.generations,
        generation=generation,
        mutation_rate=config.mutation_rate,
        max_depth=config.max_depth,
        mutation_subtree_depth=config.mutation_subtree_depth,
    )
    children: list[Individual] = []
    pair = 0
    while len(children) < size:
        select_rng = RngStream.derive(config.seed, generation, "select", pair)
        cross_rng = RngStream.derive(config.seed, generation, "crossover", pair)
        parent_k = tournament_select(population, kappa, select_rng)
        parent_m = tournament_select(population, kappa, select_rng)
        child_k, child_m = crossover(
            parent_k,
            parent_m,
            generation,
            config.generations,
            cross_rng,
            config.normalization,
        )
        if config.node_limit is not None:
            # Over-limit children fall back to a clone of their own parent.
            if child_k.genome.node_count() > config.node_limit:
                child_k = Individual(parent_k.genome, birth_generation=generation)
            if child_m.genome.node_count() > config.node_limit:
                child_m = Individual(parent_m.genome, birth_generation=generation)
        children.extend((child_k, child_m))
        pair += 1
    children = children[:size]
    mutated: list[Individual] = []
    for index, child in enumerate(children):
        gate = RngStream.derive(config.seed, generation, "mutation-gate", index)
        if gate.random() <= config.mutation_rate:
            mutant = mutate(
                child,
                params,
                RngStream.derive(config.seed, generation, "mutation", index),
                block_ids,
                config.stride_budget,
            )
            if (
                config.node_limit is not None
                and mutant.genome.node_count() > config.node_limit
            ):
                mutant = child  # oversized mutants fall back to the unmutated child
            child = mutant
        mutated.append(child)
    evaluated = _evaluate(mutated, evaluator, cache, config, library)
    return elitism_update(population, evaluated)


def _build_report(
    config: EvolutionConfig,
    library: BlockLibrary,
    cache: FitnessCache,
    stats: Sequence[GenerationStats],
) -> RunReport:
    best_key: str | None = None
    best_fitness = -1.0
    for key, fitness in cache.items_in_order():
        if fitness > best_fitness:
            best_key, best_fitness = key, fitness
    if best_key is None:
        raise CheckpointError("no evaluated individuals recorded")
    tree = parse(best_key, tuple(config.block_library))
    descriptor = compile_tree(
        tree,
        library,
        config.input_shape,
        config.num_classes,
        config.global_avg_pool,
        config.shortcut,
    )
    return RunReport(
        best_sexpr=best_key,
        best_fitness=best_fitness,
        best_descriptor=descriptor,
        best_param_count=param_count(descriptor, library),
        best_conv_layer_count=conv_layer_count(descriptor, library),
        best_block_composition=block_composition(tree),
        generation_stats=tuple(stats),
        config=config,
        total_evaluations=len(cache),
    )


def _write_report(run_dir: Path, report: RunReport) -> None:
    _atomic_write(
        run_dir / "report.json", json.dumps(report.to_dict(), indent=2) + "\n"
    )


def run(
    config: EvolutionConfig, stop_after_generation: int | None = None
) -> RunReport | None:
    """Execute a full search; returns the report (or None when stopped early).

    ``stop_after_generation`` interrupts the run right after that
    generation's checkpoint is written, simulating a kill; the run can then
    be continued with :func:`resume`.
    """
    config.validate()
    if config.run_dir is None:
        raise ConfigError("run_dir is required to execute a run")
    run_dir = Path(config.run_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        probe = run_dir / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"run directory {run_dir} is not writable: {exc}") from exc

    # A fresh run owns the directory: stale checkpoints or cache entries
    # from an earlier run would break determinism.
    for stale in _checkpointed_generations(run_dir):
        (run_dir / _GENERATION_FILE.format(stale)).unlink()
    for name in ("cache.tsv", "report.json"):
        stale_path = run_dir / name
        if stale_path.exists():
            stale_path.unlink()

    _write_config(run_dir, config)
    library = make_library(config)
    evaluator = make_evaluator(config, library)
    cache = FitnessCache(run_dir / "cache.tsv")
    block_ids = tuple(config.block_library)

    init_rng = RngStream.derive(config.seed, 0, "init")
    trees = ramped_half_and_half(
        init_rng,
        config.population_size,
        config.max_depth,
        config.stride_budget,
        block_ids,
    )
    population = _evaluate(
        [Individual(tree) for tree in trees], evaluator, cache, config, library
    )
    _write_generation(run_dir, 0, population)
    stats = [_snapshot(population, 0, config, library)]
    logger.info(
        "generation 0: best fitness %.4f, %d evaluations",
        stats[0].fitness.maximum,
        len(cache),
    )
    if stop_after_generation is not None and stop_after_generation <= 0:
        return None

    for generation in range(1, config.generations + 1):
        population = _advance_generation(
            config, library, evaluator, cache, population, generation
        )
        _write_generation(run_dir, generation, population)
        stats.append(_snapshot(population, generation, config, library))
        logger.info(
            "generation %d: best fitness %.4f, %d evaluations so far",
            generation,
            stats[-1].fitness.maximum,
            len(cache),
        )
        if stop_after_generation is not None and generation >= stop_after_generation:
            return None

    report = _build_report(config, library, cache, stats)
    _write_report(run_dir, report)
    return report


def resume(run_dir: str | Path) -> RunReport:
    """Continue a checkpointed run to completion.

    Statistics for already-completed generations are rebuilt from their
    population files; the remaining generations run exactly as the
    uninterrupted run would have, because every random stream is re-derived
    from (master seed, generation index).  Resuming a finished run just
    rebuilds and returns its report without evaluating anything.
    """
    run_dir = Path(run_dir)
    config = _load_config(run_dir)
    library = make_library(config)
    generations_done = _checkpointed_generations(run_dir)
    if not generations_done:
        raise CheckpointError(f"{run_dir}: no generation checkpoints found")
    if generations_done != list(range(len(generations_done))):
        raise CheckpointError(
            f"{run_dir}: generation checkpoints are not contiguous:"
            f" {generations_done}"
        )
    last_done = generations_done[-1]
    cache = FitnessCache(run_dir / "cache.tsv")

    stats: list[GenerationStats] = []
    population: list[Individual] = []
    for generation in generations_done:
        population = _load_generation(run_dir, generation, config)
        stats.append(_snapshot(population, generation, config, library))

    if last_done >= config.generations:
        report = _build_report(config, library, cache, stats)
        _write_report(run_dir, report)
        return report

    evaluator = make_evaluator(config, library)
    for generation in range(last_done + 1, config.generations + 1):
        population = _advance_generation(
            config, library, evaluator, cache, population, generation
        )
        _write_generation(run_dir, generation, population)
        stats.append(_snapshot(population, generation, config, library))
        logger.info(
            "generation %d (resumed): best fitness %.4f",
            generation,
            stats[-1].fitness.maximum,
        )

    report = _build_report(config, library, cache, stats)
    _write_report(run_dir, report)
    return report


# -- stats CSV --------------------------------------------------------------------


def load_generation_stats(run_dir: str | Path) -> list[GenerationStats]:
    """Rebuild all per-generation statistics from a run's checkpoints."""
    run_dir = Path(run_dir)
    config = _load_config(run_dir)
    library = make_library(config)
    generations_done = _checkpointed_generations(run_dir)
    if not generations_done:
        raise CheckpointError(f"{run_dir}: no generation checkpoints found")
    stats = []
    for generation in generations_done:
        population = _load_generation(run_dir, generation, config)
        stats.append(_snapshot(population, generation, config, library))
    return stats


def write_stats_csv(run_dir: str | Path, out_path: str | Path) -> None:
    """Emit the per-individual statistics table (UTF-8, LF line endings)."""
    run_dir = Path(run_dir)
    config = _load_config(run_dir)
    block_ids = tuple(config.block_library)
    stats = load_generation_stats(run_dir)
    header = (
        ["generation", "individual_index", "key_hash", "fitness", "node_count",
         "depth", "param_count"]
        + [f"ratio_{block_id}" for block_id in block_ids]
        + ["stride_count"]
    )
    lines = [",".join(header)]
    for generation_stats in stats:
        for index, row in enumerate(generation_stats.individuals):
            fields = [
                str(generation_stats.generation),
                str(index),
                row.key_hash,
                repr(row.fitness),
                str(row.node_count),
                str(row.depth),
                str(row.param_count),
            ]
            fields += [
                repr(row.block_ratios.get(block_id, 0.0)) for block_id in block_ids
            ]
            fields.append(str(row.stride_count))
            lines.append(",".join(fields))
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


__all__ = [
    "CheckpointError",
    "ConfigError",
    "DEFAULT_BLOCK_KERNELS",
    "DistributionSummary",
    "EvaluatorError",
    "EvolutionConfig",
    "GenerationStats",
    "IndividualRow",
    "RunReport",
    "five_number_summary",
    "load_generation_stats",
    "make_evaluator",
    "make_library",
    "resume",
    "run",
    "stats_snapshot",
    "write_stats_csv",
]
