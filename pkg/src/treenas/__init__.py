"""Evolutionary search over tree-encoded CNN architectures.

Genomes are trees whose leaves name residual block types and whose internal
nodes sequence, widen, or down-sample the blocks below them.  The package
provides the genome model and its s-expression syntax, the lowering to
architecture descriptors, the genetic operators with their dynamic
schedules, a pluggable fitness layer (deterministic surrogate or external
evaluator processes), and the generational engine with checkpoint/resume,
statistics and a CLI.
"""

from .arch import (
    ArchDescriptor,
    BlockInstance,
    BlockLibrary,
    BlockSpec,
    CompileError,
    block_composition,
    block_ratios,
    compile_tree,
    conv_layer_count,
    filter_multiplier,
    param_count,
    stride_of,
)
from .engine import (
    CheckpointError,
    ConfigError,
    EvolutionConfig,
    GenerationStats,
    RunReport,
    five_number_summary,
    load_generation_stats,
    resume,
    run,
    stats_snapshot,
    write_stats_csv,
)
from .fitness import (
    EvalRequest,
    EvalResult,
    EvaluatorError,
    ExternalEvaluator,
    FitnessCache,
    SurrogateEvaluator,
    SurrogateParams,
    evaluate_population,
    surrogate_fitness,
)
from .genome import (
    GenomeError,
    GenomeTree,
    Individual,
    Node,
    Violation,
)
from .operators import (
    CrossoverPointPair,
    RngStream,
    ScheduleParams,
    crossover,
    crossover_score,
    elitism_update,
    full,
    grow,
    mutate,
    pair_scores,
    ramped_half_and_half,
    repair,
    select_crossover_points,
    tournament_select,
    tournament_size,
)
from .sexpr import ParseError, parse, print_tree

__version__ = "0.1.0"
