"""Render run statistics to figure files alongside the CSV table.

Three figures are produced from a run directory's checkpoints: fitness
boxplots per generation, node-count boxplots per generation, and the
block-ratio curves over all individuals sorted by fitness.  The boxes are
drawn from the engine's own summaries (Tukey hinges, 1.5-IQR whiskers) so
the figures match the numbers in the CSV exactly.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import (
    DistributionSummary,
    GenerationStats,
    _load_config,
    load_generation_stats,
    write_stats_csv,
)

_RATIO_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
                 "tab:brown", "tab:pink", "tab:olive")


def _box_dict(summary: DistributionSummary, label: str) -> dict:
    return {
        "label": label,
        "med": summary.median,
        "q1": summary.q1,
        "q3": summary.q3,
        "whislo": summary.whisker_low,
        "whishi": summary.whisker_high,
        "fliers": list(summary.outliers),
    }


def _render_boxplot(
    stats: list[GenerationStats],
    select: str,
    title: str,
    ylabel: str,
    out_path: Path,
) -> None:
    boxes = [
        _box_dict(getattr(s, select), str(s.generation)) for s in stats
    ]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bxp(boxes, showfliers=True)
    ax.set_xlabel("generation")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def _render_block_ratios(
    stats: list[GenerationStats], block_ids: tuple[str, ...], out_path: Path
) -> None:
    rows = [row for s in stats for row in s.individuals]
    rows.sort(key=lambda row: row.fitness)
    xs = range(len(rows))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(
        xs,
        [row.fitness for row in rows],
        color="0.5",
        linewidth=1.0,
        label="fitness",
    )
    for index, block_id in enumerate(block_ids):
        ax.plot(
            xs,
            [row.block_ratios.get(block_id, 0.0) for row in rows],
            color=_RATIO_COLORS[index % len(_RATIO_COLORS)],
            linewidth=1.0,
            label=f"ratio {block_id}",
        )
    ax.set_xlabel("individuals (sorted by fitness, ascending)")
    ax.set_ylabel("fitness / block ratio")
    ax.set_title("Block ratios across all evaluated generations")
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_run_report(run_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Write stats.csv plus the three figures; returns the written paths."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _load_config(run_dir)
    stats = load_generation_stats(run_dir)

    written: list[Path] = []
    csv_path = out_dir / "stats.csv"
    write_stats_csv(run_dir, csv_path)
    written.append(csv_path)

    fitness_path = out_dir / "fitness_boxplot.png"
    _render_boxplot(
        stats, "fitness", "Fitness per generation", "fitness", fitness_path
    )
    written.append(fitness_path)

    nodes_path = out_dir / "node_count_boxplot.png"
    _render_boxplot(
        stats, "node_count", "Tree size per generation", "node count", nodes_path
    )
    written.append(nodes_path)

    ratios_path = out_dir / "block_ratios.png"
    _render_block_ratios(stats, tuple(config.block_library), ratios_path)
    written.append(ratios_path)

    return written


__all__ = ["render_run_report"]
