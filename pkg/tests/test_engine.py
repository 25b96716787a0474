"""Engine: config handling, stats conventions, runs, checkpoints, resume."""

import json

import pytest

from treenas.engine import (
    CheckpointError,
    ConfigError,
    EvolutionConfig,
    five_number_summary,
    make_library,
    resume,
    run,
    stats_snapshot,
    write_stats_csv,
)
from treenas.genome import Individual
from treenas.sexpr import parse


def small_config(run_dir, **overrides) -> EvolutionConfig:
    base = dict(
        population_size=8,
        generations=3,
        seed=11,
        run_dir=str(run_dir),
    )
    base.update(overrides)
    return EvolutionConfig(**base)


class TestConfig:
    def test_defaults_match_reference_settings(self):
        config = EvolutionConfig()
        assert config.population_size == 20
        assert config.generations == 10
        assert config.mutation_rate == 0.20
        assert config.max_depth == 10
        assert config.mutation_subtree_depth == 4
        assert config.stride_budget == 5
        assert config.base_filters == 16
        config.validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            EvolutionConfig.from_dict({"poplation_size": 20})

    def test_unknown_surrogate_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown surrogate keys"):
            EvolutionConfig.from_dict({"surrogate": {"target": 1}})

    def test_field_validation(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(population_size=7).validate()
        with pytest.raises(ConfigError):
            EvolutionConfig(mutation_rate=1.5).validate()
        with pytest.raises(ConfigError):
            EvolutionConfig(stride_budget=3).validate()
        with pytest.raises(ConfigError):
            EvolutionConfig(evaluator="magic").validate()
        with pytest.raises(ConfigError):
            EvolutionConfig(block_library={"b1": (5,)}).validate()

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps({"population_size": 12, "generations": 4, "seed": 3}),
            encoding="utf-8",
        )
        config = EvolutionConfig.from_file(path)
        assert config.population_size == 12
        assert config.generations == 4
        assert EvolutionConfig.from_dict(config.to_dict()) == config

    def test_hash_ignores_run_dir(self):
        first = EvolutionConfig(run_dir="/a")
        second = EvolutionConfig(run_dir="/b")
        assert first.config_hash() == second.config_hash()


class TestFiveNumberSummary:
    def test_tukey_hinges_on_four_points(self):
        summary = five_number_summary([0.1, 0.2, 0.3, 0.4])
        assert summary.q1 == pytest.approx(0.15)
        assert summary.median == pytest.approx(0.25)
        assert summary.q3 == pytest.approx(0.35)
        assert summary.minimum == 0.1 and summary.maximum == 0.4

    def test_odd_count_shares_median(self):
        summary = five_number_summary([1, 2, 3, 4, 5])
        assert summary.median == 3
        assert summary.q1 == 2 and summary.q3 == 4

    def test_identical_values(self):
        summary = five_number_summary([0.5] * 6)
        assert (
            summary.minimum
            == summary.q1
            == summary.median
            == summary.q3
            == summary.maximum
            == 0.5
        )
        assert summary.outliers == ()

    def test_outliers_beyond_fences(self):
        summary = five_number_summary([1, 2, 3, 4, 100])
        assert 100 in summary.outliers
        assert summary.whisker_high < 100


class TestStatsSnapshot:
    def test_rows_sorted_ascending_and_ratios_sum(self):
        library = make_library(EvolutionConfig())
        population = [
            Individual(parse("(+ b1 b2)"), fitness=0.9),
            Individual(parse("(+ b3 b4)"), fitness=0.1),
            Individual(parse("(+ b2 b2)"), fitness=0.5),
            Individual(parse("(+ b2 b3)"), fitness=0.7),
        ]
        stats = stats_snapshot(population, 2, library)
        fits = [row.fitness for row in stats.individuals]
        assert fits == sorted(fits)
        for row in stats.individuals:
            assert sum(row.block_ratios.values()) == pytest.approx(1.0)
        assert stats.generation == 2
        assert stats.fitness.median == pytest.approx(0.6)

    def test_requires_evaluated_population(self):
        library = make_library(EvolutionConfig())
        with pytest.raises(ValueError):
            stats_snapshot([Individual(parse("(+ b1 b2)"))], 0, library)


class TestRun:
    def test_zero_generations_reports_initial_best(self, tmp_path):
        config = small_config(tmp_path / "r", generations=0)
        report = run(config)
        assert report is not None
        assert len(report.generation_stats) == 1
        assert report.total_evaluations <= config.population_size
        assert report.best_fitness == report.generation_stats[0].fitness.maximum

    def test_population_size_and_monotone_best(self, tmp_path):
        report = run(small_config(tmp_path / "r"))
        assert report is not None
        for stats in report.generation_stats:
            assert len(stats.individuals) == 8
        maxima = [stats.fitness.maximum for stats in report.generation_stats]
        assert maxima == sorted(maxima)

    def test_evaluation_budget(self, tmp_path):
        config = small_config(tmp_path / "r")
        report = run(config)
        assert report.total_evaluations <= config.population_size * (
            config.generations + 1
        )

    def test_checkpoints_parse_and_validate(self, tmp_path):
        config = small_config(tmp_path / "r")
        run(config)
        block_ids = tuple(config.block_library)
        pop_files = sorted((tmp_path / "r").glob("gen_*.pop"))
        assert len(pop_files) == config.generations + 1
        for pop_file in pop_files:
            lines = pop_file.read_text(encoding="utf-8").splitlines()
            assert len(lines) == config.population_size
            for line in lines:
                fitness_text, sexpr = line.split("\t", 1)
                assert 0.0 <= float(fitness_text) <= 1.0
                assert parse(sexpr, block_ids).validate(block_ids) == []

    def test_missing_run_dir_rejected(self):
        with pytest.raises(ConfigError):
            run(EvolutionConfig(run_dir=None))

    def test_rerun_in_same_directory_is_fresh(self, tmp_path):
        config = small_config(tmp_path / "r")
        first = run(config)
        second = run(config)
        assert first.to_dict() == second.to_dict()


class TestDeterminism:
    def test_same_seed_identical_outputs(self, tmp_path):
        report_a = run(small_config(tmp_path / "a"))
        report_b = run(small_config(tmp_path / "b"))
        assert report_a.best_sexpr == report_b.best_sexpr
        assert report_a.to_dict() == report_b.to_dict()
        bytes_a = (tmp_path / "a" / "report.json").read_bytes()
        bytes_b = (tmp_path / "b" / "report.json").read_bytes()
        assert bytes_a == bytes_b
        write_stats_csv(tmp_path / "a", tmp_path / "a.csv")
        write_stats_csv(tmp_path / "b", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        report_a = run(small_config(tmp_path / "a", seed=1))
        report_b = run(small_config(tmp_path / "b", seed=2))
        assert report_a.to_dict() != report_b.to_dict()


class TestResume:
    def test_interrupted_run_completes_identically(self, tmp_path):
        straight = run(small_config(tmp_path / "full", generations=6))
        interrupted = run(
            small_config(tmp_path / "cut", generations=6), stop_after_generation=3
        )
        assert interrupted is None
        assert not (tmp_path / "cut" / "report.json").exists()
        resumed = resume(tmp_path / "cut")
        assert resumed.to_dict() == straight.to_dict()
        assert (tmp_path / "cut" / "report.json").read_bytes() == (
            tmp_path / "full" / "report.json"
        ).read_bytes()

    def test_resume_of_completed_run_adds_no_evaluations(self, tmp_path):
        config = small_config(tmp_path / "r")
        report = run(config)
        cache_before = (tmp_path / "r" / "cache.tsv").read_bytes()
        again = resume(tmp_path / "r")
        assert again.to_dict() == report.to_dict()
        assert (tmp_path / "r" / "cache.tsv").read_bytes() == cache_before

    def test_config_hash_mismatch_refused(self, tmp_path):
        config = small_config(tmp_path / "r")
        run(config, stop_after_generation=1)
        path = tmp_path / "r" / "config.json"
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["config"]["mutation_rate"] = 0.99
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(CheckpointError, match="hash mismatch"):
            resume(tmp_path / "r")

    def test_corrupt_checkpoint_names_file_and_generation(self, tmp_path):
        config = small_config(tmp_path / "r")
        run(config, stop_after_generation=1)
        victim = tmp_path / "r" / "gen_001.pop"
        victim.write_text("garbage without a tab\n", encoding="utf-8")
        with pytest.raises(CheckpointError) as info:
            resume(tmp_path / "r")
        assert "gen_001.pop" in str(info.value)
        assert "generation 1" in str(info.value)

    def test_missing_checkpoints_rejected(self, tmp_path):
        (tmp_path / "r").mkdir()
        with pytest.raises(CheckpointError):
            resume(tmp_path / "r")


class TestStatsCsv:
    def test_header_and_shape(self, tmp_path):
        config = small_config(tmp_path / "r")
        run(config)
        out = tmp_path / "stats.csv"
        write_stats_csv(tmp_path / "r", out)
        text = out.read_text(encoding="utf-8")
        lines = text.split("\n")
        assert lines[0] == (
            "generation,individual_index,key_hash,fitness,node_count,depth,"
            "param_count,ratio_b1,ratio_b2,ratio_b3,ratio_b4,stride_count"
        )
        body = [line for line in lines[1:] if line]
        assert len(body) == config.population_size * (config.generations + 1)
        assert "\r" not in text

    def test_rows_sorted_by_fitness_within_generation(self, tmp_path):
        config = small_config(tmp_path / "r")
        run(config)
        out = tmp_path / "stats.csv"
        write_stats_csv(tmp_path / "r", out)
        rows = [line.split(",") for line in out.read_text().splitlines()[1:] if line]
        by_generation: dict[str, list[float]] = {}
        for row in rows:
            by_generation.setdefault(row[0], []).append(float(row[3]))
        for fits in by_generation.values():
            assert fits == sorted(fits)


class TestExternalEvaluatorRun:
    def test_engine_drives_external_process(self, tmp_path):
        import sys
        from pathlib import Path

        stub = Path(__file__).parent / "evalscripts" / "stub_eval.py"
        config = small_config(
            tmp_path / "r",
            generations=1,
            evaluator=f'external:"{sys.executable}" "{stub}" value:0.25',
        )
        report = run(config)
        assert report is not None
        assert report.best_fitness == 0.25


class TestNodeLimit:
    def test_cap_enforced_when_set(self, tmp_path):
        # max_depth 3 keeps the initial trees under the cap; the guard then
        # holds every later child (crossover and mutation) to it as well.
        config = small_config(tmp_path / "r", node_limit=9, max_depth=3)
        report = run(config)
        for stats in report.generation_stats:
            for row in stats.individuals:
                assert row.node_count <= 9
