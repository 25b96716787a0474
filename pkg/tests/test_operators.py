"""Genetic operators: construction, schedules, crossover, repair, mutation."""

import math

import pytest

from treenas.genome import Individual, Node, PLUS, STRIDE
from treenas.operators import (
    RngStream,
    ScheduleParams,
    crossover,
    crossover_score,
    elitism_update,
    full,
    grow,
    mutate,
    normalize_diffs,
    pair_scores,
    ramped_half_and_half,
    repair,
    select_crossover_points,
    tournament_select,
    tournament_size,
)
from treenas.sexpr import parse


def rng(tag: str, index: int = 0) -> RngStream:
    return RngStream.derive(99, 0, tag, index)


def schedule(generation=1, max_generations=10, mutation_rate=0.2) -> ScheduleParams:
    return ScheduleParams(
        population_size=20,
        max_generations=max_generations,
        generation=generation,
        mutation_rate=mutation_rate,
        max_depth=10,
    )


def evaluated(text: str, fitness: float, generation: int = 0) -> Individual:
    return Individual(parse(text), fitness=fitness, birth_generation=generation)


class TestRngStream:
    def test_same_derivation_same_stream(self):
        a = RngStream.derive(1, 2, "role", 3)
        b = RngStream.derive(1, 2, "role", 3)
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]

    def test_distinct_roles_distinct_streams(self):
        a = RngStream.derive(1, 2, "select", 3)
        b = RngStream.derive(1, 2, "mutate", 3)
        assert [a.random() for _ in range(5)] != [b.random() for _ in range(5)]


class TestGrow:
    def test_depth_two_forces_smallest_shape(self):
        for index in range(50):
            tree = grow(rng("grow2", index), 2)
            assert tree.node_count() == 3
            assert tree.node_at(0).symbol == PLUS

    def test_grown_trees_are_valid(self):
        for index in range(1000):
            tree = grow(rng("grow", index), 10)
            assert tree.validate() == []

    def test_depth_bound_respected(self):
        for index in range(200):
            assert grow(rng("growd", index), 5).depth() <= 5

    def test_fragment_roots_vary(self):
        symbols = {
            grow(rng("frag", index), 4, root_must_be_plus=False).node_at(0).symbol
            for index in range(100)
        }
        assert any(s not in (PLUS,) for s in symbols)

    def test_stride_budget_respected(self):
        for index in range(200):
            tree = grow(rng("growb", index), 10, stride_budget=2)
            assert tree.stride_count() <= 2

    def test_stride_children_always_terminal(self):
        for index in range(300):
            tree = grow(rng("grows", index), 8)
            for cursor in tree.cursors():
                if tree.node_at(cursor).symbol == STRIDE:
                    assert tree.node_at(cursor).children[0].is_terminal


class TestFull:
    def test_depth_two(self):
        tree = full(rng("full2"), 2)
        assert tree.node_count() == 3

    def test_uniform_leaf_depth(self):
        for index in range(1000):
            depth = 2 + index % 5
            tree = full(rng("full", index), depth)
            leaf_depths = {tree.depth_of(c) for c in tree.leaves_in_order()}
            assert leaf_depths == {depth}

    def test_no_stride_above_penultimate_depth(self):
        for index in range(300):
            tree = full(rng("fulls", index), 6)
            for cursor in tree.cursors():
                if tree.node_at(cursor).symbol == STRIDE:
                    assert tree.depth_of(cursor) == 5
            assert tree.validate() == []


class TestRampedHalfAndHalf:
    def test_default_settings_produce_nine_parts(self):
        trees = ramped_half_and_half(rng("ramp"), 20, 10)
        assert len(trees) == 20
        # 20 across 9 parts: the first two depth caps take 3, the rest 2.
        depth_caps = list(range(2, 11))
        expected = [3, 3] + [2] * 7
        assert sum(expected) == 20 and len(depth_caps) == 9

    def test_even_split_at_18(self):
        trees = ramped_half_and_half(rng("ramp18"), 18, 10)
        assert len(trees) == 18
        by_cap: dict[int, int] = {}
        for tree in trees:
            by_cap[tree.depth()] = by_cap.get(tree.depth(), 0) + 1
        # Each part holds one grow and one full tree; the full tree reaches
        # its cap exactly, so every depth 2..10 appears at least once.
        assert set(by_cap) <= set(range(2, 11))
        assert sum(by_cap.values()) == 18

    def test_all_valid(self):
        for tree in ramped_half_and_half(rng("rampv"), 20, 10):
            assert tree.validate() == []


class TestTournamentSize:
    def test_reference_schedule(self):
        assert tournament_size(1, 10, 20) == 2
        assert tournament_size(2, 10, 20) == 5
        assert tournament_size(10, 10, 20) == 10

    def test_endpoints_generalize(self):
        for population in (8, 12, 40):
            for horizon in (2, 5, 20):
                assert tournament_size(1, horizon, population) == 2
                assert tournament_size(horizon, horizon, population) == population // 2

    def test_monotone_in_generation(self):
        sizes = [tournament_size(t, 10, 20) for t in range(1, 11)]
        assert sizes == sorted(sizes)

    def test_matches_formula(self):
        for t in range(2, 10):
            expected = math.ceil(2 + (20 / 2 - 2) * math.log2(t) / math.log2(10))
            assert tournament_size(t, 10, 20) == expected


class TestTournamentSelect:
    def test_full_tournament_returns_best(self):
        population = [evaluated("(+ b1 b1)", f / 10) for f in range(6)]
        for index in range(10):
            winner = tournament_select(population, len(population), rng("sel", index))
            assert winner.fitness == 0.5

    def test_single_entrant_is_uniform_draw(self):
        population = [evaluated("(+ b1 b1)", f / 10) for f in range(4)]
        seen = {
            tournament_select(population, 1, rng("sel1", index)).fitness
            for index in range(200)
        }
        assert seen == {0.0, 0.1, 0.2, 0.3}

    def test_pairwise_always_prefers_better(self):
        population = [evaluated("(+ b1 b1)", 0.1), evaluated("(+ b2 b2)", 0.9)]
        for index in range(20):
            assert tournament_select(population, 2, rng("sel2", index)).fitness == 0.9

    def test_ties_prefer_smaller_tree(self):
        population = [
            evaluated("(+ (+ b1 b1) b1)", 0.5),
            evaluated("(+ b1 b1)", 0.5),
        ]
        winner = tournament_select(population, 2, rng("selt"))
        assert winner.node_count() == 3

    def test_unevaluated_individual_rejected(self):
        population = [evaluated("(+ b1 b1)", 0.5), Individual(parse("(+ b2 b2)"))]
        with pytest.raises(ValueError):
            tournament_select(population, 2, rng("selu"))


class TestCrossoverScore:
    def test_reference_values(self):
        assert abs(crossover_score(0.8, 1, 10) - 1.64) < 1e-12
        assert crossover_score(0.0, 10, 10) == 1.0

    def test_midpoint_flattens_scores(self):
        for value in (0.0, 0.3, 1.0):
            assert crossover_score(value, 5, 10) == 1.0

    def test_bounds(self):
        for t in range(1, 11):
            for value in (0.0, 0.25, 0.5, 1.0):
                score = crossover_score(value, t, 10)
                spread = abs(10 - 2 * t) / 10
                assert 1 - spread - 1e-12 <= score <= 1 + spread + 1e-12


class TestNormalize:
    def test_strategies(self):
        import numpy as np

        diffs = np.array([[0.0, 2.0], [4.0, 2.0]])
        assert normalize_diffs(diffs, "max").max() == 1.0
        assert normalize_diffs(diffs, "minmax").min() == 0.0
        assert normalize_diffs(diffs, "sum").sum() == pytest.approx(1.0)
        flat = np.zeros((2, 2))
        for strategy in ("max", "minmax", "sum"):
            assert normalize_diffs(flat, strategy).sum() == 0.0

    def test_unknown_strategy(self):
        import numpy as np

        with pytest.raises(ValueError):
            normalize_diffs(np.ones((1, 1)), "median")


class TestPairScores:
    def test_early_run_favors_large_diffs(self):
        import numpy as np

        tree_k = parse("(+ b1 (+ b2 (+ b3 (+ b4 b1))))")
        tree_m = parse("(+ b1 b2)")
        scores = pair_scores(tree_k, tree_m, 1, 10)
        diffs = np.abs(
            np.asarray(tree_k.subtree_sizes()[1:], float)[:, None]
            - np.asarray(tree_m.subtree_sizes()[1:], float)[None, :]
        )
        assert diffs.ravel()[scores.argmax()] == diffs.max()

    def test_late_run_favors_small_diffs(self):
        import numpy as np

        tree_k = parse("(+ b1 (+ b2 (+ b3 (+ b4 b1))))")
        tree_m = parse("(+ b1 b2)")
        scores = pair_scores(tree_k, tree_m, 10, 10)
        diffs = np.abs(
            np.asarray(tree_k.subtree_sizes()[1:], float)[:, None]
            - np.asarray(tree_m.subtree_sizes()[1:], float)[None, :]
        )
        assert diffs.ravel()[scores.argmax()] == diffs.min()

    def test_midpoint_uniform(self):
        scores = pair_scores(parse("(+ b1 b2)"), parse("(+ (str b3) b4)"), 5, 10)
        assert (scores == 1.0).all()


class TestSelectCrossoverPoints:
    def test_cursors_never_address_roots(self):
        tree_k = parse("(+ (^2 b1) (str b2))")
        tree_m = parse("(+ b3 (+ b4 b1))")
        for index in range(200):
            points = select_crossover_points(tree_k, tree_m, 1, 10, rng("pts", index))
            assert 1 <= points.cursor_k < tree_k.node_count()
            assert 1 <= points.cursor_m < tree_m.node_count()

    def test_score_satisfies_schedule_bounds(self):
        tree_k = parse("(+ (^2 b1) (str b2))")
        tree_m = parse("(+ b3 (+ b4 b1))")
        for generation in range(1, 11):
            spread = abs(10 - 2 * generation) / 10
            for index in range(30):
                points = select_crossover_points(
                    tree_k, tree_m, generation, 10, rng("ptsb", index)
                )
                assert 1 - spread - 1e-12 <= points.score <= 1 + spread + 1e-12

    def test_matches_score_matrix_entry(self):
        tree_k = parse("(+ (^2 b1) (str b2))")
        tree_m = parse("(+ b3 (+ b4 b1))")
        matrix = pair_scores(tree_k, tree_m, 2, 10)
        points = select_crossover_points(tree_k, tree_m, 2, 10, rng("ptsm"))
        assert points.score == matrix[points.cursor_k - 1, points.cursor_m - 1]


class TestCrossover:
    def test_children_are_valid_and_fresh(self):
        parent_k = evaluated("(+ (^2 (+ b1 b2)) (str b3))", 0.4)
        parent_m = evaluated("(+ (+ b4 (str b1)) (^3 b2))", 0.6)
        for index in range(50):
            child_k, child_m = crossover(parent_k, parent_m, 3, 10, rng("x", index))
            assert child_k.genome.validate() == []
            assert child_m.genome.validate() == []
            assert child_k.fitness is None and child_m.fitness is None
            assert child_k.birth_generation == 3

    def test_deterministic_for_fixed_stream(self):
        parent_k = evaluated("(+ (^2 (+ b1 b2)) (str b3))", 0.4)
        parent_m = evaluated("(+ (+ b4 (str b1)) (^3 b2))", 0.6)
        first = crossover(parent_k, parent_m, 2, 10, rng("xd"))
        second = crossover(parent_k, parent_m, 2, 10, rng("xd"))
        assert str(first[0].genome) == str(second[0].genome)
        assert str(first[1].genome) == str(second[1].genome)

    def test_swap_under_stride_is_repaired(self):
        # Parents where every swap into parent_k's str position nests a
        # subtree under str: the repaired child must stay feasible.
        parent_k = evaluated("(+ b1 (str b2))", 0.4)
        parent_m = evaluated("(+ (+ b3 b4) (+ b1 b2))", 0.6)
        for index in range(100):
            child_k, child_m = crossover(parent_k, parent_m, 1, 10, rng("xs", index))
            assert child_k.genome.validate() == []
            assert child_m.genome.validate() == []

    def test_roots_never_swapped(self):
        parent_k = evaluated("(+ b1 b2)", 0.5)
        parent_m = evaluated("(+ b3 b4)", 0.5)
        for index in range(50):
            child_k, child_m = crossover(parent_k, parent_m, 1, 10, rng("xr", index))
            # With roots excluded, each child keeps its own root plus one
            # original child slot; a root swap would clone the other parent.
            assert child_k.genome.node_at(0).symbol == PLUS
            assert child_k.genome.node_count() == 3


class TestRepair:
    def test_identity_on_feasible_trees(self):
        tree = parse("(+ (^2 b1) (str b2))")
        assert repair(tree) is tree

    def test_splices_stride_over_function(self):
        broken = parse("(+ b1 (str b2))").replace_subtree(
            3, parse("(+ b2 b3)").root
        )
        fixed = repair(broken)
        assert str(fixed) == "(+ b1 (+ b2 b3))"

    def test_nested_strides_collapse(self):
        from treenas.genome import GenomeTree

        broken = GenomeTree(
            Node(
                PLUS,
                (
                    Node("b1"),
                    Node(STRIDE, (Node(STRIDE, (Node("b2"),)),)),
                ),
            )
        )
        assert str(repair(broken)) == "(+ b1 (str b2))"

    def test_budget_overflow_removes_deepest_first(self):
        # Seven strides at distinct depths; the two deepest must go.
        text = (
            "(+ (str b1) (+ (str b1) (+ (str b1) (+ (str b1)"
            " (+ (str b1) (+ (str b1) (str b1)))))))"
        )
        broken = parse(text, check=False)
        assert broken.stride_count() == 7
        fixed = repair(broken)
        assert fixed.stride_count() == 5
        assert fixed.validate() == []
        depths = sorted(
            fixed.depth_of(c)
            for c in fixed.cursors()
            if fixed.node_at(c).symbol == STRIDE
        )
        # The shallowest five stride nodes survive.
        assert depths == [2, 3, 4, 5, 6]


class TestMutate:
    def test_terminal_swap(self):
        individual = evaluated("(+ b1 b2)", 0.7)
        child = mutate(individual, schedule(generation=4), rng("m"))
        assert child.genome.validate() == []
        assert child.fitness is None
        assert child.birth_generation == 4

    def test_stride_child_stays_terminal(self):
        individual = evaluated("(+ (str b1) (str b2))", 0.7)
        for index in range(100):
            child = mutate(individual, schedule(), rng("ms", index))
            assert child.genome.validate() == []
            for cursor in child.genome.cursors():
                node = child.genome.node_at(cursor)
                if node.symbol == STRIDE:
                    assert node.children[0].is_terminal

    def test_fragment_respects_remaining_stride_budget(self):
        individual = evaluated(
            "(+ (+ (str b1) (str b2)) (+ (+ (str b3) (str b4)) (+ (str b1) b2)))",
            0.5,
        )
        assert individual.genome.stride_count() == 5
        for index in range(200):
            child = mutate(individual, schedule(), rng("mb", index))
            assert child.genome.stride_count() <= 5
            assert child.genome.validate() == []

    def test_mean_size_strictly_increases(self):
        individual = evaluated("(+ (+ b1 b2) (+ b3 b4))", 0.5)
        before = individual.node_count()
        sizes = [
            mutate(individual, schedule(), rng("mg", index)).node_count()
            for index in range(1000)
        ]
        assert min(sizes) >= before - 0  # grow fragments never shrink below a leaf swap
        assert sum(sizes) / len(sizes) > before


class TestElitism:
    def test_all_children_worse(self):
        parents = [evaluated("(+ b1 b1)", 0.8), evaluated("(+ b2 b2)", 0.7)]
        children = [evaluated("(+ b3 b3)", 0.1), evaluated("(+ b4 b4)", 0.2)]
        assert elitism_update(parents, children) == [parents[0], parents[1]]

    def test_all_children_better(self):
        parents = [evaluated("(+ b1 b1)", 0.1), evaluated("(+ b2 b2)", 0.2)]
        children = [evaluated("(+ b3 b3)", 0.8), evaluated("(+ b4 b4)", 0.7)]
        assert elitism_update(parents, children) == [children[0], children[1]]

    def test_interleaved(self):
        parents = [evaluated("(+ b1 b1)", 0.9), evaluated("(+ b2 b2)", 0.5)]
        children = [evaluated("(+ b3 b3)", 0.7), evaluated("(+ b4 b4)", 0.6)]
        kept = elitism_update(parents, children)
        assert [ind.fitness for ind in kept] == [0.9, 0.7]

    def test_ties_prefer_parents(self):
        parents = [evaluated("(+ b1 b1)", 0.5)] * 2
        children = [evaluated("(+ b2 b2)", 0.5)] * 2
        kept = elitism_update(parents, children)
        assert kept == parents

    def test_ties_prefer_smaller_trees(self):
        parents = [evaluated("(+ (+ b1 b1) b1)", 0.5), evaluated("(+ b3 b3)", 0.0)]
        children = [evaluated("(+ b2 b2)", 0.5), evaluated("(+ b4 b4)", 0.0)]
        kept = elitism_update(parents, children)
        assert kept[0].node_count() == 3
        assert kept[0].canonical_key == "(+ b2 b2)"

    def test_sorted_descending(self):
        parents = [evaluated("(+ b1 b1)", f) for f in (0.3, 0.9, 0.1, 0.7)]
        children = [evaluated("(+ b2 b2)", f) for f in (0.5, 0.2, 0.8, 0.4)]
        kept = elitism_update(parents, children)
        fits = [ind.fitness for ind in kept]
        assert fits == sorted(fits, reverse=True)

    def test_never_loses_incumbent_best(self):
        parents = [evaluated("(+ b1 b1)", 0.95), evaluated("(+ b2 b2)", 0.2)]
        children = [evaluated("(+ b3 b3)", 0.5), evaluated("(+ b4 b4)", 0.6)]
        kept = elitism_update(parents, children)
        assert max(ind.fitness for ind in kept) == 0.95

    def test_unevaluated_rejected(self):
        parents = [evaluated("(+ b1 b1)", 0.5), evaluated("(+ b2 b2)", 0.4)]
        children = [Individual(parse("(+ b3 b3)")), evaluated("(+ b4 b4)", 0.3)]
        with pytest.raises(ValueError):
            elitism_update(parents, children)


class TestScheduleParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ScheduleParams(3, 10, 1, 0.2, 10)
        with pytest.raises(ValueError):
            ScheduleParams(20, 10, 11, 0.2, 10)
        with pytest.raises(ValueError):
            ScheduleParams(20, 10, 1, 1.5, 10)
