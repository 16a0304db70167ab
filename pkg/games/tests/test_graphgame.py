from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase, tag

from games.exceptions import DomainError, SizeGuardError
from games.services.graphgame import (
    EDGE,
    VERTEX,
    Graph,
    Question,
    build_game,
    classical_value,
    classical_value_bruteforce,
    format_value,
    is_colorable,
    load_g14,
    load_graph,
    rule_lambda,
)


def random_graph(rng, n, density=0.5):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < density]
    if not edges:
        edges = [(0, 1)]
    return Graph(n, tuple(edges))


class GraphTests(SimpleTestCase):
    def test_rejects_self_loop(self):
        with self.assertRaises(DomainError):
            Graph(3, ((1, 1),))

    def test_rejects_duplicate_edge_in_either_direction(self):
        with self.assertRaises(DomainError):
            Graph(3, ((0, 1), (1, 0)))

    def test_rejects_endpoint_out_of_range(self):
        with self.assertRaises(DomainError):
            Graph(3, ((0, 3),))

    def test_edges_are_normalized(self):
        g = Graph(3, ((2, 0), (1, 2)))
        self.assertEqual(g.edges, ((0, 2), (1, 2)))
        self.assertTrue(g.has_edge(2, 0))
        self.assertEqual(g.neighbors(2), [0, 1])

    def test_digest_ignores_edge_order(self):
        a = Graph(3, ((0, 1), (1, 2)), name="a")
        b = Graph(3, ((2, 1), (1, 0)), name="b")
        self.assertEqual(a.digest, b.digest)

    def test_bundled_g14_shape(self):
        g = load_g14()
        self.assertEqual(g.n, 14)
        self.assertEqual(len(g.edges), 37)
        self.assertEqual(g.neighbors(13), list(range(13)))

    def test_load_graph_resolves_bundled_name(self):
        g = load_graph("k3.json")
        self.assertEqual((g.n, len(g.edges)), (3, 3))


class RuleTests(SimpleTestCase):
    def test_vertex_question_needs_equal_colors(self):
        self.assertEqual(rule_lambda(2, 2, Question(VERTEX, 5, 5), 4), 1)
        self.assertEqual(rule_lambda(2, 1, Question(VERTEX, 5, 5), 4), 0)

    def test_edge_question_needs_different_colors(self):
        self.assertEqual(rule_lambda(1, 1, Question(EDGE, 0, 3), 4), 0)
        self.assertEqual(rule_lambda(0, 3, Question(EDGE, 0, 3), 4), 1)

    def test_color_out_of_range(self):
        with self.assertRaises(DomainError):
            rule_lambda(4, 0, Question(EDGE, 0, 3), 4)

    def test_valid_answer_counts(self):
        game = build_game(load_graph("k2.json"), 4)
        rules = game.rule_tensor()
        self.assertEqual(int(rules[0].sum()), 4)
        self.assertEqual(int(rules[-1].sum()), 12)


class BuildGameTests(SimpleTestCase):
    def test_g14_has_88_uniform_questions(self):
        game = build_game(load_g14(), 4)
        self.assertEqual(game.n_questions, 88)
        self.assertEqual(set(game.pi), {Fraction(1, 88)})
        self.assertEqual(sum(game.pi), 1)
        self.assertEqual(sum(1 for q in game.questions if q.kind == EDGE), 74)

    def test_small_games(self):
        self.assertEqual(build_game(load_graph("k3.json"), 3).n_questions, 9)
        self.assertEqual(build_game(load_graph("k2.json"), 2).n_questions, 4)

    def test_edges_appear_in_both_directions(self):
        game = build_game(load_graph("k3.json"), 3)
        pairs = {(q.x, q.y) for q in game.questions}
        self.assertIn((0, 1), pairs)
        self.assertIn((1, 0), pairs)

    def test_empty_graph_is_rejected(self):
        with self.assertRaises(DomainError):
            build_game(Graph(3, ()), 3)


class ClassicalValueTests(SimpleTestCase):
    def test_triangle_three_colors_wins_everything(self):
        result = classical_value(build_game(load_graph("k3.json"), 3))
        self.assertEqual(result.value, 1)
        self.assertEqual(str(result), "1")

    def test_triangle_two_colors(self):
        result = classical_value(build_game(load_graph("k3.json"), 2))
        self.assertEqual(result.value, Fraction(7, 9))
        self.assertEqual(str(result), "7/9")

    def test_matches_joint_enumeration_on_small_graphs(self):
        rng = np.random.default_rng(11)
        for _ in range(12):
            n = int(rng.integers(2, 5))
            c = int(rng.integers(2, 4))
            game = build_game(random_graph(rng, n), c)
            self.assertEqual(classical_value(game).value, classical_value_bruteforce(game).value)

    def test_value_one_iff_colorable(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            n = int(rng.integers(3, 9))
            graph = random_graph(rng, n, density=0.6)
            for c in (2, 3):
                value = classical_value(build_game(graph, c)).value
                self.assertEqual(value == 1, is_colorable(graph, c))

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(3)
        graph = random_graph(rng, 7, density=0.5)
        reference = classical_value(build_game(graph, 3)).value
        for _ in range(5):
            perm = [int(v) for v in rng.permutation(graph.n)]
            self.assertEqual(classical_value(build_game(graph.relabel(perm), 3)).value, reference)

    def test_ties_report_lowest_index_strategy(self):
        result = classical_value(build_game(load_graph("k3.json"), 3))
        self.assertEqual(result.alice, (0, 1, 2))
        self.assertEqual(result.bob, (0, 1, 2))

    def test_size_guard(self):
        game = build_game(load_g14(), 4)
        with self.assertRaises(SizeGuardError):
            classical_value(game, max_bits=20)

    def test_g14_chromatic_number_is_five(self):
        g = load_g14()
        self.assertFalse(is_colorable(g, 4))
        self.assertTrue(is_colorable(g, 5))

    @tag("slow")
    def test_g14_value_is_86_over_88(self):
        game = build_game(load_g14(), 4)
        result = classical_value(game)
        self.assertEqual((result.wins, result.total), (86, 88))
        self.assertEqual(str(result), "86/88")

        lost = [q for q in game.questions
                if not game.rule(result.alice[q.x], result.bob[q.y], q)]
        self.assertEqual(len(lost), 2)

    @tag("slow")
    def test_full_g14_validation(self):
        self.assertEqual(load_g14(full=True).n, 14)


class FormatValueTests(SimpleTestCase):
    def test_keeps_question_denominator(self):
        self.assertEqual(format_value(Fraction(86, 88), 88), "86/88")
        self.assertEqual(format_value(Fraction(7, 9), 9), "7/9")

    def test_full_win(self):
        self.assertEqual(format_value(Fraction(1), 9), "1")

    def test_value_off_the_question_grid(self):
        self.assertEqual(format_value(Fraction(1, 3), 4), "1/3")
