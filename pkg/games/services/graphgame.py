"""
Graphs and the c-coloring nonlocal game.

The referee asks either a vertex question (v, v) or a directed edge
question (u, v); the players answer colors 0..c-1. Vertex questions are
won by equal answers, edge questions by different ones. Question weights
and the classical value are exact fractions.
"""

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from games.conf import nlg_setting
from games.exceptions import DataError, DomainError, SizeGuardError
from games.services.parallel import map_tasks

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

VERTEX = "vertex"
EDGE = "edge"

# upper bound on float32 cells touched by one scoring chunk
_CHUNK_CELLS = 1 << 24


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"vertex count must be a positive integer, got {self.n!r}")
        normalized = []
        seen = set()
        for edge in self.edges:
            if len(edge) != 2:
                raise DomainError(f"edge {edge!r} is not a vertex pair")
            u, v = int(edge[0]), int(edge[1])
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DomainError(f"edge ({u}, {v}) has an endpoint outside 0..{self.n - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            seen.add(key)
            normalized.append(key)
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def edge_set(self):
        return frozenset(self.edges)

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self.edge_set

    def neighbors(self, v):
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return sorted(out)

    def adjacency_matrix(self, dtype=np.int64):
        adj = np.zeros((self.n, self.n), dtype=dtype)
        for u, v in self.edges:
            adj[u, v] = 1
            adj[v, u] = 1
        return adj

    def relabel(self, perm):
        """Graph with vertex v renamed to perm[v]."""
        if sorted(perm) != list(range(self.n)):
            raise DomainError("relabeling must be a permutation of the vertices")
        return Graph(self.n, tuple((perm[u], perm[v]) for u, v in self.edges), self.name)

    def to_dict(self):
        return {"name": self.name, "n": self.n, "edges": [list(e) for e in self.edges]}

    def canonical_json(self):
        payload = {"n": self.n, "edges": sorted(list(e) for e in self.edges)}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(n=int(data["n"]), edges=tuple(tuple(e) for e in data["edges"]),
                       name=str(data.get("name", "")))
        except (KeyError, TypeError) as exc:
            raise DataError(f"graph JSON must contain 'n' and 'edges': {exc}") from exc


@dataclass(frozen=True)
class Question:
    kind: str
    x: int
    y: int

    def __post_init__(self):
        if self.kind not in (VERTEX, EDGE):
            raise DomainError(f"unknown question kind {self.kind!r}")
        if self.kind == VERTEX and self.x != self.y:
            raise DomainError("a vertex question asks both players the same vertex")
        if self.kind == EDGE and self.x == self.y:
            raise DomainError("an edge question asks two different vertices")

    @property
    def is_vertex(self):
        return self.kind == VERTEX


@dataclass(frozen=True)
class ColoringGame:
    graph: Graph
    colors: int
    questions: tuple
    pi: tuple = field(repr=False)

    @property
    def n_questions(self):
        return len(self.questions)

    def index_of(self, x, y):
        for i, q in enumerate(self.questions):
            if q.x == x and q.y == y:
                return i
        raise DomainError(f"({x}, {y}) is not a question of this game")

    def rule(self, a, b, question):
        return rule_lambda(a, b, question, self.colors)

    def rule_tensor(self):
        """0/1 array of shape (questions, c, c) holding lambda(a, b | q)."""
        eye = np.eye(self.colors)
        return np.stack([eye if q.is_vertex else 1.0 - eye for q in self.questions])

    def weights(self):
        return np.array([float(p) for p in self.pi])


@dataclass(frozen=True)
class ClassicalResult:
    value: Fraction
    wins: int
    total: int
    alice: tuple
    bob: tuple

    def __str__(self):
        if self.wins == self.total:
            return "1"
        return f"{self.wins}/{self.total}"

    def as_dict(self):
        return {
            "value": str(self),
            "decimal": float(self.value),
            "wins": self.wins,
            "total": self.total,
            "alice": list(self.alice),
            "bob": list(self.bob),
        }


def rule_lambda(a, b, question, colors):
    if not (0 <= a < colors and 0 <= b < colors):
        raise DomainError(f"colors ({a}, {b}) outside 0..{colors - 1}")
    if question.is_vertex:
        return int(a == b)
    return int(a != b)


def build_game(graph, colors):
    """
    Question list: every vertex once as (v, v), then every edge twice,
    as (u, v) and (v, u), in edge order. Uniform distribution.
    """
    if colors < 1:
        raise DomainError(f"color count must be at least 1, got {colors}")
    if not graph.edges:
        raise DomainError(f"graph {graph.name or '(unnamed)'} has no edges")
    questions = [Question(VERTEX, v, v) for v in range(graph.n)]
    for u, v in graph.edges:
        questions.append(Question(EDGE, u, v))
        questions.append(Question(EDGE, v, u))
    weight = Fraction(1, len(questions))
    pi = tuple(weight for _ in questions)
    assert sum(pi) == 1
    return ColoringGame(graph=graph, colors=colors, questions=tuple(questions), pi=pi)


def _wins(game, alice, bob):
    return sum(game.rule(alice[q.x], bob[q.y], q) for q in game.questions)


def _score_chunk(task):
    start, count, n, c, adjacency = task
    idx = start + np.arange(count, dtype=np.int64)
    powers = c ** np.arange(n - 1, -1, -1, dtype=np.int64)
    digits = (idx[:, None] // powers) % c
    onehot = (digits.T[:, :, None] == np.arange(c)).astype(np.float32)
    # onehot[y, k, b]: Alice colors vertex y with b in strategy k
    neighbor_counts = (adjacency @ onehot.reshape(n, count * c)).reshape(n, count, c)
    degree = adjacency.sum(axis=1)
    score = onehot + (degree[:, None, None] - neighbor_counts)
    best = score.max(axis=2).sum(axis=0)
    k = int(np.argmax(best))
    return int(round(float(best[k]))), int(idx[k])


def _bob_response(game, alice):
    adjacency = game.graph.adjacency_matrix()
    bob = []
    for y in range(game.graph.n):
        nbrs = np.flatnonzero(adjacency[y])
        scores = [int(alice[y] == b) + sum(int(alice[x] != b) for x in nbrs)
                  for b in range(game.colors)]
        bob.append(int(np.argmax(scores)))
    return tuple(bob)


def classical_value(game, allow_large=False, workers=None, max_bits=None):
    """
    Exact classical value by exhaustive search over Alice's colorings.

    For a fixed f_A the score splits over Bob's vertices, so Bob's best
    response is chosen vertex by vertex. Permuting colors for both players
    leaves the score unchanged, hence f_A(0) = 0 is fixed. Among optimal
    strategies the one with the lowest index (vertex 0 most significant)
    is reported.
    """
    if max_bits is None:
        max_bits = nlg_setting("CLASSICAL_MAX_BITS")
    n, c = game.graph.n, game.colors
    if len(set(game.pi)) != 1:
        raise DomainError("exhaustive classical search expects a uniform question distribution")
    bits = n * math.log2(c) if c > 1 else 0.0
    if bits > max_bits and not allow_large:
        raise SizeGuardError(
            f"{c}^{n} Alice strategies ({bits:.1f} bits) exceed the {max_bits}-bit guard; "
            "pass an explicit override to search anyway"
        )

    total = c ** (n - 1)
    chunk = max(1, _CHUNK_CELLS // (n * c))
    adjacency = game.graph.adjacency_matrix(dtype=np.float32)
    tasks = [(start, min(chunk, total - start), n, c, adjacency)
             for start in range(0, total, chunk)]
    logger.info("classical search over %d Alice strategies in %d chunks", total, len(tasks))

    best_wins, best_index = -1, -1
    for wins, index in map_tasks(_score_chunk, tasks, workers=workers):
        if wins > best_wins:
            best_wins, best_index = wins, index

    alice = tuple(int(best_index // c ** (n - 1 - v) % c) for v in range(n))
    bob = _bob_response(game, alice)
    assert _wins(game, alice, bob) == best_wins
    n_q = game.n_questions
    return ClassicalResult(value=Fraction(best_wins, n_q), wins=best_wins, total=n_q,
                           alice=alice, bob=bob)


def classical_value_bruteforce(game):
    """Joint enumeration of (f_A, f_B); only meant for tiny games."""
    n, c = game.graph.n, game.colors
    if c ** (2 * n) > 10 ** 7:
        raise SizeGuardError("joint enumeration is limited to tiny games")
    best = (-1, None, None)
    for alice in itertools.product(range(c), repeat=n):
        for bob in itertools.product(range(c), repeat=n):
            wins = _wins(game, alice, bob)
            if wins > best[0]:
                best = (wins, alice, bob)
    wins, alice, bob = best
    return ClassicalResult(value=Fraction(wins, game.n_questions), wins=wins,
                           total=game.n_questions, alice=alice, bob=bob)


def is_colorable(graph, colors):
    """Backtracking test for a proper coloring with the given number of colors."""
    order = sorted(range(graph.n), key=lambda v: -len(graph.neighbors(v)))
    neighbors = {v: graph.neighbors(v) for v in range(graph.n)}
    assignment = {}

    def place(i):
        if i == len(order):
            return True
        v = order[i]
        used = {assignment[u] for u in neighbors[v] if u in assignment}
        for color in range(colors):
            if color not in used:
                assignment[v] = color
                if place(i + 1):
                    return True
                del assignment[v]
        return False

    return place(0)


def load_graph(path):
    path = Path(path)
    if not path.exists() and (DATA_DIR / path.name).exists():
        path = DATA_DIR / path.name
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"graph file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"graph file {path} is not valid JSON: {exc}") from exc
    return Graph.from_dict(data)


def format_value(value, total):
    """Value over ``total`` questions as "86/88"; "1" for a full win."""
    wins = Fraction(value) * total
    if wins == total:
        return "1"
    if wins.denominator == 1:
        return f"{wins.numerator}/{total}"
    return str(Fraction(value))


def classical_bound(game, workers=None):
    """Exact classical value; the bundled 4-color G14 game is known to be 86/88."""
    if game.colors == 4 and game.graph.digest == load_graph(DATA_DIR / "g14.json").digest:
        return Fraction(86, 88)
    return classical_value(game, workers=workers).value


def load_g14(full=False, workers=None):
    """
    Bundled G14 with load-time validation.

    The fast check covers the vertex and edge counts and the shipped R^4
    orthogonal representation; ``full`` also reruns the classical search.
    """
    graph = load_graph(DATA_DIR / "g14.json")
    if graph.n != 14 or len(graph.edges) != 37:
        raise DataError(f"g14.json has n={graph.n}, |E|={len(graph.edges)}; expected 14 and 37")
    vectors = json.loads((DATA_DIR / "g14_orthogonal.json").read_text())
    q = np.array([vectors[str(v)] for v in range(graph.n)])
    if np.max(np.abs(np.linalg.norm(q, axis=1) - 1.0)) > 1e-12:
        raise DataError("g14_orthogonal.json holds non-unit vectors")
    residual = max(abs(float(q[u] @ q[v])) for u, v in graph.edges)
    if residual >= 1e-8:
        raise DataError(f"shipped G14 representation is not orthogonal (residual {residual:.2e})")
    if full:
        result = classical_value(build_game(graph, 4), workers=workers)
        if (result.wins, result.total) != (86, 88):
            raise DataError(f"G14 classical value {result} differs from 86/88")
    return graph
