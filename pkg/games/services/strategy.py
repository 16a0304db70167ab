"""
Perfect quantum strategies from orthogonal representations.

Both players share (1/sqrt(d)) sum_j |j>|j>. On question x Alice applies
U(x) and measures in the computational basis; Bob applies the entrywise
conjugate of U(y). The joint amplitude of answers (a, b) is then
(U(x) U(y)^dagger)_{ab} / sqrt(d), which forces agreement on vertex
questions for every choice of U.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from games.conf import nlg_setting
from games.exceptions import DataError, DomainError
from games.services.nonsignaling import BehaviorTable
from games.services.parallel import map_tasks

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12
UNITARY_TOL = 1e-10
VALID_RESIDUAL = 1e-8


@dataclass(frozen=True)
class UnitVec4:
    q: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        if len(q) != 4:
            raise DomainError(f"expected 4 components, got {len(q)}")
        if abs(np.linalg.norm(q) - 1.0) > UNIT_TOL:
            raise DomainError(f"vector {q} is not a unit vector")
        object.__setattr__(self, "q", q)

    def as_array(self):
        return np.array(self.q)


@dataclass(frozen=True, eq=False)
class OrthogonalRep:
    vectors: np.ndarray
    residual: float

    @property
    def valid(self):
        return self.residual < VALID_RESIDUAL

    @property
    def n(self):
        return self.vectors.shape[0]

    def vector(self, v):
        return UnitVec4(tuple(self.vectors[v]))

    def to_dict(self):
        return {str(v): [float(x) for x in self.vectors[v]] for v in range(self.n)}

    @classmethod
    def from_vectors(cls, vectors, graph):
        vectors = np.asarray(vectors, dtype=float)
        vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        return cls(vectors=vectors, residual=representation_residual(vectors, graph))


@dataclass(frozen=True, eq=False)
class Strategy:
    unitaries: np.ndarray
    graph: object = None

    def __post_init__(self):
        u = np.asarray(self.unitaries, dtype=complex)
        if u.ndim != 3 or u.shape[1] != u.shape[2]:
            raise DomainError(f"unitaries must have shape (n, d, d), got {u.shape}")
        eye = np.eye(u.shape[1])
        err = np.linalg.norm(np.conj(np.transpose(u, (0, 2, 1))) @ u - eye, axis=(1, 2))
        if err.max() >= UNITARY_TOL:
            v = int(np.argmax(err))
            raise DomainError(f"U({v}) is not unitary (|U^dag U - I|_F = {err[v]:.2e})")
        object.__setattr__(self, "unitaries", u)

    @property
    def n(self):
        return self.unitaries.shape[0]

    @property
    def dim(self):
        return self.unitaries.shape[1]

    @property
    def shared_state(self):
        d = self.dim
        psi = np.zeros(d * d, dtype=complex)
        psi[[j * d + j for j in range(d)]] = 1.0 / np.sqrt(d)
        return psi

    def alice(self, v):
        return self.unitaries[v]

    def bob(self, v):
        return np.conj(self.unitaries[v])


def quaternion_matrix(q):
    """Left-multiplication matrix of the unit quaternion q; lies in SO(4)."""
    if not isinstance(q, UnitVec4):
        q = UnitVec4(tuple(q))
    q0, q1, q2, q3 = q.q
    return np.array([
        [q0, -q1, -q2, -q3],
        [q1, q0, q3, -q2],
        [q2, -q3, q0, q1],
        [q3, q2, -q1, q0],
    ])


def representation_residual(vectors, graph):
    if not graph.edges:
        return 0.0
    u, v = np.array(graph.edges).T
    return float(np.max(np.abs(np.einsum("ij,ij->i", vectors[u], vectors[v]))))


def _edge_cosines(x, n, dim, u, v):
    q = x.reshape(n, dim)
    norms = np.linalg.norm(q, axis=1)
    return np.einsum("ij,ij->i", q[u], q[v]) / (norms[u] * norms[v])


def _edge_cosines_jac(x, n, dim, u, v):
    q = x.reshape(n, dim)
    norms = np.linalg.norm(q, axis=1)
    r = np.einsum("ij,ij->i", q[u], q[v]) / (norms[u] * norms[v])
    jac = np.zeros((len(u), n, dim))
    rows = np.arange(len(u))
    jac[rows, u] = q[v] / (norms[u] * norms[v])[:, None] - r[:, None] * q[u] / (norms[u] ** 2)[:, None]
    jac[rows, v] = q[u] / (norms[u] * norms[v])[:, None] - r[:, None] * q[v] / (norms[v] ** 2)[:, None]
    return jac.reshape(len(u), n * dim)


def _repfind_restart(task):
    index, n, dim, edges, seed_seq = task
    rng = np.random.default_rng(seed_seq)
    u, v = edges.T
    x0 = rng.normal(size=n * dim)
    fit = least_squares(
        _edge_cosines, x0, jac=_edge_cosines_jac, args=(n, dim, u, v),
        method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
    )
    q = fit.x.reshape(n, dim)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    residual = float(np.max(np.abs(np.einsum("ij,ij->i", q[u], q[v]))))
    logger.debug("repfind restart %d: residual %.3e after %d evaluations", index, residual, fit.nfev)
    return residual, q


def find_orthogonal_representation(graph, seed=0, restarts=None, dim=4, workers=None):
    """
    Unit vectors in R^dim with adjacent vertices as close to orthogonal as
    the restarts manage. A residual above the validity threshold is
    reported through ``OrthogonalRep.valid``; it is not an error.
    """
    if restarts is None:
        restarts = nlg_setting("REPFIND_RESTARTS")
    if not graph.edges:
        return OrthogonalRep(vectors=np.tile(np.eye(dim)[0], (graph.n, 1)), residual=0.0)
    edges = np.array(graph.edges)
    children = np.random.SeedSequence(seed).spawn(restarts)
    tasks = [(i, graph.n, dim, edges, child) for i, child in enumerate(children)]
    results = map_tasks(_repfind_restart, tasks, workers=workers)

    best_residual, best_vectors = results[0]
    for residual, vectors in results[1:]:
        if residual < best_residual:
            best_residual, best_vectors = residual, vectors
    level = logging.INFO if best_residual < VALID_RESIDUAL else logging.WARNING
    logger.log(level, "orthogonal representation of %s in R^%d: residual %.3e over %d restarts",
               graph.name or "graph", dim, best_residual, restarts)
    return OrthogonalRep(vectors=best_vectors, residual=best_residual)


def build_perfect_strategy(rep, graph=None):
    if not rep.valid:
        raise DomainError(
            f"representation residual {rep.residual:.2e} is not below {VALID_RESIDUAL:.0e}"
        )
    unitaries = np.stack([quaternion_matrix(rep.vectors[v]).T for v in range(rep.n)])
    return Strategy(unitaries=unitaries.astype(complex), graph=graph)


def edge_residual(strategy, u, v, graph=None):
    """
    max_a |(U(u)^T U(v))_aa|; zero exactly on a perfectly played edge.
    The graph comes from ``graph`` or, failing that, from the strategy.
    """
    graph = graph if graph is not None else strategy.graph
    if graph is None:
        raise DomainError("edge residual needs the graph the strategy plays")
    if not graph.has_edge(u, v):
        raise DomainError(f"({u}, {v}) is not an edge")
    product = strategy.unitaries[u].T @ strategy.unitaries[v]
    return float(np.max(np.abs(np.diag(product))))


def question_probabilities(strategy, game):
    """P(a, b | q) for every question of the game, shape (questions, c, c)."""
    if strategy.n != game.graph.n:
        raise DomainError(f"strategy covers {strategy.n} vertices, game has {game.graph.n}")
    if strategy.dim != game.colors:
        raise DomainError(f"strategy dimension {strategy.dim} differs from {game.colors} colors")
    x = np.array([q.x for q in game.questions])
    y = np.array([q.y for q in game.questions])
    amplitudes = np.einsum("qaj,qbj->qab", strategy.unitaries[x], np.conj(strategy.unitaries[y]))
    return np.abs(amplitudes) ** 2 / strategy.dim


def quantum_value(strategy, game):
    probs = question_probabilities(strategy, game)
    value = float(np.einsum("q,qab,qab->", game.weights(), game.rule_tensor(), probs))
    return min(1.0, max(0.0, value))


def behavior_table(strategy, game):
    support = tuple((q.x, q.y) for q in game.questions)
    return BehaviorTable(support=support, freqs=question_probabilities(strategy, game))


def save_representation(rep, path):
    Path(path).write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))


def load_representation(path, graph):
    try:
        data = json.loads(Path(path).read_text())
        vectors = np.array([data[str(v)] for v in range(graph.n)], dtype=float)
    except FileNotFoundError as exc:
        raise DataError(f"representation file {path} not found") from exc
    except (KeyError, ValueError) as exc:
        raise DataError(f"representation file {path} does not cover vertices 0..{graph.n - 1}") from exc
    return OrthogonalRep.from_vectors(vectors, graph)


def strategy_to_json(strategy):
    return [
        [[[float(z.real), float(z.imag)] for z in row] for row in u]
        for u in strategy.unitaries
    ]


def strategy_from_json(data, graph=None):
    try:
        arr = np.array(data, dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataError(f"strategy JSON is not a list of complex matrices: {exc}") from exc
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise DataError(f"strategy JSON has shape {arr.shape}, expected (n, d, d, 2)")
    unitaries = arr[..., 0] + 1j * arr[..., 1]
    return Strategy(unitaries=unitaries, graph=graph)
