"""
Native-gate circuits for the coloring game.

Gate set:
    rphi(theta, phi)  rotation by theta about cos(phi) X + sin(phi) Y
    rz(theta)         diag(exp(-i theta/2), exp(i theta/2))
    rxx(theta)        exp(-i theta XX); theta = pi/4 is fully entangling

Qubit 0 is the most significant bit of every matrix and outcome string.
Alice measures qubits (0, 1), Bob qubits (2, 3); Bell pairs sit on
(0, 2) and (1, 3).
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize

from games.conf import nlg_setting
from games.exceptions import DataError, DomainError, NumericError
from games.services.parallel import map_tasks
from games.services.strategy import Strategy, quaternion_matrix

logger = logging.getLogger(__name__)

RPHI = "rphi"
RZ = "rz"
RXX = "rxx"
GATE_ARITY = {RPHI: 1, RZ: 1, RXX: 2}
GATE_PARAMS = {RPHI: 2, RZ: 1}

ENTANGLER_ANGLE = math.pi / 4
ALICE_QUBITS = (0, 1)
BOB_QUBITS = (2, 3)
N_QUBITS = 4
CONJUGATION_TOL = 1e-10

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_XX = np.kron(_X, _X)


def rphi_matrix(theta, phi):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -1j * np.exp(-1j * phi) * s],
        [-1j * np.exp(1j * phi) * s, c],
    ])


def rz_matrix(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rxx_matrix(theta):
    return math.cos(theta) * np.eye(4) - 1j * math.sin(theta) * _XX


@dataclass(frozen=True)
class NativeGate:
    name: str
    qubits: tuple
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.name not in GATE_ARITY:
            raise DomainError(f"unknown native gate {self.name!r}")
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != GATE_ARITY[self.name] or len(set(qubits)) != len(qubits):
            raise DomainError(f"{self.name} acts on {GATE_ARITY[self.name]} distinct qubits, got {qubits}")
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise DomainError(f"{self.name} angles must be finite")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "phi", float(self.phi))

    def matrix(self):
        if self.name == RPHI:
            return rphi_matrix(self.theta, self.phi)
        if self.name == RZ:
            return rz_matrix(self.theta)
        return rxx_matrix(self.theta)

    @property
    def is_entangler(self):
        return self.name == RXX

    def to_dict(self):
        data = {"g": self.name, "q": list(self.qubits), "theta": self.theta}
        if self.name == RPHI:
            data["phi"] = self.phi
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(data["g"], tuple(data["q"]), float(data["theta"]), float(data.get("phi", 0.0)))
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed gate {data!r}") from exc


def rphi(qubit, theta, phi):
    return NativeGate(RPHI, (qubit,), theta, phi)


def rz(qubit, theta):
    return NativeGate(RZ, (qubit,), theta)


def rxx(qa, qb, theta=ENTANGLER_ANGLE):
    return NativeGate(RXX, (qa, qb), theta)


def embed_operator(op, qubits, n_qubits):
    """Lift an operator on ``qubits`` (first listed = most significant) to the full register."""
    k = len(qubits)
    rest = [q for q in range(n_qubits) if q not in qubits]
    order = list(qubits) + rest
    full = np.kron(op, np.eye(2 ** (n_qubits - k)))
    inv = list(np.argsort(order))
    tensor = full.reshape([2] * (2 * n_qubits))
    tensor = tensor.transpose(inv + [n_qubits + i for i in inv])
    return tensor.reshape(2 ** n_qubits, 2 ** n_qubits)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            if max(gate.qubits) >= self.n_qubits:
                raise DomainError(f"gate {gate.name} on {gate.qubits} exceeds {self.n_qubits} qubits")

    @property
    def entangler_count(self):
        return sum(1 for g in self.gates if g.is_entangler)

    def unitary(self):
        u = np.eye(2 ** self.n_qubits, dtype=complex)
        for gate in self.gates:
            u = embed_operator(gate.matrix(), gate.qubits, self.n_qubits) @ u
        return u

    def to_dict(self):
        return {"label": self.label, "n_qubits": self.n_qubits,
                "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, data):
        try:
            gates = tuple(NativeGate.from_dict(g) for g in data["gates"])
            return cls(n_qubits=int(data["n_qubits"]), gates=gates, label=data.get("label", ""))
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed circuit: {exc}") from exc


def circuit_unitary(circuit):
    return circuit.unitary()


def circuit_probabilities(circuit):
    """Noiseless outcome distribution from |0...0>."""
    return np.abs(circuit.unitary()[:, 0]) ** 2


@dataclass(frozen=True)
class AnsatzTemplate:
    """
    Alternating single-qubit layers and fixed rxx(pi/4) gates on two
    qubits. Each layer applies ``layer_gates`` to both qubits in order;
    there is one more layer than entanglers. Parameters run layer by
    layer, qubit by qubit, gate by gate (rphi takes theta, phi; rz theta).
    """

    name: str
    n_entanglers: int
    layer_gates: tuple

    @property
    def params_per_qubit_layer(self):
        return sum(GATE_PARAMS[g] for g in self.layer_gates)

    @property
    def n_params(self):
        return (self.n_entanglers + 1) * 2 * self.params_per_qubit_layer

    def check(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.n_params:
            raise DomainError(f"{self.name} takes {self.n_params} parameters, got {params.shape[-1]}")
        return params


ONE_RXX = AnsatzTemplate("one_rxx", 1, (RPHI,))
TWO_RXX = AnsatzTemplate("two_rxx", 2, (RPHI, RZ))
TEMPLATES = {t.name: t for t in (ONE_RXX, TWO_RXX)}


def template_by_name(name):
    try:
        return TEMPLATES[name]
    except KeyError:
        raise DomainError(f"unknown ansatz template {name!r}; choose from {sorted(TEMPLATES)}") from None


def ansatz_gates(template, params, qubits=(0, 1)):
    params = template.check(params)
    gates = []
    i = 0
    for layer in range(template.n_entanglers + 1):
        if layer:
            gates.append(rxx(qubits[0], qubits[1]))
        for q in qubits:
            for name in template.layer_gates:
                if name == RPHI:
                    gates.append(rphi(q, params[i], params[i + 1]))
                else:
                    gates.append(rz(q, params[i]))
                i += GATE_PARAMS[name]
    return gates


def _batch_single(name, p):
    """Stack of 2x2 matrices for one gate kind; p has shape (V, n_gate_params)."""
    theta = p[:, 0]
    out = np.zeros((len(p), 2, 2), dtype=complex)
    if name == RPHI:
        phi = p[:, 1]
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        out[:, 0, 0] = c
        out[:, 1, 1] = c
        out[:, 0, 1] = -1j * np.exp(-1j * phi) * s
        out[:, 1, 0] = -1j * np.exp(1j * phi) * s
    else:
        out[:, 0, 0] = np.exp(-0.5j * theta)
        out[:, 1, 1] = np.exp(0.5j * theta)
    return out


def ansatz_unitaries(template, params):
    """Two-qubit unitaries for a (V, n_params) parameter array, shape (V, 4, 4)."""
    params = template.check(np.atleast_2d(params))
    n_vertices = params.shape[0]
    entangler = rxx_matrix(ENTANGLER_ANGLE)
    u = np.broadcast_to(np.eye(4, dtype=complex), (n_vertices, 4, 4))
    i = 0
    for layer in range(template.n_entanglers + 1):
        if layer:
            u = entangler @ u
        local = []
        for _ in range(2):
            m = np.broadcast_to(np.eye(2, dtype=complex), (n_vertices, 2, 2))
            for name in template.layer_gates:
                width = GATE_PARAMS[name]
                m = _batch_single(name, params[:, i:i + width]) @ m
                i += width
            local.append(m)
        layer_op = np.einsum("vij,vkl->vikjl", local[0], local[1]).reshape(n_vertices, 4, 4)
        u = layer_op @ u
    return u


def ansatz_unitary(template, params):
    return ansatz_unitaries(template, template.check(params)[None, :])[0]


def phase_distance(a, b):
    """min over theta of ||a - exp(i theta) b||_F."""
    overlap = np.trace(np.conj(b).T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


@dataclass(frozen=True, eq=False)
class FitResult:
    params: np.ndarray
    distance: float


def _phase_residuals(x, template, target):
    a = ansatz_unitary(template, x)
    overlap = np.trace(np.conj(target).T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    diff = (a - phase * target).ravel()
    return np.concatenate([diff.real, diff.imag])


def _fit_restart(task):
    index, template, target, seed_seq = task
    rng = np.random.default_rng(seed_seq)
    x0 = np.zeros(template.n_params) if index == 0 else rng.uniform(0, 2 * np.pi, template.n_params)
    fit = least_squares(
        _phase_residuals, x0, args=(template, target), method="trf", jac="3-point",
        diff_step=1e-6, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000,
    )
    distance = phase_distance(ansatz_unitary(template, fit.x), target)
    logger.debug("fit restart %d: distance %.3e", index, distance)
    return distance, fit.x


def fit_unitary(target, template, restarts=None, seed=0, workers=None):
    """
    Best phase-optimal Frobenius fit of ``target`` by the template.
    The first restart starts from all-zero angles, the rest uniformly
    in [0, 2 pi).
    """
    restarts = nlg_setting("FIT_RESTARTS") if restarts is None else restarts
    target = np.asarray(target, dtype=complex)
    if np.linalg.norm(np.conj(target).T @ target - np.eye(4)) >= CONJUGATION_TOL:
        raise DomainError("fit target is not unitary")
    children = np.random.SeedSequence(seed).spawn(restarts)
    results = map_tasks(_fit_restart, [(i, template, target, ch) for i, ch in enumerate(children)],
                        workers=workers)
    best_distance, best_params = results[0]
    for distance, params in results[1:]:
        if distance < best_distance:
            best_distance, best_params = distance, params
    return FitResult(params=np.mod(best_params, 2 * np.pi), distance=best_distance)


@dataclass(frozen=True, eq=False)
class AnsatzResult:
    template: AnsatzTemplate
    params: np.ndarray
    value: float
    restart_values: tuple = ()

    @property
    def loss(self):
        return 1.0 - self.value


def game_loss(x, template, game):
    """1 - quantum value of the per-vertex ansatz strategy (flattened parameters)."""
    unitaries = ansatz_unitaries(template, x.reshape(game.graph.n, template.n_params))
    qx = np.array([q.x for q in game.questions])
    qy = np.array([q.y for q in game.questions])
    amp = np.einsum("qaj,qbj->qab", unitaries[qx], np.conj(unitaries[qy]))
    probs = np.abs(amp) ** 2 / 4.0
    return float(np.einsum("q,qab,qab->", game.weights(), 1.0 - game.rule_tensor(), probs))


def _ansatz_restart(task):
    index, template, game, seed_seq = task
    rng = np.random.default_rng(seed_seq)
    x0 = rng.uniform(0, 2 * np.pi, game.graph.n * template.n_params)
    result = minimize(
        game_loss, x0, args=(template, game), method="BFGS", jac="3-point",
        options={"gtol": 1e-9, "finite_diff_rel_step": 1e-6, "maxiter": 20000},
    )
    loss = game_loss(result.x, template, game)
    logger.debug("ansatz restart %d: loss %.3e after %d iterations", index, loss, result.nit)
    return loss, result.x


def optimize_game_ansatz(game, template=ONE_RXX, restarts=None, seed=0, workers=None):
    """Joint multi-start quasi-Newton maximization of the game value over all vertex angles."""
    if game.colors != 4:
        raise DomainError("the two-qubit ansatz plays the 4-color game")
    restarts = nlg_setting("ANSATZ_RESTARTS") if restarts is None else restarts
    children = np.random.SeedSequence(seed).spawn(restarts)
    results = map_tasks(_ansatz_restart, [(i, template, game, ch) for i, ch in enumerate(children)],
                        workers=workers)
    best_loss, best_x = results[0]
    for loss, x in results[1:]:
        if loss < best_loss:
            best_loss, best_x = loss, x
    logger.info("%s on %s: best value 1 - %.3e over %d restarts", template.name,
                game.graph.name or "graph", best_loss, restarts)
    params = np.mod(best_x.reshape(game.graph.n, template.n_params), 2 * np.pi)
    return AnsatzResult(template=template, params=params, value=1.0 - best_loss,
                        restart_values=tuple(1.0 - loss for loss, _ in results))


def compile_perfect_strategy(rep, restarts=None, seed=0, workers=None):
    """Two-entangler fits of every quaternion target M^T; returns (params, distances)."""
    params, distances = [], []
    for v in range(rep.n):
        target = quaternion_matrix(rep.vectors[v]).T.astype(complex)
        fit = fit_unitary(target, TWO_RXX, restarts=restarts, seed=seed + v, workers=workers)
        params.append(fit.params)
        distances.append(fit.distance)
    return np.array(params), np.array(distances)


def strategy_from_params(template, params, graph=None):
    return Strategy(unitaries=ansatz_unitaries(template, params), graph=graph)


def conjugate_gate(gate):
    """Gates whose product is the entrywise conjugate of ``gate`` up to global phase."""
    if gate.name == RPHI:
        return [rphi(gate.qubits[0], gate.theta, math.pi - gate.phi)]
    if gate.name == RZ:
        return [rz(gate.qubits[0], -gate.theta)]
    qa = gate.qubits[0]
    return [rz(qa, math.pi), gate, rz(qa, math.pi)]


def conjugate_gates(gates):
    out = []
    for gate in gates:
        out.extend(conjugate_gate(gate))
    return out


def bell_prep_circuit():
    gates = [
        rxx(0, 2),
        rz(2, math.pi / 2),
        rxx(1, 3),
        rz(3, math.pi / 2),
    ]
    return Circuit(N_QUBITS, gates, label="bell_prep")


def _bob_gates(template, params):
    gates = conjugate_gates(ansatz_gates(template, params, BOB_QUBITS))
    compiled = Circuit(N_QUBITS, gates).unitary()
    expected = embed_operator(np.conj(ansatz_unitary(template, params)), BOB_QUBITS, N_QUBITS)
    distance = phase_distance(compiled, expected)
    if distance >= CONJUGATION_TOL:
        raise NumericError("conjugated measurement circuit does not match conj(U)", residual=distance)
    return gates


def game_circuits(params, game, template=ONE_RXX):
    """
    One circuit per vertex ("v{i}") and per edge ("e{u}_{v}", u < v): Bell
    preparation, Alice's measurement unitary for the first vertex on qubits
    (0, 1) and Bob's conjugated unitary for the second on qubits (2, 3).
    """
    params = np.asarray(params, dtype=float)
    if params.ndim != 2 or params.shape[0] < game.graph.n:
        raise DomainError(f"measurement parameters are needed for all {game.graph.n} vertices")
    template.check(params)
    prep = bell_prep_circuit().gates
    pairs = [(f"v{v}", v, v) for v in range(game.graph.n)]
    pairs.extend((f"e{u}_{v}", u, v) for u, v in game.graph.edges)
    circuits = []
    for label, u, v in pairs:
        gates = list(prep)
        gates.extend(ansatz_gates(template, params[u], ALICE_QUBITS))
        gates.extend(_bob_gates(template, params[v]))
        circuits.append(Circuit(N_QUBITS, gates, label=label))
    logger.info("built %d game circuits with %d entanglers each", len(circuits),
                circuits[0].entangler_count)
    return circuits


def circuits_to_json(circuits):
    return [c.to_dict() for c in circuits]


def save_circuits(circuits, path):
    Path(path).write_text(json.dumps(circuits_to_json(circuits), indent=2, sort_keys=True))


def load_circuits(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"circuit file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"circuit file {path} is not valid JSON: {exc}") from exc
    return [Circuit.from_dict(c) for c in data]


def save_params(template, params, path, **meta):
    payload = {"template": template.name, "params": np.asarray(params).tolist(), **meta}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_params(path):
    try:
        data = json.loads(Path(path).read_text())
        return template_by_name(data["template"]), np.array(data["params"], dtype=float)
    except FileNotFoundError as exc:
        raise DataError(f"parameter file {path} not found") from exc
    except (KeyError, ValueError) as exc:
        raise DataError(f"parameter file {path} is malformed: {exc}") from exc
