"""
Exact density-matrix simulation of 4-qubit native-gate circuits.

Every gate is followed by a depolarizing channel on its support
(strength p1 for single-qubit gates, p2 for rxx). Readout goes through
per-qubit confusion matrices. The noise is phenomenological: crosstalk,
heating and drift are not modeled.
"""

import hashlib
import itertools
import json
import logging
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from games.exceptions import DataError, DomainError, NumericError
from games.services.circuits import N_QUBITS, embed_operator
from games.services.parallel import map_tasks
from games.services.stats import (
    SIMULATED,
    ConfusionCalibration,
    CountsDataset,
    CountsRecord,
    outcome_string,
    parse_label,
)

logger = logging.getLogger(__name__)

PHENOMENOLOGICAL_NOTE = "phenomenological noise: depolarizing gates and symmetric readout confusion only"
FIDELITY_NOTE = "preset fidelities were estimated differently per system and are used uniformly"

# spam error, single-qubit fidelity, two-qubit fidelity
PRESETS = {
    "silver": (0.0083, 0.9998, 0.986),
    "gold": (0.0044, 0.9995, 0.9855),
    "blue": (0.0037, 0.9997, 0.995),
    "aria": (0.0039, 0.9995, 0.996),
    "ideal": (0.0, 1.0, 1.0),
}

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1.0, -1.0]).astype(complex),
)


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    eps01: float = 0.0
    eps10: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        for key in ("p1", "p2", "eps01", "eps10"):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"noise parameter {key}={value} is outside [0, 1]")

    @property
    def is_ideal(self):
        return self.p1 == self.p2 == self.eps01 == self.eps10 == 0.0

    def to_dict(self):
        return asdict(self)


def depolarizing_from_fidelity(fidelity, dim):
    """Average gate fidelity F to depolarizing strength p = (1 - F) d / (d - 1)."""
    return (1.0 - fidelity) * dim / (dim - 1)


def fidelity_from_depolarizing(p, dim):
    return 1.0 - p * (dim - 1) / dim


def noise_from_preset(name):
    try:
        spam, f1, f2 = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown noise preset {name!r}; choose from {sorted(PRESETS)}") from None
    return NoiseModel(
        p1=depolarizing_from_fidelity(f1, 2),
        p2=depolarizing_from_fidelity(f2, 4),
        eps01=spam,
        eps10=spam,
        name=name,
    )


def load_noise(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"noise file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"noise file {path} is not valid JSON: {exc}") from exc
    if "preset" in data:
        return noise_from_preset(data["preset"])
    try:
        return NoiseModel(p1=float(data["p1"]), p2=float(data["p2"]),
                          eps01=float(data["eps01"]), eps10=float(data["eps10"]),
                          name=data.get("name", Path(path).stem))
    except KeyError as exc:
        raise DataError(f"noise file {path} lacks {exc.args[0]!r}") from exc


def confusion_matrix(noise, n_qubits=N_QUBITS):
    return calibration_from_noise(noise, n_qubits).full_matrix()


def calibration_from_noise(noise, n_qubits=N_QUBITS):
    return ConfusionCalibration.from_noise(noise, n_qubits)


@lru_cache(maxsize=None)
def _pauli_frame(qubits, n_qubits):
    ops = []
    for combo in itertools.product(_PAULIS, repeat=len(qubits)):
        op = combo[0]
        for p in combo[1:]:
            op = np.kron(op, p)
        ops.append(embed_operator(op, qubits, n_qubits))
    return tuple(ops)


def depolarize(rho, p, qubits, n_qubits=N_QUBITS):
    """(1 - p) rho + p (I/d tensor Tr_support rho), written as a Pauli twirl."""
    if p == 0.0:
        return rho
    frame = _pauli_frame(tuple(qubits), n_qubits)
    d2 = len(frame)
    twirl = sum(P @ rho @ P for P in frame)
    return (1.0 - p) * rho + (p / d2) * twirl


def _check_state(rho, where):
    trace_err = abs(np.trace(rho) - 1.0)
    herm_err = np.abs(rho - rho.conj().T).max()
    if trace_err > 1e-12 or herm_err > 1e-12:
        raise NumericError(f"density matrix invalid after {where}", residual=max(trace_err, herm_err))
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < -1e-10:
        raise NumericError(f"density matrix not positive after {where}", residual=-min_eig)


def simulate_density_matrix(circuit, noise, check=False):
    n = circuit.n_qubits
    if n != N_QUBITS:
        raise DomainError(f"simulator runs {N_QUBITS}-qubit circuits, got {n}")
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1.0
    for i, gate in enumerate(circuit.gates):
        u = embed_operator(gate.matrix(), gate.qubits, n)
        rho = u @ rho @ u.conj().T
        rho = depolarize(rho, noise.p2 if gate.is_entangler else noise.p1, gate.qubits, n)
        if check:
            _check_state(rho, f"gate {i} ({gate.name})")
    return rho


def simulate_circuit(circuit, noise):
    """Outcome distribution over the 16 strings, readout confusion included."""
    rho = simulate_density_matrix(circuit, noise)
    ideal = np.clip(np.real(np.diag(rho)), 0.0, None)
    dist = confusion_matrix(noise, circuit.n_qubits) @ ideal
    return dist / dist.sum()


def circuit_rng(seed, label):
    """Counter-based generator keyed by (seed, circuit label)."""
    key = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def sample_counts(dist, shots, rng):
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    dist = np.asarray(dist, dtype=float)
    if shots < 1:
        raise DomainError(f"shot count must be positive, got {shots}")
    if np.any(dist < -1e-12) or abs(dist.sum() - 1.0) > 1e-9:
        raise DomainError("outcome distribution is not a probability vector")
    dist = np.clip(dist, 0.0, None)
    draws = rng.multinomial(shots, dist / dist.sum())
    return {outcome_string(i): int(c) for i, c in enumerate(draws) if c > 0}


def _simulate_task(task):
    circuit, noise, shots, seed = task
    dist = simulate_circuit(circuit, noise)
    counts = sample_counts(dist, shots, circuit_rng(seed, circuit.label))
    kind, _ = parse_label(circuit.label)
    return CountsRecord(label=circuit.label, kind=kind, shots=shots, counts=counts)


def run_experiment(circuits, noise, shots, seed, workers=None):
    labels = [c.label for c in circuits]
    dupes = sorted({label for label in labels if labels.count(label) > 1})
    if dupes:
        raise DomainError(f"duplicate circuit labels: {', '.join(dupes)}")
    logger.info("simulating %d circuits, %d shots each, noise %s", len(circuits), shots, noise.name)
    records = map_tasks(_simulate_task, [(c, noise, shots, seed) for c in circuits], workers=workers)
    return CountsDataset(records=tuple(records), provenance=SIMULATED)
