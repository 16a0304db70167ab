"""
Circuit counts, win rates and their uncertainty.

One circuit per vertex and one per undirected edge. A vertex circuit
carries weight 1/N in the overall win rate, an edge circuit 2/N because
it stands for both directed questions (N = |V| + 2|E|).

Outcome strings are read q0 q1 q2 q3 from the left; Alice's color is
2*q0 + q1 and Bob's color is 2*q2 + q3.
"""

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from games.conf import nlg_setting
from games.exceptions import CompletenessError, DataError, DomainError, NumericError
from games.services.graphgame import format_value

logger = logging.getLogger(__name__)

N_QUBITS = 4
SIMULATED = "simulated"
INGESTED = "ingested"

_BITS = re.compile(r"^[01]{4}$")
_VERTEX_LABEL = re.compile(r"^v(\d+)$")
_EDGE_LABEL = re.compile(r"^e(\d+)_(\d+)$")

RAW_ONLY_NOTE = "SPAM-corrected rates are reported for reference and never as a classical-bound violation"
UNEQUAL_SHOTS_NOTE = "shot counts differ between circuits; the range term uses n = min n_j"
INDEPENDENCE_NOTE = "shots are treated as independent across circuits"


def outcome_colors(bits):
    if not isinstance(bits, str) or not _BITS.match(bits):
        raise DataError(f"malformed outcome string {bits!r}; expected 4 characters of 0/1")
    return 2 * int(bits[0]) + int(bits[1]), 2 * int(bits[2]) + int(bits[3])


def outcome_index(bits):
    outcome_colors(bits)
    return int(bits, 2)


def outcome_string(index):
    return format(index, f"0{N_QUBITS}b")


def parse_label(label):
    """("vertex", (v, v)) for "v5", ("edge", (u, v)) for "e3_7"."""
    m = _VERTEX_LABEL.match(label)
    if m:
        v = int(m.group(1))
        return "vertex", (v, v)
    m = _EDGE_LABEL.match(label)
    if m:
        u, v = int(m.group(1)), int(m.group(2))
        if u == v:
            raise DataError(f"edge label {label!r} names a single vertex")
        return "edge", (u, v)
    raise DataError(f"circuit label {label!r} is neither v<i> nor e<u>_<v>")


def expected_labels(game):
    labels = [f"v{v}" for v in range(game.graph.n)]
    labels.extend(f"e{u}_{v}" for u, v in game.graph.edges)
    return labels


@dataclass(frozen=True)
class CountsRecord:
    label: str
    kind: str
    shots: int
    counts: dict
    corrected: bool = False

    def __post_init__(self):
        kind, _ = parse_label(self.label)
        if kind != self.kind:
            raise DataError(f"record {self.label} has kind {self.kind!r}, label says {kind!r}")
        if int(self.shots) < 1:
            raise DataError(f"record {self.label} has {self.shots} shots")
        for bits, count in self.counts.items():
            outcome_colors(bits)
            if count < 0:
                raise DataError(f"record {self.label}: negative count for {bits}")
        total = sum(self.counts.values())
        if self.corrected:
            ok = abs(total - self.shots) <= 1e-9 * self.shots
        else:
            ok = total == self.shots and all(float(c).is_integer() for c in self.counts.values())
        if not ok:
            raise DataError(f"record {self.label}: counts sum to {total}, expected {self.shots} shots")

    @property
    def vertices(self):
        return parse_label(self.label)[1]

    def frequencies(self):
        vec = np.zeros(2 ** N_QUBITS)
        for bits, count in self.counts.items():
            vec[int(bits, 2)] += count
        return vec / self.shots

    def to_dict(self):
        return {
            "label": self.label,
            "kind": self.kind,
            "shots": self.shots,
            "counts": dict(sorted(self.counts.items())),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(label=data["label"], kind=data["kind"], shots=int(data["shots"]),
                       counts={str(k): v for k, v in data["counts"].items()})
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"counts record is missing a field: {exc}") from exc


@dataclass(frozen=True)
class CountsDataset:
    records: tuple
    provenance: str = SIMULATED
    corrected: bool = False

    def __post_init__(self):
        labels = [r.label for r in self.records]
        dupes = sorted({label for label in labels if labels.count(label) > 1})
        if dupes:
            raise DataError(f"duplicate circuit labels: {', '.join(dupes)}")
        if self.provenance not in (SIMULATED, INGESTED):
            raise DataError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "records", tuple(self.records))

    def by_label(self):
        return {r.label: r for r in self.records}

    @property
    def shot_counts(self):
        return [r.shots for r in self.records]

    def check_complete(self, game):
        present = set(self.by_label())
        expected = expected_labels(game)
        missing = [label for label in expected if label not in present]
        if missing:
            raise CompletenessError(f"dataset lacks {len(missing)} of {len(expected)} circuits",
                                    missing=missing)
        extra = sorted(present - set(expected))
        if extra:
            raise DataError(f"dataset has circuits outside the game: {', '.join(extra)}")

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for record in self.records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def read_jsonl(cls, path, provenance=INGESTED):
        records = []
        try:
            with open(path) as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        records.append(CountsRecord.from_dict(json.loads(line)))
                    except json.JSONDecodeError as exc:
                        raise DataError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        except FileNotFoundError as exc:
            raise DataError(f"counts file {path} not found") from exc
        return cls(records=tuple(records), provenance=provenance)


@dataclass(frozen=True)
class WinRateReport:
    omega: float
    omega_v: float
    omega_e: float
    p_hat: dict
    sigma_w: float
    n_used: int
    delta: float
    epsilon: float
    omega_c: Fraction
    n_questions: int = None
    p_value: float = None
    violates: bool = False
    corrected: bool = False
    notes: tuple = field(default=(INDEPENDENCE_NOTE,))

    @property
    def ci(self):
        return self.delta, self.epsilon

    def as_dict(self):
        return {
            "omega": self.omega,
            "omega_v": self.omega_v,
            "omega_e": self.omega_e,
            "p_hat": dict(sorted(self.p_hat.items())),
            "sigma_w": self.sigma_w,
            "n_used": self.n_used,
            "ci": {"delta": self.delta, "epsilon": self.epsilon},
            "omega_c": format_value(self.omega_c, self.n_questions or self.omega_c.denominator),
            "omega_c_decimal": float(self.omega_c),
            "p_value": self.p_value,
            "violates_classical_bound": self.violates,
            "spam_corrected": self.corrected,
            "notes": list(self.notes),
        }


def circuit_winrate(record, colors=4):
    if colors != 4:
        raise DomainError("circuit counts encode 4 colors per player")
    wins = 0.0
    for bits, count in record.counts.items():
        a, b = outcome_colors(bits)
        if (a == b) == (record.kind == "vertex"):
            wins += count
    # corrected counts are floats and may overshoot by an ulp
    return min(1.0, max(0.0, wins / record.shots))


def circuit_weights(dataset, game):
    n_q = game.n_questions
    return np.array([(1.0 if r.kind == "vertex" else 2.0) / n_q for r in dataset.records])


def sigma_weighted(p_hat, n_j, weights):
    """Plug-in standard deviation of sum_j w_j p_hat_j for independent binomial circuits."""
    p = np.asarray(p_hat, dtype=float)
    n = np.asarray(n_j, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(n < 1):
        raise DomainError("rates must lie in [0, 1] and shot counts be positive")
    return float(np.sqrt(np.sum(w ** 2 * p * (1 - p) / n)))


def bernstein_interval(sigma_w, n, delta):
    """Half-width 2 ln(2/delta) / (3n) + sigma_w sqrt(2 ln(2/delta))."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if n < 1:
        raise DomainError("shot count must be positive")
    log_term = math.log(2.0 / delta)
    return 2.0 * log_term / (3.0 * n) + sigma_w * math.sqrt(2.0 * log_term)


def significance(omega_bar, omega_c, sigma_w, n):
    """
    Bernstein upper bound on the probability of a win rate this high
    under a classical strategy. Returns (p, violated); p = 1 when the
    bound is not exceeded.
    """
    eps_c = float(omega_bar) - float(omega_c)
    if eps_c <= 0:
        return 1.0, False
    p = math.exp(-eps_c ** 2 / 2.0 / (sigma_w ** 2 + eps_c / (3.0 * n)))
    return p, True


def weighted_winrate(dataset, game, omega_c, delta=None):
    delta = nlg_setting("DELTA") if delta is None else delta
    dataset.check_complete(game)
    p_hat = {r.label: circuit_winrate(r, game.colors) for r in dataset.records}
    p = np.array([p_hat[r.label] for r in dataset.records])
    n_j = np.array(dataset.shot_counts)
    weights = circuit_weights(dataset, game)
    is_vertex = np.array([r.kind == "vertex" for r in dataset.records])

    omega = float(np.sum(weights * p))
    sigma_w = sigma_weighted(p, n_j, weights)
    n_used = int(n_j.min())
    epsilon = bernstein_interval(sigma_w, n_used, delta)
    notes = [INDEPENDENCE_NOTE]
    if len(set(n_j.tolist())) > 1:
        notes.append(UNEQUAL_SHOTS_NOTE)

    p_value, violates = None, False
    if dataset.corrected:
        notes.append(RAW_ONLY_NOTE)
    elif omega > omega_c:
        p_value, violates = significance(omega, omega_c, sigma_w, n_used)
    logger.info("win rate %.5f (vertex %.4f, edge %.4f), +/- %.4f", omega,
                p[is_vertex].mean(), p[~is_vertex].mean(), epsilon)
    return WinRateReport(
        omega=omega,
        omega_v=float(p[is_vertex].mean()),
        omega_e=float(p[~is_vertex].mean()),
        p_hat=p_hat,
        sigma_w=sigma_w,
        n_used=n_used,
        delta=delta,
        epsilon=epsilon,
        omega_c=Fraction(omega_c),
        n_questions=game.n_questions,
        p_value=p_value,
        violates=violates,
        corrected=dataset.corrected,
        notes=tuple(notes),
    )


def pershot_winrate(shots_by_circuit, game):
    """
    Average of per-shot scores omega_i = sum_j w_j lambda_{j,i}; every
    circuit must hold the same number of shots.
    """
    lengths = {len(s) for s in shots_by_circuit.values()}
    if len(lengths) != 1:
        raise DomainError("per-shot grouping needs equal shot counts")
    n_q = game.n_questions
    scores = np.zeros(lengths.pop())
    for label, shots in shots_by_circuit.items():
        kind, _ = parse_label(label)
        weight = (1.0 if kind == "vertex" else 2.0) / n_q
        for i, bits in enumerate(shots):
            a, b = outcome_colors(bits)
            scores[i] += weight * float((a == b) == (kind == "vertex"))
    return float(scores.mean())


@dataclass(frozen=True, eq=False)
class ConfusionCalibration:
    """
    Per-qubit readout matrices C[read, prepared]; qubit 0 first.
    """

    matrices: np.ndarray
    suspicious: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[1:] != (2, 2):
            raise DomainError(f"calibration must hold 2x2 matrices, got shape {m.shape}")
        if np.any(m < 0) or np.abs(m.sum(axis=1) - 1.0).max() > 1e-9:
            raise DomainError("calibration columns must be probability vectors")
        diag = np.stack([m[:, 0, 0], m[:, 1, 1]], axis=1)
        object.__setattr__(self, "matrices", m)
        object.__setattr__(self, "suspicious", bool(np.any(diag < 0.5)))

    @classmethod
    def from_rates(cls, eps01, eps10, n_qubits=N_QUBITS):
        single = np.array([[1 - eps01, eps10], [eps01, 1 - eps10]])
        return cls(matrices=np.tile(single, (n_qubits, 1, 1)))

    @classmethod
    def from_noise(cls, noise, n_qubits=N_QUBITS):
        return cls.from_rates(noise.eps01, noise.eps10, n_qubits)

    @classmethod
    def identity(cls, n_qubits=N_QUBITS):
        return cls.from_rates(0.0, 0.0, n_qubits)

    def full_matrix(self):
        full = np.array([[1.0]])
        for m in self.matrices:
            full = np.kron(full, m)
        return full

    def to_dict(self):
        return {"qubits": self.matrices.tolist()}

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
            return cls(matrices=np.array(data["qubits"], dtype=float))
        except FileNotFoundError as exc:
            raise DataError(f"calibration file {path} not found") from exc
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"calibration file {path} is malformed: {exc}") from exc


def spam_correct(record, calibration):
    """Inverse-confusion correction of one record, clipped and renormalized."""
    dets = np.linalg.det(calibration.matrices)
    if np.any(np.abs(dets) < 1e-12):
        raise NumericError("singular readout calibration", residual=float(np.abs(dets).min()))
    if calibration.suspicious:
        logger.warning("calibration has a readout fidelity below 0.5 on some qubit")
    corrected = np.linalg.solve(calibration.full_matrix(), record.frequencies())
    corrected = np.clip(corrected, 0.0, None)
    corrected /= corrected.sum()
    counts = {outcome_string(i): float(f * record.shots)
              for i, f in enumerate(corrected) if f > 0}
    return replace(record, counts=counts, corrected=True)


def spam_correct_dataset(dataset, calibration):
    records = tuple(spam_correct(r, calibration) for r in dataset.records)
    return replace(dataset, records=records, corrected=True)


def frontier(game, omega_c, points=101):
    """(omega_v, omega_e) pairs on |V| omega_v + 2|E| omega_e = N omega_c within the unit square."""
    n_v = game.graph.n
    n_e = 2 * len(game.graph.edges)
    target = float(omega_c) * game.n_questions
    rows = []
    for omega_v in np.linspace(0.0, 1.0, points):
        omega_e = (target - n_v * omega_v) / n_e
        if 0.0 <= omega_e <= 1.0:
            rows.append((float(omega_v), float(omega_e)))
    return rows


def write_frontier_csv(path, rows, raw=None, corrected=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "omega_v", "omega_e"])
        for omega_v, omega_e in rows:
            writer.writerow(["classical_bound", f"{omega_v:.6f}", f"{omega_e:.6f}"])
        if raw is not None:
            writer.writerow(["measured_raw", f"{raw[0]:.6f}", f"{raw[1]:.6f}"])
        if corrected is not None:
            writer.writerow(["measured_corrected", f"{corrected[0]:.6f}", f"{corrected[1]:.6f}"])


def _orient(bits, bit_order):
    bits = str(bits).strip()
    if bit_order == "little":
        return bits[::-1]
    if bit_order != "big":
        raise DomainError(f"bit order must be 'big' or 'little', got {bit_order!r}")
    return bits


def dataset_from_mapping(mapping, bit_order="big", provenance=INGESTED):
    """Dataset from {label: {bitstring: count}}; shots are the count totals."""
    records = []
    for label, counts in sorted(mapping.items()):
        if not isinstance(counts, dict):
            raise DataError(f"counts of {label} must map bitstrings to integers")
        kind, _ = parse_label(label)
        oriented = {}
        for bits, count in counts.items():
            key = _orient(bits, bit_order)
            try:
                oriented[key] = oriented.get(key, 0) + int(count)
            except (TypeError, ValueError) as exc:
                raise DataError(f"{label}: count {count!r} for {bits} is not an integer") from exc
        records.append(CountsRecord(label=label, kind=kind, shots=sum(oriented.values()),
                                    counts=oriented))
    return CountsDataset(records=tuple(records), provenance=provenance)


def read_external_counts(path, fmt="auto", bit_order="big"):
    """
    Reads counts exported by other tools: a JSON object
    {label: {bitstring: count}} or a CSV with columns label,bitstring,count.
    """
    path = Path(path)
    if fmt == "auto":
        fmt = "csv" if path.suffix.lower() == ".csv" else "json"
    try:
        if fmt == "json":
            try:
                mapping = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} is not valid JSON: {exc}") from exc
            if not isinstance(mapping, dict):
                raise DataError(f"{path} must hold an object keyed by circuit label")
        elif fmt == "csv":
            mapping = {}
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                missing = {"label", "bitstring", "count"} - set(reader.fieldnames or ())
                if missing:
                    raise DataError(f"{path} lacks columns {', '.join(sorted(missing))}")
                for row in reader:
                    counts = mapping.setdefault(row["label"].strip(), {})
                    counts[row["bitstring"]] = counts.get(row["bitstring"], 0) + int(row["count"])
        else:
            raise DomainError(f"unknown counts format {fmt!r}")
    except FileNotFoundError as exc:
        raise DataError(f"counts file {path} not found") from exc
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DataError(f"{path}: {exc}") from exc
    return dataset_from_mapping(mapping, bit_order=bit_order)
