import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from games.exceptions import DataError, DomainError
from games.services.circuits import (
    ONE_RXX,
    Circuit,
    bell_prep_circuit,
    circuit_probabilities,
    game_circuits,
    optimize_game_ansatz,
    rxx,
)
from games.services.graphgame import build_game, classical_bound, load_g14, load_graph
from games.services.simulator import (
    NoiseModel,
    circuit_rng,
    confusion_matrix,
    depolarize,
    depolarizing_from_fidelity,
    fidelity_from_depolarizing,
    load_noise,
    noise_from_preset,
    run_experiment,
    sample_counts,
    simulate_circuit,
    simulate_density_matrix,
)
from games.services.stats import (
    ConfusionCalibration,
    outcome_colors,
    outcome_string,
    spam_correct_dataset,
    weighted_winrate,
)


def ground_state():
    rho = np.zeros((16, 16), dtype=complex)
    rho[0, 0] = 1.0
    return rho


class NoiseModelTests(SimpleTestCase):
    def test_fidelity_relation(self):
        self.assertEqual(depolarizing_from_fidelity(1.0, 2), 0.0)
        p = depolarizing_from_fidelity(0.995, 4)
        self.assertAlmostEqual(p, 0.005 * 4 / 3)
        self.assertAlmostEqual(fidelity_from_depolarizing(p, 4), 0.995)

    def test_presets(self):
        blue = noise_from_preset("blue")
        self.assertAlmostEqual(blue.eps01, 0.0037)
        self.assertAlmostEqual(blue.p1, 0.0003 * 2)
        self.assertTrue(noise_from_preset("ideal").is_ideal)
        with self.assertRaises(DomainError):
            noise_from_preset("platinum")

    def test_parameters_must_be_probabilities(self):
        with self.assertRaises(DomainError):
            NoiseModel(p1=1.5)

    def test_noise_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "noise.json"
            path.write_text(json.dumps({"p1": 0.001, "p2": 0.01, "eps01": 0.02, "eps10": 0.03}))
            noise = load_noise(path)
            self.assertEqual((noise.p2, noise.eps10, noise.name), (0.01, 0.03, "noise"))
            path.write_text(json.dumps({"preset": "gold"}))
            self.assertEqual(load_noise(path).name, "gold")
            path.write_text(json.dumps({"p1": 0.001}))
            with self.assertRaises(DataError):
                load_noise(path)

    def test_confusion_matrix_is_stochastic(self):
        m = confusion_matrix(NoiseModel(eps01=0.02, eps10=0.05))
        self.assertEqual(m.shape, (16, 16))
        np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-14)
        self.assertAlmostEqual(m[0, 0], 0.98 ** 4)


class ChannelTests(SimpleTestCase):
    def test_full_depolarization_gives_maximally_mixed_state(self):
        rho = depolarize(ground_state(), 1.0, (0, 1, 2, 3))
        np.testing.assert_allclose(rho, np.eye(16) / 16, atol=1e-14)

    def test_single_qubit_depolarization(self):
        rho = depolarize(ground_state(), 1.0, (0,))
        expected = np.zeros(16)
        expected[[0b0000, 0b1000]] = 0.5
        np.testing.assert_allclose(np.diag(rho).real, expected, atol=1e-14)
        self.assertAlmostEqual(np.trace(rho).real, 1.0)

    def test_zero_strength_is_identity(self):
        rho = ground_state()
        self.assertIs(depolarize(rho, 0.0, (0, 1)), rho)


class SimulationTests(SimpleTestCase):
    def setUp(self):
        self.game = build_game(load_g14(), 4)
        params = np.random.default_rng(5).uniform(0, 2 * np.pi, size=(14, ONE_RXX.n_params))
        self.circuits = game_circuits(params, self.game)

    def test_ideal_simulation_matches_pure_state(self):
        ideal = noise_from_preset("ideal")
        for circuit in self.circuits[:5]:
            np.testing.assert_allclose(simulate_circuit(circuit, ideal), circuit_probabilities(circuit),
                                       atol=1e-12)

    def test_noisy_state_stays_valid(self):
        rho = simulate_density_matrix(self.circuits[20], noise_from_preset("silver"), check=True)
        self.assertAlmostEqual(np.trace(rho).real, 1.0, places=12)

    def test_only_four_qubit_circuits(self):
        with self.assertRaises(DomainError):
            simulate_circuit(Circuit(2, [rxx(0, 1)]), noise_from_preset("ideal"))

    def test_sampling(self):
        dist = circuit_probabilities(bell_prep_circuit())
        counts = sample_counts(dist, 1000, circuit_rng(3, "v0"))
        self.assertEqual(sum(counts.values()), 1000)
        self.assertTrue(set(counts) <= {"0000", "0101", "1010", "1111"})
        with self.assertRaises(DomainError):
            sample_counts(dist, 0, 1)
        with self.assertRaises(DomainError):
            sample_counts(dist * 2, 10, 1)

    def test_streams_depend_on_seed_and_label(self):
        self.assertEqual(circuit_rng(1, "v0").random(), circuit_rng(1, "v0").random())
        self.assertNotEqual(circuit_rng(1, "v0").random(), circuit_rng(1, "v1").random())
        self.assertNotEqual(circuit_rng(1, "v0").random(), circuit_rng(2, "v0").random())

    def test_counts_do_not_depend_on_worker_count(self):
        noise = noise_from_preset("gold")
        serial = run_experiment(self.circuits[:6], noise, 300, seed=7, workers=1)
        pooled = run_experiment(self.circuits[:6], noise, 300, seed=7, workers=2)
        self.assertEqual(serial, pooled)
        self.assertEqual(serial.provenance, "simulated")

    def test_duplicate_labels(self):
        with self.assertRaises(DomainError):
            run_experiment([self.circuits[0], self.circuits[0]], noise_from_preset("ideal"), 10, seed=0)


def equal_color_mass(dist):
    return sum(dist[i] for i in range(16) if len(set(outcome_colors(outcome_string(i)))) == 1)


def exact_winrate(circuits, game, noise):
    n_q = game.n_questions
    omega = 0.0
    for circuit in circuits:
        vertex = circuit.label.startswith("v")
        same = equal_color_mass(simulate_circuit(circuit, noise))
        omega += (1.0 if vertex else 2.0) / n_q * (same if vertex else 1.0 - same)
    return omega


class NoiseResponseTests(SimpleTestCase):
    def test_readout_errors_cost_linearly(self):
        circuit = bell_prep_circuit()
        losses = []
        for eps in (1e-3, 1e-4):
            mass = equal_color_mass(simulate_circuit(circuit, NoiseModel(eps01=eps, eps10=eps)))
            self.assertAlmostEqual(mass, ((1 - eps) ** 2 + eps ** 2) ** 2, places=12)
            losses.append(1.0 - mass)
        self.assertAlmostEqual(losses[0] / losses[1], 10.0, delta=0.05)

    def test_win_rate_falls_with_entangler_noise(self):
        game = build_game(load_graph("k2.json"), 4)
        result = optimize_game_ansatz(game, ONE_RXX, restarts=8, seed=0)
        circuits = game_circuits(result.params, game)
        rates = [exact_winrate(circuits, game, NoiseModel(p2=p2)) for p2 in (0.0, 0.005, 0.02)]
        self.assertAlmostEqual(rates[0], result.value, places=9)
        self.assertGreater(rates[0], rates[1])
        self.assertGreater(rates[1], rates[2])


@tag("slow")
class PresetAcceptanceTests(SimpleTestCase):
    """Win rates of the optimized one-entangler circuits under each preset."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.game = build_game(load_g14(), 4)
        result = optimize_game_ansatz(cls.game, ONE_RXX, restarts=64, seed=0)
        cls.circuits = game_circuits(result.params, cls.game)
        cls.omega_c = classical_bound(cls.game)

    def winrate(self, preset, seed=7):
        dataset = run_experiment(self.circuits, noise_from_preset(preset), 2000, seed)
        return weighted_winrate(dataset, self.game, self.omega_c)

    def test_ideal(self):
        self.assertGreaterEqual(self.winrate("ideal").omega, 0.9995)

    def test_blue(self):
        report = self.winrate("blue")
        self.assertTrue(0.96 <= report.omega <= 0.995)
        self.assertTrue(0.0015 <= report.epsilon <= 0.0045)

    def test_silver(self):
        self.assertTrue(0.92 <= self.winrate("silver").omega <= 0.97)

    def test_edges_beat_vertices_under_noise(self):
        for preset in ("silver", "gold", "blue", "aria"):
            report = self.winrate(preset)
            self.assertGreaterEqual(report.omega_e, report.omega_v, preset)

    def test_readout_correction_lifts_silver_rate(self):
        noise = noise_from_preset("silver")
        dataset = run_experiment(self.circuits, noise, 2000, seed=7)
        raw = weighted_winrate(dataset, self.game, self.omega_c)
        corrected = weighted_winrate(spam_correct_dataset(dataset, ConfusionCalibration.from_noise(noise)),
                                     self.game, self.omega_c)
        self.assertGreater(corrected.omega, raw.omega)
        self.assertFalse(corrected.violates)
