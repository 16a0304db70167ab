"""
End-to-end run: strategy, circuits, counts, win-rate and PBR reports.

Every artifact carries the seed, the graph hash and the toolkit version.
``created_at`` is the only field that differs between identical runs.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from django.utils import timezone

import nlgbench
from games.conf import nlg_setting
from games.exceptions import DataError, DomainError
from games.services import circuits as circuit_service
from games.services.graphgame import build_game, classical_bound, format_value, load_graph
from games.services.nonsignaling import kfold_pbr
from games.services.simulator import (
    FIDELITY_NOTE,
    PHENOMENOLOGICAL_NOTE,
    calibration_from_noise,
    load_noise,
    noise_from_preset,
    run_experiment,
)
from games.services.stats import (
    ConfusionCalibration,
    CountsDataset,
    frontier,
    spam_correct_dataset,
    weighted_winrate,
    write_frontier_csv,
)
from games.services.strategy import quantum_value

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    graph_path: str = "g14.json"
    colors: int = 4
    preset: str = ""
    noise_path: str = ""
    counts_path: str = ""
    calibration_path: str = ""
    params_path: str = ""
    template: str = "one_rxx"
    shots: int = 2000
    seed: int = 0
    restarts: int = None
    output_dir: str = ""
    spam_correct: bool = False
    folds: int = 5
    delta: float = 0.05
    alpha: float = 0.05
    workers: int = None

    def validate(self):
        if self.shots < 1:
            raise DomainError(f"shots must be at least 1, got {self.shots}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.preset and self.noise_path:
            raise DomainError("give either a noise preset or a noise file, not both")
        for path in (self.noise_path, self.counts_path, self.calibration_path, self.params_path):
            if path and not Path(path).exists():
                raise DataError(f"file {path} does not exist")
        return self

    def noise(self):
        if self.noise_path:
            return load_noise(self.noise_path)
        return noise_from_preset(self.preset or "ideal")


def metadata(seed, graph):
    return {
        "seed": seed,
        "graph": graph.name,
        "graph_hash": graph.digest,
        "toolkit_version": nlgbench.__version__,
        "created_at": timezone.now().isoformat(),
    }


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def winrate_section(dataset, game, omega_c, delta, calibration=None):
    """Raw report, plus a corrected one when a calibration is given."""
    raw = weighted_winrate(dataset, game, omega_c, delta=delta)
    section = {"winrate": raw.as_dict(), "winrate_corrected": None}
    corrected = None
    if calibration is not None:
        corrected = weighted_winrate(spam_correct_dataset(dataset, calibration), game, omega_c,
                                     delta=delta)
        section["winrate_corrected"] = corrected.as_dict()
    return section, raw, corrected


def measurement_params(config, game):
    if config.params_path:
        template, params = circuit_service.load_params(config.params_path)
        return template, params, None
    template = circuit_service.template_by_name(config.template)
    result = circuit_service.optimize_game_ansatz(game, template, restarts=config.restarts,
                                                  seed=config.seed, workers=config.workers)
    return template, result.params, result.value


def run_pipeline(config):
    """
    Runs the whole benchmark and writes report.json, pbr.json,
    frontier.csv, circuits.json and counts.jsonl to the output directory.
    Returns the report dict.
    """
    config.validate()
    out = Path(config.output_dir or nlg_setting("OUTPUT_DIR"))
    out.mkdir(parents=True, exist_ok=True)

    graph = load_graph(config.graph_path)
    game = build_game(graph, config.colors)
    omega_c = classical_bound(game, workers=config.workers)

    template, params, _ = measurement_params(config, game)
    strategy = circuit_service.strategy_from_params(template, params, graph)
    ideal_value = quantum_value(strategy, game)
    circuits = circuit_service.game_circuits(params, game, template)
    circuit_service.save_circuits(circuits, out / "circuits.json")
    circuit_service.save_params(template, params, out / "params.json", seed=config.seed)

    notes = []
    noise = None
    if config.counts_path:
        dataset = CountsDataset.read_jsonl(config.counts_path)
    else:
        noise = config.noise()
        dataset = run_experiment(circuits, noise, config.shots, config.seed, workers=config.workers)
        notes.extend([PHENOMENOLOGICAL_NOTE, FIDELITY_NOTE])
    dataset.write_jsonl(out / "counts.jsonl")

    calibration = None
    if config.spam_correct:
        if config.calibration_path:
            calibration = ConfusionCalibration.load(config.calibration_path)
        elif noise is not None:
            calibration = calibration_from_noise(noise)
        else:
            raise DomainError("SPAM correction of ingested counts needs a calibration file")

    section, raw, corrected = winrate_section(dataset, game, omega_c, config.delta, calibration)
    write_frontier_csv(
        out / "frontier.csv",
        frontier(game, omega_c),
        raw=(raw.omega_v, raw.omega_e),
        corrected=(corrected.omega_v, corrected.omega_e) if corrected else None,
    )

    pbr = kfold_pbr(dataset, game, k=config.folds, seed=config.seed, alpha=config.alpha,
                    workers=config.workers)
    pbr_report = {"meta": metadata(config.seed, graph), **pbr.as_dict()}
    write_json(out / "pbr.json", pbr_report)

    report = {
        "meta": metadata(config.seed, graph),
        "game": {"colors": game.colors, "vertices": graph.n, "edges": len(graph.edges),
                 "questions": game.n_questions},
        "classical_value": format_value(omega_c, game.n_questions),
        "strategy": {"template": template.name, "ideal_value": ideal_value},
        "noise": noise.to_dict() if noise else None,
        "provenance": dataset.provenance,
        "notes": notes,
        "pbr": {"min_p_u": pbr.min_p_u, "max_kl": pbr.max_kl, "decision": pbr.decision},
        **section,
    }
    write_json(out / "report.json", report)
    logger.info("run written to %s: omega=%.5f", out, raw.omega)
    return report
