import nlgbench
from games.exceptions import DomainError
from games.management.base import GameCommand
from games.services.graphgame import build_game, classical_bound, format_value, load_graph
from games.services.pipeline import metadata, winrate_section
from games.services.records import save_dataset
from games.services.simulator import PRESETS, calibration_from_noise, noise_from_preset
from games.services.stats import ConfusionCalibration, CountsDataset, frontier, write_frontier_csv


class Command(GameCommand):
    help = "Weighted win rate, Bernstein interval and significance of a counts dataset"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--counts", required=True, help="Counts JSONL")
        parser.add_argument("--delta", type=float, default=None)
        parser.add_argument("--spam-correct", action="store_true")
        parser.add_argument("--calibration", default="", help="Readout calibration JSON")
        parser.add_argument("--preset", default="", choices=[""] + sorted(PRESETS),
                            help="Take the readout calibration from a noise preset")
        parser.add_argument("--out", default="", help="Write the report as JSON")
        parser.add_argument("--frontier", default="", help="Write the (omega_v, omega_e) frontier CSV")
        parser.add_argument("--record", action="store_true", help="Store the dataset and report")
        parser.add_argument("--name", default="analysis")

    def run(self, **options):
        graph = load_graph(options["graph"])
        game = build_game(graph, options["colors"])
        dataset = CountsDataset.read_jsonl(options["counts"])
        omega_c = classical_bound(game)
        bound = format_value(omega_c, game.n_questions)

        calibration = None
        if options["spam_correct"]:
            if options["calibration"]:
                calibration = ConfusionCalibration.load(options["calibration"])
            elif options["preset"]:
                calibration = calibration_from_noise(noise_from_preset(options["preset"]))
            else:
                raise DomainError("--spam-correct needs --calibration or --preset")

        section, raw, corrected = winrate_section(dataset, game, omega_c, options["delta"], calibration)
        report = {"meta": metadata(None, graph), "provenance": dataset.provenance, **section}

        self.stdout.write(self.style.SUCCESS(
            f"omega = {raw.omega:.5f} +/- {raw.epsilon:.5f} "
            f"(vertex {raw.omega_v:.4f}, edge {raw.omega_e:.4f})"
        ))
        if raw.p_value is not None:
            self.stdout.write(f"above {bound} with p <= {raw.p_value:.3g}")
        else:
            self.stdout.write(self.style.WARNING(f"not above the classical bound {bound}"))
        if corrected is not None:
            self.stdout.write(f"SPAM-corrected omega = {corrected.omega:.5f} (not a violation claim)")

        if options["out"]:
            self.write_json(options["out"], report)
        if options["frontier"]:
            write_frontier_csv(
                options["frontier"], frontier(game, omega_c),
                raw=(raw.omega_v, raw.omega_e),
                corrected=(corrected.omega_v, corrected.omega_e) if corrected else None,
            )
            self.stdout.write(f"wrote {options['frontier']}")
        if options["record"]:
            run = save_dataset(dataset, graph, options["name"], nlgbench.__version__,
                               colors=game.colors, report=report,
                               has_corrected_report=corrected is not None)
            self.stdout.write(f"stored run {run.pk}")
