from pathlib import Path

import nlgbench
from games.conf import nlg_setting
from games.management.base import GameCommand
from games.services.graphgame import load_graph
from games.services.pipeline import RunConfig, run_pipeline
from games.services.records import save_dataset
from games.services.simulator import PRESETS
from games.services.stats import CountsDataset


class Command(GameCommand):
    help = "Full benchmark: fit, compile, simulate or ingest, analyse and test non-signaling"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--preset", default="", choices=[""] + sorted(PRESETS))
        parser.add_argument("--noise", default="", help="Noise JSON instead of a preset")
        parser.add_argument("--counts", default="", help="Analyse these counts instead of simulating")
        parser.add_argument("--params", default="", help="Use fitted angles instead of optimising")
        parser.add_argument("--template", default="one_rxx")
        parser.add_argument("--shots", type=int, default=None)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--restarts", type=int, default=None)
        parser.add_argument("--spam-correct", action="store_true")
        parser.add_argument("--calibration", default="")
        parser.add_argument("--folds", type=int, default=None)
        parser.add_argument("--delta", type=float, default=None)
        parser.add_argument("--alpha", type=float, default=None)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--output-dir", default="")
        parser.add_argument("--record", action="store_true")
        parser.add_argument("--name", default="")

    def run(self, **options):
        config = RunConfig(
            graph_path=options["graph"],
            colors=options["colors"],
            preset=options["preset"],
            noise_path=options["noise"],
            counts_path=options["counts"],
            calibration_path=options["calibration"],
            params_path=options["params"],
            template=options["template"],
            shots=options["shots"] or nlg_setting("DEFAULT_SHOTS"),
            seed=options["seed"],
            restarts=options["restarts"],
            output_dir=options["output_dir"],
            spam_correct=options["spam_correct"],
            folds=options["folds"] or nlg_setting("FOLDS"),
            delta=nlg_setting("DELTA") if options["delta"] is None else options["delta"],
            alpha=nlg_setting("ALPHA") if options["alpha"] is None else options["alpha"],
            workers=options["workers"],
        )
        report = run_pipeline(config)
        raw = report["winrate"]
        self.stdout.write(self.style.SUCCESS(
            f"omega = {raw['omega']:.5f} +/- {raw['ci']['epsilon']:.5f}, "
            f"classical bound {report['classical_value']}"
        ))
        if raw["p_value"] is not None:
            self.stdout.write(f"p <= {raw['p_value']:.3g}")
        self.stdout.write(f"PBR: min p_U = {report['pbr']['min_p_u']:.4g} ({report['pbr']['decision']})")
        out = Path(config.output_dir or nlg_setting("OUTPUT_DIR"))
        self.stdout.write(f"artifacts in {out}")

        if options["record"]:
            dataset = CountsDataset.read_jsonl(out / "counts.jsonl", provenance=report["provenance"])
            run = save_dataset(
                dataset, load_graph(config.graph_path),
                options["name"] or f"{config.preset or 'run'}-seed{config.seed}",
                nlgbench.__version__, colors=config.colors, preset=config.preset,
                seed=config.seed, report=report, has_corrected_report=config.spam_correct,
            )
            self.stdout.write(f"stored run {run.pk}")
