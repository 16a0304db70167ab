from games.conf import nlg_setting
from games.exceptions import DomainError
from games.management.base import GameCommand
from games.services.circuits import load_circuits
from games.services.simulator import PRESETS, load_noise, noise_from_preset, run_experiment


class Command(GameCommand):
    help = "Sample shot counts of every circuit under a noise model"

    def add_arguments(self, parser):
        parser.add_argument("--circuits", required=True)
        parser.add_argument("--preset", default="", choices=[""] + sorted(PRESETS))
        parser.add_argument("--noise", default="", help="Noise JSON with p1, p2, eps01, eps10")
        parser.add_argument("--shots", type=int, default=None)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--out", default="counts.jsonl")

    def run(self, **options):
        if options["preset"] and options["noise"]:
            raise DomainError("give either --preset or --noise, not both")
        noise = load_noise(options["noise"]) if options["noise"] else noise_from_preset(options["preset"] or "ideal")
        shots = options["shots"] or nlg_setting("DEFAULT_SHOTS")
        circuits = load_circuits(options["circuits"])
        dataset = run_experiment(circuits, noise, shots, options["seed"], workers=options["workers"])
        dataset.write_jsonl(options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"{len(dataset.records)} circuits x {shots} shots under {noise.name} noise"
        ))
        self.stdout.write(f"wrote {options['out']}")
