from games.management.base import GameCommand
from games.services.circuits import game_circuits, load_params, save_circuits
from games.services.graphgame import build_game, load_graph


class Command(GameCommand):
    help = "Emit the vertex and edge circuits of the game from fitted measurement angles"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--params", required=True, help="Parameter JSON written by strategy_fit")
        parser.add_argument("--out", default="circuits.json")

    def run(self, **options):
        game = build_game(load_graph(options["graph"]), options["colors"])
        template, params = load_params(options["params"])
        circuits = game_circuits(params, game, template)
        save_circuits(circuits, options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"{len(circuits)} circuits, {circuits[0].entangler_count} rxx gates each"
        ))
        self.stdout.write(f"wrote {options['out']}")
