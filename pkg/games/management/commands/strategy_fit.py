import json

from games.management.base import GameCommand
from games.services import circuits as circuit_service
from games.services.graphgame import build_game, load_graph
from games.services.strategy import (
    build_perfect_strategy,
    find_orthogonal_representation,
    load_representation,
    quantum_value,
    strategy_to_json,
)


class Command(GameCommand):
    help = (
        "Fit per-vertex measurement angles: variational optimisation of the game value, "
        "or (--perfect) exact compilation of the quaternion strategy"
    )

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--template", default="one_rxx", choices=sorted(circuit_service.TEMPLATES))
        parser.add_argument("--perfect", action="store_true",
                            help="Compile the quaternion strategy of an orthogonal representation")
        parser.add_argument("--rep", default="", help="Representation JSON; searched for when omitted")
        parser.add_argument("--restarts", type=int, default=None)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--out", default="params.json")
        parser.add_argument("--strategy-out", default="", help="Also write the 4x4 unitaries as JSON")

    def run(self, **options):
        graph = load_graph(options["graph"])
        game = build_game(graph, options["colors"])
        if options["perfect"]:
            strategy = self.perfect(graph, game, options)
        else:
            template = circuit_service.template_by_name(options["template"])
            result = circuit_service.optimize_game_ansatz(
                game, template, restarts=options["restarts"], seed=options["seed"],
                workers=options["workers"],
            )
            circuit_service.save_params(template, result.params, options["out"],
                                        seed=options["seed"], value=result.value)
            strategy = circuit_service.strategy_from_params(template, result.params, graph)
            self.stdout.write(self.style.SUCCESS(
                f"{template.name}: value {result.value:.10f} (1 - {result.loss:.2e})"
            ))
        self.stdout.write(f"wrote {options['out']}")
        if options["strategy_out"]:
            with open(options["strategy_out"], "w") as fh:
                json.dump(strategy_to_json(strategy), fh)
            self.stdout.write(f"wrote {options['strategy_out']}")

    def perfect(self, graph, game, options):
        if options["rep"]:
            rep = load_representation(options["rep"], graph)
        else:
            rep = find_orthogonal_representation(graph, seed=options["seed"], workers=options["workers"])
        strategy = build_perfect_strategy(rep, graph)
        self.stdout.write(f"quaternion strategy: value {quantum_value(strategy, game):.12f}")
        params, distances = circuit_service.compile_perfect_strategy(
            rep, restarts=options["restarts"], seed=options["seed"], workers=options["workers"],
        )
        template = circuit_service.TWO_RXX
        circuit_service.save_params(template, params, options["out"], seed=options["seed"],
                                    distances=distances.tolist())
        style = self.style.SUCCESS if distances.max() < 1e-5 else self.style.WARNING
        self.stdout.write(style(f"{template.name} fits: worst distance {distances.max():.2e}"))
        return strategy
