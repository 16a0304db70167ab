from games.conf import nlg_setting
from games.management.base import GameCommand
from games.services.graphgame import build_game, classical_value, load_graph


class Command(GameCommand):
    help = "Exact classical value of the coloring game on a graph"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--allow-large", action="store_true",
                            help="Search even when the strategy space exceeds the size guard")
        parser.add_argument("--max-bits", type=float, default=None)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--show-strategy", action="store_true")

    def run(self, **options):
        game = build_game(load_graph(options["graph"]), options["colors"])
        result = classical_value(
            game,
            allow_large=options["allow_large"],
            workers=options["workers"],
            max_bits=options["max_bits"] or nlg_setting("CLASSICAL_MAX_BITS"),
        )
        if result.wins == result.total:
            self.stdout.write(self.style.SUCCESS("1"))
        else:
            self.stdout.write(self.style.SUCCESS(f"{result} ≈ {float(result.value):.5f}"))
        if options["show_strategy"]:
            self.stdout.write(f"alice: {' '.join(map(str, result.alice))}")
            self.stdout.write(f"bob:   {' '.join(map(str, result.bob))}")
