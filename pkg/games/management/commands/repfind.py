from games.management.base import GameCommand
from games.services.graphgame import load_graph
from games.services.strategy import find_orthogonal_representation, save_representation


class Command(GameCommand):
    help = "Search for an orthogonal representation of a graph in R^dim"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser, colors=False)
        parser.add_argument("--dim", type=int, default=4)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--restarts", type=int, default=None)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--out", default="", help="Write the vectors as JSON")

    def run(self, **options):
        graph = load_graph(options["graph"])
        rep = find_orthogonal_representation(graph, seed=options["seed"], restarts=options["restarts"],
                                             dim=options["dim"], workers=options["workers"])
        style = self.style.SUCCESS if rep.valid else self.style.WARNING
        self.stdout.write(style(f"residual {rep.residual:.3e} ({'valid' if rep.valid else 'not valid'})"))
        if options["out"]:
            save_representation(rep, options["out"])
            self.stdout.write(f"wrote {options['out']}")
