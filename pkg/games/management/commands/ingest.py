import nlgbench
from games.management.base import GameCommand
from games.services.graphgame import build_game, load_graph
from games.services.records import save_dataset
from games.services.stats import read_external_counts


class Command(GameCommand):
    help = "Convert external counts (JSON label -> counts, or label,bitstring,count CSV) to JSONL"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--input", required=True)
        parser.add_argument("--format", default="auto", choices=["auto", "json", "csv"])
        parser.add_argument("--bit-order", default="big", choices=["big", "little"],
                            help="little: the rightmost character is qubit 0")
        parser.add_argument("--out", default="counts.jsonl")
        parser.add_argument("--record", action="store_true")
        parser.add_argument("--name", default="ingested")

    def run(self, **options):
        graph = load_graph(options["graph"])
        game = build_game(graph, options["colors"])
        dataset = read_external_counts(options["input"], fmt=options["format"],
                                       bit_order=options["bit_order"])
        dataset.check_complete(game)
        dataset.write_jsonl(options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"{len(dataset.records)} circuits, {sum(dataset.shot_counts)} shots"
        ))
        self.stdout.write(f"wrote {options['out']}")
        if options["record"]:
            run = save_dataset(dataset, graph, options["name"], nlgbench.__version__, colors=game.colors)
            self.stdout.write(f"stored run {run.pk}")
