from games.management.base import GameCommand
from games.services.graphgame import build_game, load_graph
from games.services.nonsignaling import kfold_pbr
from games.services.pipeline import metadata
from games.services.stats import CountsDataset


class Command(GameCommand):
    help = "k-fold prediction-based-ratio test of the non-signaling hypothesis"

    def add_arguments(self, parser):
        self.add_graph_arguments(parser)
        parser.add_argument("--counts", required=True)
        parser.add_argument("--folds", type=int, default=None)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--alpha", type=float, default=None)
        parser.add_argument("--pseudo-count", type=float, default=0.0)
        parser.add_argument("--tol", type=float, default=1e-9)
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--out", default="")

    def run(self, **options):
        graph = load_graph(options["graph"])
        game = build_game(graph, options["colors"])
        dataset = CountsDataset.read_jsonl(options["counts"])
        dataset.check_complete(game)
        result = kfold_pbr(
            dataset, game, k=options["folds"], seed=options["seed"], alpha=options["alpha"],
            pseudo_count=options["pseudo_count"], tol=options["tol"], workers=options["workers"],
        )
        for fold in result.per_fold:
            self.stdout.write(f"fold {fold.fold}: kl={fold.kl:.3e} p_U={fold.p_u:.4g}")
        style = self.style.WARNING if result.decision == "reject" else self.style.SUCCESS
        self.stdout.write(style(f"min p_U = {result.min_p_u:.4g}: {result.decision}"))
        if options["out"]:
            self.write_json(options["out"], {"meta": metadata(options["seed"], graph), **result.as_dict()})
