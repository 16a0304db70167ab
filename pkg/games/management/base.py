import json
import logging

from django.core.management.base import BaseCommand, CommandError

from games.exceptions import NonlocalGameError

logger = logging.getLogger(__name__)


class GameCommand(BaseCommand):
    """
    Base for the toolkit commands: subclasses implement ``run`` and
    toolkit errors leave with their exit code.
    """

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except NonlocalGameError as exc:
            logger.debug("command failed", exc_info=True)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError

    def add_graph_arguments(self, parser, colors=True):
        parser.add_argument("--graph", default="g14.json",
                            help="Graph JSON file; bundled names such as g14.json also work")
        if colors:
            parser.add_argument("--colors", type=int, default=4)

    def write_json(self, path, payload):
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.stdout.write(f"wrote {path}")
