import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ExperimentCellError, InvariantBreach
from harness.services.config import parse_config, parse_config_text
from harness.services.experiments import run_experiment, save_experiment
from harness.services.results import emit_results, render_results

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run a sweep from a key = value config and emit the result table (CSV or JSON)."

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Config file; omitted keys take the MOELAB defaults.")
        parser.add_argument("--out", help="Output path; '-' or nothing writes to stdout unless the config sets one.")
        parser.add_argument("--format", choices=["csv", "json"])
        parser.add_argument("--policy", help="Comma list of draft policies.")
        parser.add_argument("--engine", help="Comma list of engines (specmoe, ondemand, overlap, caching).")
        parser.add_argument("--batch", help="Comma list of batch sizes.")
        parser.add_argument("--gamma", help="Comma list of γ values.")
        parser.add_argument("--n-draft", dest="n_draft", help="Comma list of N values.")
        parser.add_argument("--seed", help="Seeds, e.g. '0-19' or '1,4,7'.")
        parser.add_argument("--workers", type=int)
        parser.add_argument("--verbose", action="store_true",
                            help="Add engine, setup bytes, c, latency split and text hash columns.")
        parser.add_argument("--save", action="store_true", help="Store the experiment and its rows in the database.")
        parser.add_argument("--name", default="", help="Label for --save.")

    def handle(self, *args, **options):
        try:
            config = parse_config(options["config"]) if options["config"] else parse_config_text("")
            config = config.with_overrides(
                policy=options["policy"], engines=options["engine"], batch=options["batch"],
                gamma=options["gamma"], n_draft=options["n_draft"], seeds=options["seed"],
                format=options["format"], workers=options["workers"],
                verbose=True if options["verbose"] else None,
            )
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=1)

        try:
            rows = run_experiment(config)
        except ExperimentCellError as exc:
            logger.error("%s", exc)
            code = 2 if exc.is_invariant_breach else 1
            raise CommandError(str(exc), returncode=code)
        except InvariantBreach as exc:
            raise CommandError(str(exc), returncode=2)

        fmt, verbose = config["format"], config["verbose"]
        out = options["out"] or config["output"] or "-"
        try:
            if out == "-":
                self.stdout.write(render_results(rows, fmt, verbose), ending="")
            else:
                path = emit_results(rows, fmt, out, verbose)
                self.stderr.write(self.style.SUCCESS(f"{len(rows)} rows written to {path}"))
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=1)

        if options["save"]:
            experiment = save_experiment(config, rows, name=options["name"])
            self.stderr.write(self.style.SUCCESS(f"saved experiment {experiment.id}"))
