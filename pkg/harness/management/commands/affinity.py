from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from drafting.services.affinity import build_affinity_table, save_affinity_table
from harness.services.config import parse_config, parse_config_text
from moe.services.weights import build_model


class Command(BaseCommand):
    help = "Precompute the expert affinity table of the configured model."

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest="action", required=True)
        build = sub.add_parser("build", help="Build the table and write it as layer,i,j,distance rows.")
        build.add_argument("--config", help="Config file describing the model.")
        build.add_argument("--out", required=True, help="Output path.")

    def handle(self, *args, **options):
        try:
            config = parse_config(options["config"]) if options.get("config") else parse_config_text("")
            table = build_affinity_table(build_model(config.model))
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=1)

        try:
            with open(options["out"], "w", encoding="utf-8", newline="") as stream:
                rows = save_affinity_table(table, stream)
        except OSError as exc:
            raise CommandError(f"cannot write {options['out']}: {exc}", returncode=1)
        self.stdout.write(self.style.SUCCESS(
            f"{rows} distances for {len(table.layers)} layers x {table.experts} experts written to {options['out']}"
        ))
