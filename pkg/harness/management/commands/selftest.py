from django.core.management.base import BaseCommand, CommandError

from harness.services.selftest import run_selftest


class Command(BaseCommand):
    help = "Run the deterministic invariant checks; exits 2 if any fails."

    def add_arguments(self, parser):
        parser.add_argument("--out", help="Also write the report to this file.")

    def handle(self, *args, **options):
        report = run_selftest()
        text = report.render()
        self.stdout.write(text, ending="")
        if options.get("out"):
            with open(options["out"], "w", encoding="utf-8", newline="") as stream:
                stream.write(text)
        if not report.passed:
            raise CommandError("selftest failed", returncode=2)
