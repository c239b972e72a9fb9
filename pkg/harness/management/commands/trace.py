from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from harness.services.config import parse_config, parse_config_text
from harness.services.traces import analyze_trace, export_frequencies, ingest_trace, record_ondemand_trace
from moe.services.prompts import make_prompts
from moe.services.weights import build_model


class Command(BaseCommand):
    help = "Analyze expert-routing traces (skewness, hottest experts, heatmap CSV) or record one."

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest="action", required=True)

        analyze = sub.add_parser("analyze", help="Ingest a trace and report its hotness.")
        analyze.add_argument("--in", dest="input", required=True, help="Trace file.")
        analyze.add_argument("--out", help="Write the (layer, expert) frequency table here as CSV.")

        record = sub.add_parser("record", help="Record the routing of a greedy on-demand run.")
        record.add_argument("--config", help="Config file; the first batch size and seed are used.")
        record.add_argument("--out", required=True, help="Trace file to write.")

    def handle(self, *args, **options):
        if options["action"] == "record":
            return self._record(options)
        return self._analyze(options)

    def _analyze(self, options):
        try:
            report = analyze_trace(ingest_trace(options["input"]))
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=1)
        for line in report.lines():
            self.stdout.write(line)
        if options.get("out"):
            try:
                with open(options["out"], "w", encoding="utf-8", newline="") as stream:
                    export_frequencies(report, stream)
            except OSError as exc:
                raise CommandError(f"cannot write {options['out']}: {exc}", returncode=1)
            self.stdout.write(self.style.SUCCESS(f"frequency table written to {options['out']}"))

    def _record(self, options):
        try:
            config = parse_config(options["config"]) if options.get("config") else parse_config_text("")
            weights = build_model(config.model)
            seed, batch = config["seeds"][0], config["batch"][0]
            prompts = make_prompts(weights.spec, seed, batch, config["prompt_len"])
            recorder, _ = record_ondemand_trace(weights, prompts, config.tier, config["max_new_tokens"], seed)
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=1)
        try:
            with open(options["out"], "w", encoding="utf-8", newline="") as stream:
                rows = recorder.write(stream)
        except OSError as exc:
            raise CommandError(f"cannot write {options['out']}: {exc}", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"{rows} routing rows written to {options['out']}"))
