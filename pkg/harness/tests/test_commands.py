import io
import json
import tempfile
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from harness.models import Experiment

CONFIG = (
    "experts = 8\n"
    "engines = specmoe, overlap\n"
    "n_draft = 2\n"
    "gamma = 3\n"
    "seeds = 0-1\n"
    "max_new_tokens = 6\n"
    "warmup_steps = 4\n"
)


class CommandTestMixin:
    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def call(self, *args):
        out, err = io.StringIO(), io.StringIO()
        call_command(*args, stdout=out, stderr=err)
        return out.getvalue()


class RunCommandTests(CommandTestMixin, SimpleTestCase):
    def test_writes_the_same_file_twice(self):
        config = self.write("sweep.conf", CONFIG)
        first, second = self.dir / "a.csv", self.dir / "b.csv"
        self.call("run", "--config", config, "--out", str(first))
        self.call("run", "--config", config, "--out", str(second))
        self.assertEqual(first.read_bytes(), second.read_bytes())
        lines = first.read_text(encoding="utf-8").splitlines()
        self.assertTrue(lines[0].startswith("policy,batch,gamma,n_draft"))
        self.assertEqual(len(lines), 1 + 4)

    def test_stdout_and_flag_overrides(self):
        config = self.write("sweep.conf", CONFIG)
        text = self.call("run", "--config", config, "--engine", "specmoe", "--seed", "3", "--format", "json",
                         "--verbose")
        rows = json.loads(text)
        self.assertEqual([row["seed"] for row in rows], [3])
        self.assertIn("text_hash", rows[0])

    def test_invalid_config_exits_with_one(self):
        config = self.write("bad.conf", "gamma = 0\n")
        with self.assertRaises(CommandError) as ctx:
            self.call("run", "--config", config)
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("line 1", str(ctx.exception))

    def test_bad_override_exits_with_one(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("run", "--n-draft", "1")
        self.assertEqual(ctx.exception.returncode, 1)


class SaveFlagTests(CommandTestMixin, TestCase):
    def test_save_stores_the_experiment(self):
        config = self.write("sweep.conf", CONFIG)
        self.call("run", "--config", config, "--out", str(self.dir / "r.csv"), "--save", "--name", "nightly")
        experiment = Experiment.objects.get(name="nightly")
        self.assertEqual(experiment.results.count(), 4)


class ToolCommandTests(CommandTestMixin, SimpleTestCase):
    def test_affinity_build(self):
        config = self.write("model.conf", "experts = 4\nlayers = 2\n")
        out = self.dir / "affinity.csv"
        self.call("affinity", "build", "--config", config, "--out", str(out))
        lines = out.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[:2], ["# moelab-affinity v1 experts=4", "layer,i,j,distance"])
        self.assertEqual(len(lines), 2 + 2 * 6)

    def test_trace_record_then_analyze(self):
        config = self.write("model.conf", "experts = 8\nbatch = 2\nseeds = 0\nmax_new_tokens = 5\n")
        trace = self.dir / "trace.csv"
        freq = self.dir / "freq.csv"
        self.call("trace", "record", "--config", config, "--out", str(trace))
        report = self.call("trace", "analyze", "--in", str(trace), "--out", str(freq))
        self.assertIn("skewness (top 25%):", report)
        self.assertIn("routed tokens: 10", report)
        self.assertEqual(len(freq.read_text(encoding="utf-8").splitlines()), 1 + 4 * 8)

    def test_trace_analyze_rejects_bad_file(self):
        bad = self.write("bad.csv", "not a trace\n")
        with self.assertRaises(CommandError) as ctx:
            self.call("trace", "analyze", "--in", bad)
        self.assertEqual(ctx.exception.returncode, 1)

    def test_selftest_passes_and_is_stable(self):
        out = self.dir / "selftest.txt"
        first = self.call("selftest", "--out", str(out))
        second = self.call("selftest")
        self.assertEqual(first, second)
        self.assertNotIn("FAIL", first)
        self.assertTrue(first.endswith("9/9 checks passed\n"))
        self.assertEqual(out.read_text(encoding="utf-8"), first)
