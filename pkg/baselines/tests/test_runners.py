from collections import defaultdict

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from baselines.services.config import BaselineConfig, BaselineKind
from baselines.services.runners import run_baseline, run_caching, run_ondemand, run_overlap
from core.exceptions import CapacityError
from drafting.services.policies import DraftPolicy
from memsim.services.tiers import Phase, TierConfig
from moe.services.prompts import make_prompts
from moe.services.spec import ModelSpec
from moe.services.weights import build_model
from specdec.services.config import SpecConfig
from specdec.services.engine import run_specmoe

TOY = ModelSpec(num_layers=4, experts_per_block=16, top_k=2, hidden_dim=32, ffn_dim=64, vocab_size=64,
                gate_skew=1.5, seed=0)


class BaselineConfigTests(SimpleTestCase):
    def test_cache_size_rounds_up(self):
        self.assertEqual(BaselineConfig(kind=BaselineKind.CACHING).cache_size(128), 13)
        self.assertEqual(BaselineConfig(kind=BaselineKind.CACHING).cache_size(16), 2)
        self.assertEqual(BaselineConfig(kind=BaselineKind.ONDEMAND).cache_size(128), 0)

    def test_fraction_bounds(self):
        with self.assertRaises(ValidationError):
            BaselineConfig(kind=BaselineKind.CACHING, cache_fraction=0.0).validate()
        with self.assertRaises(ValidationError):
            BaselineConfig(kind="prefetch").validate()


class BaselineRunTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.weights = build_model(TOY)
        cls.tier = TierConfig.for_model(TOY)

    def test_all_baselines_emit_the_same_tokens(self):
        prompts = make_prompts(TOY, 1, 3)
        outputs = {
            kind: run_baseline(self.weights, prompts, self.tier, BaselineConfig(kind=kind, warmup_steps=8),
                               max_new_tokens=12, seed=1).outputs
            for kind in BaselineKind.values
        }
        self.assertEqual(outputs[BaselineKind.ONDEMAND], outputs[BaselineKind.OVERLAP])
        self.assertEqual(outputs[BaselineKind.ONDEMAND], outputs[BaselineKind.CACHING])

    def test_max_new_tokens_must_be_positive(self):
        with self.assertRaises(ValidationError) as ctx:
            run_ondemand(self.weights, make_prompts(TOY, 0, 1), self.tier, max_new_tokens=0)
        self.assertEqual(ctx.exception.code, "max_new_tokens")

    def test_step_bytes_are_the_union_of_routed_experts(self):
        picks = defaultdict(set)

        def sink(step, sequence, layer, raw):
            picks[step].update((layer, e) for e in raw)

        result = run_ondemand(self.weights, make_prompts(TOY, 2, 2), self.tier, max_new_tokens=10, trace=sink)
        expected = sum(len(keys) for keys in picks.values()) * TOY.bytes_per_expert
        self.assertEqual(result.metrics.bytes_baseline, expected)
        self.assertEqual(result.metrics.bytes_total, expected)
        self.assertEqual(result.metrics.steps, 10)
        self.assertEqual(result.metrics.tokens_emitted, 20)

    def test_duplicate_prompts_are_fetched_once(self):
        prompt = make_prompts(TOY, 4, 1)[0]
        single = run_ondemand(self.weights, [prompt], self.tier, max_new_tokens=8).metrics
        double = run_ondemand(self.weights, [prompt, list(prompt)], self.tier, max_new_tokens=8).metrics
        for step in range(8):
            self.assertEqual(single.ledger.bytes_at(Phase.BASELINE_STEP, step),
                             double.ledger.bytes_at(Phase.BASELINE_STEP, step))

    def test_overlap_keeps_the_ledger_and_hides_latency(self):
        prompts = make_prompts(TOY, 0, 2)
        ondemand = run_ondemand(self.weights, prompts, self.tier, max_new_tokens=12).metrics
        overlap = run_overlap(self.weights, prompts, self.tier, max_new_tokens=12).metrics
        self.assertEqual(ondemand.ledger.entries, overlap.ledger.entries)
        for serial, hidden in zip(ondemand.timings, overlap.timings):
            self.assertLessEqual(hidden.total_s, serial.total_s)
            self.assertEqual(hidden.total_s, max(serial.compute_s, serial.migration_s))
        self.assertLess(overlap.total_s, ondemand.total_s)

    def test_caching_never_fetches_cached_experts(self):
        prompts = make_prompts(TOY, 3, 4)
        config = BaselineConfig(kind=BaselineKind.CACHING, warmup_steps=8)
        caching = run_caching(self.weights, prompts, self.tier, config, max_new_tokens=12).metrics
        ondemand = run_ondemand(self.weights, prompts, self.tier, max_new_tokens=12).metrics
        cached = {entry.key for entry in caching.setup_ledger.entries}
        self.assertEqual(len(cached), 2 * len(TOY.moe_layers))
        self.assertFalse(cached & {entry.key for entry in caching.ledger.entries})
        self.assertLess(caching.bytes_total, ondemand.bytes_total)
        self.assertEqual(caching.bytes_setup, len(cached) * TOY.bytes_per_expert)

    def test_cache_larger_than_device(self):
        tier = self.tier.with_changes(device_capacity_bytes=TOY.bytes_per_expert * 4)
        with self.assertRaises(CapacityError):
            run_caching(self.weights, make_prompts(TOY, 0, 1), tier,
                        BaselineConfig(kind=BaselineKind.CACHING, cache_fraction=0.5, warmup_steps=2))

    def test_speculative_decoding_matches_baseline_tokens(self):
        prompts = make_prompts(TOY, 6, 2)
        baseline = run_ondemand(self.weights, prompts, self.tier, max_new_tokens=12, seed=6)
        speculative = run_specmoe(self.weights, SpecConfig(gamma=5, batch=2, max_new_tokens=12),
                                  DraftPolicy.HOT_TEMPORAL, self.tier, prompts, seed=6, warmup_steps=8)
        self.assertEqual(speculative.outputs, baseline.outputs)
        self.assertEqual(speculative.metrics.bytes_spec, 0)
