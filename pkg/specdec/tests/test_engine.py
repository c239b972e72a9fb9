from statistics import mean

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from baselines.services.runners import run_ondemand
from drafting.services.affinity import RemapMode
from drafting.services.policies import DraftPolicy
from memsim.services.latency import step_latency
from memsim.services.metrics import RunMetrics
from memsim.services.tiers import Phase, TierConfig
from moe.services.decoding import DecodeMode
from moe.services.prompts import make_prompts
from moe.services.spec import ModelSpec
from moe.services.weights import build_model
from specdec.services.config import SpecConfig
from specdec.services.engine import run_specmoe
from specdec.services.speedup import (
    SpeedupInputs,
    lambda_by_batch,
    measure_lambda,
    speedup_eq1,
    speedup_eq2,
)

TOY = ModelSpec(num_layers=4, experts_per_block=16, top_k=2, hidden_dim=32, ffn_dim=64, vocab_size=64,
                gate_skew=1.5, seed=0)
WARMUP = 8


class LosslessnessTests(SimpleTestCase):
    """Greedy speculative output is the target model's greedy output, token for token."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.weights = build_model(TOY)
        cls.tier = TierConfig.for_model(TOY)

    def test_matches_ondemand_over_fifty_prompts(self):
        for seed in range(10):
            prompts = make_prompts(TOY, seed, 5)
            reference = run_ondemand(self.weights, prompts, self.tier, max_new_tokens=16, seed=seed).outputs
            for n_draft in (2, 4, 8, 16):
                for gamma in (5, 10):
                    config = SpecConfig(gamma=gamma, batch=5, max_new_tokens=16)
                    result = run_specmoe(self.weights, config, DraftPolicy.HOT_TEMPORAL, self.tier, prompts,
                                         n_draft=n_draft, seed=seed, warmup_steps=WARMUP)
                    with self.subTest(seed=seed, n_draft=n_draft, gamma=gamma):
                        self.assertEqual(result.outputs, reference)

    def test_every_policy_and_remap_is_lossless(self):
        prompts = make_prompts(TOY, 3, 2)
        reference = run_ondemand(self.weights, prompts, self.tier, max_new_tokens=12, seed=3).outputs
        for policy in DraftPolicy.values:
            for remap in RemapMode.values:
                config = SpecConfig(gamma=4, batch=2, max_new_tokens=12)
                result = run_specmoe(self.weights, config, policy, self.tier, prompts, n_draft=4, seed=3,
                                     warmup_steps=WARMUP, remap=remap)
                with self.subTest(policy=policy, remap=remap):
                    self.assertEqual(result.outputs, reference)

    def test_batching_does_not_change_outputs(self):
        prompts = make_prompts(TOY, 8, 4)
        config = SpecConfig(gamma=5, batch=4, max_new_tokens=10)
        batched = run_specmoe(self.weights, config, DraftPolicy.HOT_GLOBAL, self.tier, prompts, seed=8,
                              warmup_steps=WARMUP).outputs
        for prompt, output in zip(prompts, batched):
            alone = run_specmoe(self.weights, config.with_changes(batch=1), DraftPolicy.HOT_GLOBAL, self.tier,
                                [prompt], seed=8, warmup_steps=WARMUP).outputs[0]
            self.assertEqual(alone, output)


class LedgerInvariantTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.weights = build_model(TOY)
        cls.tier = TierConfig.for_model(TOY)

    def run_cell(self, policy, n_draft, seed, gamma=5, batch=3):
        prompts = make_prompts(TOY, seed, batch)
        config = SpecConfig(gamma=gamma, batch=batch, max_new_tokens=16)
        return run_specmoe(self.weights, config, policy, self.tier, prompts, n_draft=n_draft, seed=seed,
                           warmup_steps=WARMUP).metrics

    def test_speculation_moves_nothing_and_verification_coalesces(self):
        for policy in DraftPolicy.values:
            for n_draft in (2, 4, 8):
                for seed in (0, 1):
                    metrics = self.run_cell(policy, n_draft, seed)
                    with self.subTest(policy=policy, n_draft=n_draft, seed=seed):
                        self.assertEqual(metrics.bytes_spec, 0)
                        self.assertEqual(metrics.ledger.duplicates(Phase.VERIFICATION), [])
                        self.assertEqual(metrics.bytes_setup, n_draft * len(TOY.moe_layers) * TOY.bytes_per_expert)
                        self.assertTrue(1 <= metrics.tau <= 6)

    def test_hot_temporal_replacement_is_free(self):
        for seed in range(4):
            metrics = self.run_cell(DraftPolicy.HOT_TEMPORAL, 4, seed)
            self.assertEqual(metrics.repin_bytes, [0] * metrics.steps)

    def test_full_draft_set_accepts_everything(self):
        for gamma in (3, 5):
            metrics = self.run_cell(DraftPolicy.RANDOM, TOY.experts_per_block, 2, gamma=gamma)
            self.assertEqual(set(metrics.generated_per_step), {gamma + 1})
            self.assertEqual(metrics.tau, gamma + 1)

    def test_sampling_runs_are_reproducible(self):
        prompts = make_prompts(TOY, 5, 2)
        config = SpecConfig(gamma=4, batch=2, mode=DecodeMode.SAMPLING, temperature=0.9, max_new_tokens=10)
        a = run_specmoe(self.weights, config, DraftPolicy.HOT_TEMPORAL, self.tier, prompts, seed=5,
                        warmup_steps=WARMUP)
        b = run_specmoe(self.weights, config, DraftPolicy.HOT_TEMPORAL, self.tier, prompts, seed=5,
                        warmup_steps=WARMUP)
        self.assertEqual(a.outputs, b.outputs)
        self.assertEqual(a.metrics.ledger.entries, b.metrics.ledger.entries)
        self.assertTrue(all(len(o) == 10 for o in a.outputs))
        self.assertEqual(a.metrics.bytes_spec, 0)

    def test_prompt_count_must_match_batch(self):
        with self.assertRaises(ValidationError) as ctx:
            run_specmoe(self.weights, SpecConfig(batch=2), DraftPolicy.RANDOM, self.tier, make_prompts(TOY, 0, 1))
        self.assertEqual(ctx.exception.code, "batch")

    def test_capacity_must_hold_draft_pins(self):
        tier = self.tier.with_changes(device_capacity_bytes=TOY.bytes_per_expert * 7)
        with self.assertRaises(ValidationError):
            run_specmoe(self.weights, SpecConfig(batch=1), DraftPolicy.RANDOM, tier, make_prompts(TOY, 0, 1),
                        n_draft=2)


class DraftSizeTrendTests(SimpleTestCase):
    def test_mean_tau_grows_with_draft_size(self):
        weights = build_model(TOY)
        tier = TierConfig.for_model(TOY)
        taus = {}
        for n_draft in (2, 4, 8, 16):
            values = []
            for seed in range(20):
                config = SpecConfig(gamma=5, batch=1, max_new_tokens=16)
                result = run_specmoe(weights, config, DraftPolicy.HOT_GLOBAL, tier, make_prompts(TOY, seed, 1),
                                     n_draft=n_draft, seed=seed, warmup_steps=WARMUP)
                values.append(result.metrics.tau)
            taus[n_draft] = mean(values)
        self.assertEqual(taus[16], 6)
        for small, large in ((2, 4), (4, 8), (8, 16)):
            self.assertGreaterEqual(taus[large] + 0.1, taus[small])


class SpeedupTests(SimpleTestCase):
    def test_tabulated_examples(self):
        self.assertAlmostEqual(speedup_eq1(11, 10, 0.0), 11.0, delta=1e-12)
        self.assertAlmostEqual(speedup_eq2(1, 10, 0.0, 1.0), 1.0, delta=1e-12)
        self.assertAlmostEqual(speedup_eq2(7.265, 10, 0.05, 2.0), 2.906, delta=1e-12)
        self.assertAlmostEqual(speedup_eq1(6, 5, 0.2), 3.0, delta=1e-12)

    def test_domain_checks(self):
        for args in ((1, 0, 0.0), (1, 5, -0.1), (0.5, 5, 0.0), (7, 5, 0.0)):
            with self.subTest(args=args), self.assertRaises(ValidationError):
                speedup_eq1(*args)
        with self.assertRaises(ValidationError):
            speedup_eq2(2, 5, 0.1, 0.0)

    def test_inputs_from_metrics(self):
        metrics = RunMetrics(engine="specmoe", batch=1, gamma=4)
        metrics.generated_per_step.extend([5, 3])
        metrics.single_reference_s.extend([1.0, 1.0])
        metrics.verify_reference_s.extend([2.0, 4.0])
        metrics.draft_iteration_s.extend([0.1, 0.1])
        inputs = SpeedupInputs.from_metrics(metrics)
        self.assertEqual((inputs.tau, inputs.lam), (4.0, 3.0))
        self.assertAlmostEqual(inputs.c, 0.1)
        self.assertAlmostEqual(inputs.s_eq2, 4.0 / (4 * 0.1 + 3.0))


class LambdaTests(SimpleTestCase):
    def test_constructed_six_fold_expert_workload(self):
        spec = ModelSpec(experts_per_block=32, top_k=2)
        tier = TierConfig.for_model(spec)
        bpe = tier.bytes_per_expert
        metrics = RunMetrics(engine="specmoe", batch=1, gamma=8)
        # one token touches K experts in each of 4 layers; eight touch six times as many
        single = step_latency(1, 8, 8 * bpe, tier)
        verify = step_latency(8, 48, 48 * bpe, tier)
        metrics.single_reference_s.append(single.total_s)
        metrics.verify_reference_s.append(verify.total_s)
        self.assertAlmostEqual(measure_lambda(metrics), 6.0, delta=1.0)

    def test_gamma_one_gives_unit_lambda(self):
        weights = build_model(TOY)
        prompts = make_prompts(TOY, 0, 2)
        result = run_specmoe(weights, SpecConfig(gamma=1, batch=2, max_new_tokens=8), DraftPolicy.HOT_GLOBAL,
                             TierConfig.for_model(TOY), prompts, warmup_steps=WARMUP)
        self.assertAlmostEqual(measure_lambda(result.metrics), 1.0, delta=1e-12)

    def test_lambda_shrinks_as_batch_grows(self):
        weights = build_model(TOY)
        tier = TierConfig.for_model(TOY)
        runs = []
        for batch in (1, 8, 32):
            for seed in range(3):
                config = SpecConfig(gamma=8, batch=batch, max_new_tokens=12)
                runs.append(run_specmoe(weights, config, DraftPolicy.HOT_GLOBAL, tier,
                                        make_prompts(TOY, seed, batch), seed=seed, warmup_steps=WARMUP).metrics)
        lam = lambda_by_batch(runs)
        self.assertGreater(lam[1], lam[8])
        self.assertGreater(lam[8], lam[32])

    def test_empty_run(self):
        with self.assertRaises(ValidationError):
            measure_lambda(RunMetrics(engine="specmoe", batch=1))
