import io
from unittest import mock

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from core.exceptions import CapacityError
from memsim.services.keys import ExpertKey
from memsim.services.latency import StepTiming, step_latency
from memsim.services.ledger import MigrationLedger, export_ledger_csv, reset_ledger
from memsim.services.residency import ResidencyState, ensure_resident, flush_transients, pin_draft_experts
from memsim.services.tiers import Phase, Tier, TierConfig
from moe.services.spec import ModelSpec

SPEC = ModelSpec(num_layers=4, experts_per_block=16, top_k=2, hidden_dim=32, ffn_dim=64)
BPE = SPEC.bytes_per_expert  # 16384


def keys(*pairs):
    return [ExpertKey(layer, e) for layer, e in pairs]


class EnsureResidentTests(SimpleTestCase):
    def setUp(self):
        self.tier = TierConfig.for_model(SPEC)
        self.ledger = MigrationLedger()
        self.residency = ResidencyState(self.tier)

    def test_migrates_each_missing_expert_once(self):
        wanted = keys((0, 1), (0, 2), (1, 3))
        self.assertEqual(ensure_resident(wanted, Phase.VERIFICATION, self.ledger, self.residency), 49152)
        self.assertEqual(ensure_resident(wanted, Phase.VERIFICATION, self.ledger, self.residency), 0)
        self.assertEqual(self.ledger.count, 3)
        self.assertEqual(self.ledger.phase_total(Phase.VERIFICATION), 3 * BPE)

    def test_entries_in_sorted_key_order(self):
        ensure_resident(keys((1, 0), (0, 5), (0, 2)), Phase.BASELINE_STEP, self.ledger, self.residency, step=4)
        self.assertEqual([e.key for e in self.ledger.entries], keys((0, 2), (0, 5), (1, 0)))
        self.assertTrue(all(e.step == 4 for e in self.ledger.entries))

    def test_location_follows_offload_tier(self):
        key = ExpertKey(2, 7)
        self.assertEqual(self.residency.location(key), Tier.HOST)
        ensure_resident([key], Phase.BASELINE_STEP, self.ledger, self.residency)
        self.assertEqual(self.residency.location(key), Tier.DEVICE)
        flush_transients(self.residency)
        self.assertEqual(self.residency.location(key), Tier.HOST)

    def test_evicts_oldest_transient_when_full(self):
        residency = ResidencyState(self.tier.with_changes(device_capacity_bytes=2 * BPE))
        ensure_resident(keys((0, 0)), Phase.BASELINE_STEP, self.ledger, residency, step=0)
        ensure_resident(keys((0, 1)), Phase.BASELINE_STEP, self.ledger, residency, step=1)
        ensure_resident(keys((0, 2)), Phase.BASELINE_STEP, self.ledger, residency, step=2)
        self.assertEqual(residency.resident, frozenset(keys((0, 1), (0, 2))))
        residency.check()

    def test_capacity_error_when_nothing_evictable(self):
        residency = ResidencyState(self.tier.with_changes(device_capacity_bytes=2 * BPE))
        with self.assertRaises(CapacityError):
            ensure_resident(keys((0, 0), (0, 1), (0, 2)), Phase.VERIFICATION, self.ledger, residency)


class PinningTests(SimpleTestCase):
    def setUp(self):
        self.tier = TierConfig.for_model(SPEC)
        self.ledger = MigrationLedger()
        self.residency = ResidencyState(self.tier)

    def test_pinned_experts_survive_flush(self):
        pin_draft_experts(keys((0, 0), (0, 1)), self.residency, self.ledger, Phase.SETUP)
        ensure_resident(keys((0, 5)), Phase.VERIFICATION, self.ledger, self.residency)
        self.assertEqual(flush_transients(self.residency), 1)
        self.assertEqual(self.residency.resident, frozenset(keys((0, 0), (0, 1))))

    def test_repinning_resident_experts_is_free(self):
        pin_draft_experts(keys((0, 0), (0, 1)), self.residency, self.ledger, Phase.SETUP)
        ensure_resident(keys((0, 4)), Phase.VERIFICATION, self.ledger, self.residency)
        before = self.ledger.total
        moved = pin_draft_experts(keys((0, 1), (0, 4)), self.residency, self.ledger, Phase.VERIFICATION)
        self.assertEqual(moved, 0)
        self.assertEqual(self.ledger.total, before)
        self.assertFalse(self.residency.is_pinned(ExpertKey(0, 0)))
        self.assertTrue(self.residency.is_pinned(ExpertKey(0, 4)))

    def test_repinning_missing_experts_is_charged(self):
        pin_draft_experts(keys((0, 0)), self.residency, self.ledger, Phase.SETUP)
        moved = pin_draft_experts(keys((0, 9)), self.residency, self.ledger, Phase.VERIFICATION, step=3)
        self.assertEqual(moved, BPE)
        self.assertEqual(self.ledger.bytes_at(Phase.VERIFICATION, 3), BPE)

    def test_pin_set_larger_than_device(self):
        residency = ResidencyState(self.tier.with_changes(device_capacity_bytes=BPE))
        with self.assertRaises(CapacityError):
            pin_draft_experts(keys((0, 0), (0, 1)), residency, self.ledger, Phase.SETUP)

    def test_oversized_pin_set_keeps_the_current_pins(self):
        residency = ResidencyState(self.tier.with_changes(device_capacity_bytes=2 * BPE))
        pin_draft_experts(keys((0, 0), (0, 1)), residency, self.ledger, Phase.SETUP)
        with self.assertRaises(CapacityError):
            pin_draft_experts(keys((0, 1), (0, 2), (0, 3)), residency, self.ledger, Phase.VERIFICATION)
        self.assertEqual(residency.pinned, frozenset(keys((0, 0), (0, 1))))
        self.assertEqual(self.ledger.total, 2 * BPE)

    def test_failed_migration_restores_the_pins(self):
        pin_draft_experts(keys((0, 0), (0, 1)), self.residency, self.ledger, Phase.SETUP)
        with mock.patch("memsim.services.residency._make_room", side_effect=CapacityError("full")):
            with self.assertRaises(CapacityError):
                pin_draft_experts(keys((0, 1), (0, 7)), self.residency, self.ledger, Phase.VERIFICATION)
        self.assertEqual(self.residency.pinned, frozenset(keys((0, 0), (0, 1))))
        self.residency.check()


class LedgerTests(SimpleTestCase):
    def test_duplicates_and_snapshot(self):
        ledger = MigrationLedger()
        ledger.record(Phase.VERIFICATION, 0, (0, 1), 10)
        ledger.record(Phase.VERIFICATION, 1, (0, 1), 10)
        self.assertEqual(ledger.duplicates(), [])
        ledger.record(Phase.VERIFICATION, 1, (0, 1), 10)
        self.assertEqual(ledger.duplicates(), [(1, ExpertKey(0, 1))])
        snapshot = ledger.snapshot()
        self.assertEqual(snapshot.total, 30)
        self.assertEqual(snapshot.phase_total(Phase.SPECULATION), 0)
        reset_ledger(ledger)
        self.assertEqual((ledger.total, ledger.count), (0, 0))
        self.assertEqual(snapshot.count, 3)

    def test_csv_export(self):
        ledger = MigrationLedger()
        ledger.record(Phase.BASELINE_STEP, 2, (1, 3), 16384)
        stream = io.StringIO()
        self.assertEqual(export_ledger_csv(ledger, stream), 1)
        self.assertEqual(stream.getvalue(), "phase,step,layer,expert,bytes\nbaseline-step,2,1,3,16384\n")


class LatencyTests(SimpleTestCase):
    def setUp(self):
        self.tier = TierConfig(bytes_per_expert=BPE, device_capacity_bytes=10 ** 12,
                               compute_rate_tokens_per_s_base=1e3, compute_cost_per_active_expert_s=0.01)

    def test_migration_time_at_pcie_bandwidth(self):
        timing = step_latency(0, 0, 28 * 10 ** 9, self.tier)
        self.assertAlmostEqual(timing.migration_s, 0.4375, places=12)

    def test_serial_and_overlap(self):
        serial = step_latency(100, 10, 64 * 10 ** 9, self.tier)
        self.assertAlmostEqual(serial.compute_s, 0.2)
        self.assertAlmostEqual(serial.total_s, 1.2)
        overlap = step_latency(100, 10, 64 * 10 ** 9, self.tier, overlap_mode=True)
        self.assertAlmostEqual(overlap.total_s, 1.0)
        self.assertLessEqual(overlap.total_s, serial.total_s)

    def test_halving_bandwidth_doubles_migration(self):
        fast = step_latency(1, 1, 10 ** 9, self.tier)
        slow = step_latency(1, 1, 10 ** 9, self.tier.with_source_bandwidth(32e9))
        self.assertAlmostEqual(slow.migration_s, 2 * fast.migration_s)

    def test_ssd_tier_uses_ssd_bandwidth(self):
        tier = self.tier.with_changes(offload_tier=Tier.SSD, ssd_bandwidth_bytes_per_s=4e9).validate()
        self.assertAlmostEqual(step_latency(0, 0, 10 ** 9, tier).migration_s, 0.25)

    def test_negative_counts_rejected(self):
        with self.assertRaises(ValidationError):
            step_latency(-1, 0, 0, self.tier)

    def test_timings_add(self):
        total = StepTiming(1.0, 2.0, 3.0) + StepTiming(0.5, 0.5, 1.0)
        self.assertEqual(total, StepTiming(1.5, 2.5, 4.0))


class TierConfigTests(SimpleTestCase):
    def test_capacity_must_hold_draft_pins(self):
        tier = TierConfig.for_model(SPEC, device_capacity_bytes=7 * BPE)
        tier.validate(n_draft=1, num_moe_layers=4)
        with self.assertRaises(ValidationError):
            tier.validate(n_draft=2, num_moe_layers=4)

    def test_ssd_needs_bandwidth(self):
        with self.assertRaises(ValidationError):
            TierConfig.for_model(SPEC, offload_tier=Tier.SSD).validate()

    def test_default_capacity_holds_every_expert(self):
        self.assertEqual(TierConfig.for_model(SPEC).device_capacity_bytes, 64 * BPE)
