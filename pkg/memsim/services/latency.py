# memsim/services/latency.py
"""
Linear cost model of one decoding step.

    compute_s   = active_tokens / compute_rate
                  + distinct_active_experts * compute_cost_per_active_expert
    migration_s = bytes_migrated / bandwidth of the offload tier
    total_s     = compute_s + migration_s      (serial)
                = max(compute_s, migration_s)  (oracle overlap)
"""
from dataclasses import dataclass

from django.core.exceptions import ValidationError

from memsim.services.tiers import TierConfig


@dataclass(frozen=True)
class StepTiming:
    compute_s: float
    migration_s: float
    total_s: float
    overlap_mode: bool = False

    def __add__(self, other: "StepTiming") -> "StepTiming":
        return StepTiming(
            compute_s=self.compute_s + other.compute_s,
            migration_s=self.migration_s + other.migration_s,
            total_s=self.total_s + other.total_s,
            overlap_mode=self.overlap_mode and other.overlap_mode,
        )


ZERO_TIMING = StepTiming(0.0, 0.0, 0.0)


def migration_seconds(bytes_migrated: int, tier: TierConfig) -> float:
    return bytes_migrated / tier.source_bandwidth


def step_latency(active_tokens: int, distinct_active_experts: int, bytes_migrated: int,
                 tier: TierConfig, overlap_mode: bool = False) -> StepTiming:
    if active_tokens < 0 or distinct_active_experts < 0 or bytes_migrated < 0:
        raise ValidationError(
            f"counts must be ≥ 0: tokens={active_tokens}, experts={distinct_active_experts}, "
            f"bytes={bytes_migrated}",
            code="counts",
        )
    compute = (active_tokens / tier.compute_rate_tokens_per_s_base
               + distinct_active_experts * tier.compute_cost_per_active_expert_s)
    migration = migration_seconds(bytes_migrated, tier)
    total = max(compute, migration) if overlap_mode else compute + migration
    return StepTiming(compute_s=compute, migration_s=migration, total_s=total, overlap_mode=overlap_mode)
