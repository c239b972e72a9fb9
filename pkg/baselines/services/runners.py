# baselines/services/runners.py
"""
The comparison systems: plain target decoding with experts fetched on
demand, the same with migration hidden behind compute (oracle overlap),
and on-demand decoding around a static cache of warmup-hot experts.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

from django.core.exceptions import ValidationError

from baselines.services.config import BaselineConfig, BaselineKind
from core.exceptions import CapacityError
from core.rng import SALT_SEQUENCE, make_rng
from drafting.services.hotness import HotnessCounter, profile_hotness, record_activations
from memsim.services.keys import ExpertKey
from memsim.services.latency import step_latency
from memsim.services.metrics import DecodeResult, RunMetrics
from memsim.services.residency import ResidencyState, ensure_resident, flush_transients, pin_draft_experts
from memsim.services.tiers import Phase, TierConfig
from moe.services.decoding import DecodeMode, greedy_next, sample_next
from moe.services.forward import forward
from moe.services.weights import ModelWeights

logger = logging.getLogger(__name__)

# step, sequence, layer, raw expert picks
TraceSink = Callable[[int, int, int, Tuple[int, ...]], None]


# -------------------------------------------------------------------
# SHARED TARGET LOOP
# -------------------------------------------------------------------
def _decode_target(
    weights: ModelWeights,
    prompts: Sequence[Sequence[int]],
    tier: TierConfig,
    metrics: RunMetrics,
    residency: ResidencyState,
    overlap: bool,
    mode: str,
    temperature: float,
    max_new_tokens: int,
    seed: int,
    trace: Optional[TraceSink],
) -> List[List[int]]:
    if max_new_tokens < 1:
        raise ValidationError(f"max_new_tokens ≥ 1 violated: {max_new_tokens}", code="max_new_tokens")
    rngs = [make_rng(seed, SALT_SEQUENCE, i) for i in range(len(prompts))]
    outputs: List[List[int]] = [[] for _ in prompts]
    active = list(range(len(prompts)))
    step = 0

    while active:
        needed = set()
        for i in active:
            result = forward(weights, list(prompts[i]) + outputs[i])
            needed |= result.record.raw_keys()
            record_activations(metrics.hotness, result.record)
            if trace is not None:
                for row in result.record:
                    trace(step, i, row.layer, row.raw)
            if mode == DecodeMode.SAMPLING:
                outputs[i].append(sample_next(result.logits, temperature, rngs[i]))
            else:
                outputs[i].append(greedy_next(result.logits))
            metrics.generated_per_step.append(1)

        moved = ensure_resident(needed, Phase.BASELINE_STEP, metrics.ledger, residency, step)
        timing = step_latency(len(active), len(needed), moved, tier, overlap_mode=overlap)
        metrics.timings.append(timing)
        metrics.single_reference_s.append(timing.total_s)
        flush_transients(residency)
        step += 1
        active = [i for i in active if len(outputs[i]) < max_new_tokens]

    metrics.steps = step
    metrics.tokens_emitted = sum(len(o) for o in outputs)
    return outputs


def _new_metrics(engine: str, weights: ModelWeights, batch: int) -> RunMetrics:
    return RunMetrics(engine=engine, batch=batch, hotness=HotnessCounter.for_spec(weights.spec))


# -------------------------------------------------------------------
# BASELINES
# -------------------------------------------------------------------
def run_ondemand(weights: ModelWeights, prompts: Sequence[Sequence[int]], tier: TierConfig,
                 mode: str = DecodeMode.GREEDY, temperature: float = 1.0, max_new_tokens: int = 32,
                 seed: int = 0, trace: Optional[TraceSink] = None) -> DecodeResult:
    """Fetch every step's experts, coalesced across the batch, and drop them after the step."""
    tier.validate()
    metrics = _new_metrics(BaselineKind.ONDEMAND, weights, len(prompts))
    outputs = _decode_target(weights, prompts, tier, metrics, ResidencyState(tier), False,
                             mode, temperature, max_new_tokens, seed, trace)
    return DecodeResult(outputs, metrics)


def run_overlap(weights: ModelWeights, prompts: Sequence[Sequence[int]], tier: TierConfig,
                mode: str = DecodeMode.GREEDY, temperature: float = 1.0, max_new_tokens: int = 32,
                seed: int = 0, trace: Optional[TraceSink] = None) -> DecodeResult:
    """On-demand transfers, but each step costs max(compute, migration)."""
    tier.validate()
    metrics = _new_metrics(BaselineKind.OVERLAP, weights, len(prompts))
    outputs = _decode_target(weights, prompts, tier, metrics, ResidencyState(tier), True,
                             mode, temperature, max_new_tokens, seed, trace)
    return DecodeResult(outputs, metrics)


def cached_experts(warmup: HotnessCounter, size: int) -> List[ExpertKey]:
    return [ExpertKey(layer, e) for layer in warmup.layers for e in sorted(warmup.top(layer, size))]


def run_caching(weights: ModelWeights, prompts: Sequence[Sequence[int]], tier: TierConfig,
                config: BaselineConfig = BaselineConfig(kind=BaselineKind.CACHING),
                mode: str = DecodeMode.GREEDY, temperature: float = 1.0, max_new_tokens: int = 32,
                seed: int = 0, trace: Optional[TraceSink] = None) -> DecodeResult:
    """
    Pin the ⌈fraction·E⌉ hottest experts per layer from a greedy warmup,
    then decode on demand around them. The cache fill goes to the setup
    ledger; steady-state misses go to the main ledger.
    """
    config.validate()
    tier.validate()
    spec = weights.spec
    size = config.cache_size(spec.experts_per_block)
    cache_bytes = size * len(spec.moe_layers) * tier.bytes_per_expert
    if cache_bytes > tier.device_capacity_bytes:
        raise CapacityError(f"cache of {cache_bytes} bytes exceeds device capacity {tier.device_capacity_bytes}")

    warmup = profile_hotness(weights, prompts, config.warmup_steps)
    metrics = _new_metrics(BaselineKind.CACHING, weights, len(prompts))
    metrics.pinned_per_layer = size
    residency = ResidencyState(tier)
    pin_draft_experts(cached_experts(warmup, size), residency, metrics.setup_ledger, Phase.SETUP)
    outputs = _decode_target(weights, prompts, tier, metrics, residency, False,
                             mode, temperature, max_new_tokens, seed, trace)
    logger.debug("caching: %d experts per layer pinned, %d steady-state bytes", size, metrics.bytes_total)
    return DecodeResult(outputs, metrics)


def run_baseline(weights: ModelWeights, prompts: Sequence[Sequence[int]], tier: TierConfig,
                 config: BaselineConfig, **kwargs) -> DecodeResult:
    config.validate()
    if config.kind == BaselineKind.CACHING:
        return run_caching(weights, prompts, tier, config, **kwargs)
    if config.kind == BaselineKind.OVERLAP:
        return run_overlap(weights, prompts, tier, **kwargs)
    return run_ondemand(weights, prompts, tier, **kwargs)
