# specdec/services/engine.py
"""
The self-assisted speculative decoding loop on the offloading simulator.

Each round, for all unfinished sequences in lockstep:

1. speculate γ tokens with the pinned draft experts (no migration);
2. verify every sequence with the full model and migrate the union of
   experts the whole batch needs, once (coalesced);
3. count the verification's expert picks and, for hot_temporal, re-pin
   the hottest ones, which are already on the device;
4. advance each sequence by its own accepted tokens plus one and drop
   the step's transient experts.
"""
import logging
from typing import List, Optional, Sequence

from django.core.exceptions import ValidationError

from core.exceptions import LedgerInvariantError
from core.rng import SALT_DRAFT_POLICY, SALT_SEQUENCE, make_rng
from drafting.services.affinity import (
    AffinityTable,
    RemapMode,
    build_affinity_table,
    build_random_affinity_table,
)
from drafting.services.hotness import HotnessCounter, profile_hotness, record_activations
from drafting.services.policies import DraftPolicy, initial_draft_state, select_draft_experts
from memsim.services.latency import step_latency
from memsim.services.metrics import DecodeResult, RunMetrics
from memsim.services.residency import ResidencyState, ensure_resident, flush_transients, pin_draft_experts
from memsim.services.tiers import Phase, TierConfig
from moe.services.weights import ModelWeights
from specdec.services.config import SpecConfig
from specdec.services.speculation import speculate
from specdec.services.verification import verify_greedy, verify_sampling

logger = logging.getLogger(__name__)

ENGINE_NAME = "specmoe"


def _union(records) -> set:
    keys = set()
    for record in records:
        keys |= record.raw_keys()
    return keys


def resolve_affinity(weights: ModelWeights, remap: str, seed: int) -> AffinityTable:
    if remap == RemapMode.RANDOM:
        return build_random_affinity_table(weights.spec, seed)
    return build_affinity_table(weights)


def run_specmoe(
    weights: ModelWeights,
    config: SpecConfig,
    policy: str,
    tier: TierConfig,
    prompts: Sequence[Sequence[int]],
    n_draft: int = 4,
    seed: int = 0,
    warmup_steps: int = 64,
    remap: str = RemapMode.AFFINITY,
    affinity: Optional[AffinityTable] = None,
) -> DecodeResult:
    spec = weights.spec
    config.validate()
    if len(prompts) != config.batch:
        raise ValidationError(f"{len(prompts)} prompts for a batch of {config.batch}", code="batch")
    tier.validate(n_draft, len(spec.moe_layers))
    if affinity is None:
        affinity = resolve_affinity(weights, remap, seed)

    if policy == DraftPolicy.RANDOM:
        warmup = HotnessCounter.for_spec(spec)
    else:
        warmup = profile_hotness(weights, prompts, warmup_steps)
    policy_rng = make_rng(seed, SALT_DRAFT_POLICY)
    draft = initial_draft_state(policy, n_draft, warmup, policy_rng).validate(spec.top_k, spec.experts_per_block)

    metrics = RunMetrics(engine=ENGINE_NAME, batch=config.batch, gamma=config.gamma,
                         pinned_per_layer=n_draft, hotness=HotnessCounter.for_spec(spec))
    residency = ResidencyState(tier)
    pin_draft_experts(draft.keys(), residency, metrics.setup_ledger, Phase.SETUP)

    rngs = [make_rng(seed, SALT_SEQUENCE, i) for i in range(config.batch)]
    outputs: List[List[int]] = [[] for _ in prompts]
    window = HotnessCounter.for_spec(spec)
    bpe = tier.bytes_per_expert
    gamma = config.gamma
    active = list(range(config.batch))
    step = 0

    while active:
        prefixes = [list(prompts[i]) + outputs[i] for i in active]

        # speculation
        speculation = speculate(
            weights, draft, affinity, prefixes, gamma, metrics.ledger, residency,
            mode=config.mode, temperature=config.temperature, rngs=[rngs[i] for i in active],
        )
        for experts in speculation.iteration_experts:
            timing = step_latency(len(active), len(experts), 0, tier)
            metrics.timings.append(timing)
            metrics.draft_iteration_s.append(timing.total_s)

        # verification
        verdicts = []
        for i, prefix, proposal in zip(active, prefixes, speculation.proposals):
            if config.sampling:
                verdicts.append(verify_sampling(weights, prefix, proposal.tokens, proposal.q,
                                                config.temperature, rngs[i]))
            else:
                verdicts.append(verify_greedy(weights, prefix, proposal.tokens))
        needed = _union(v.record for v in verdicts)
        moved = ensure_resident(needed, Phase.VERIFICATION, metrics.ledger, residency, step)
        metrics.timings.append(step_latency(len(active) * (gamma + 1), len(needed), moved, tier))

        single = _union(v.position_records[0] for v in verdicts)
        verified = _union(r for v in verdicts for r in v.position_records[:gamma])
        metrics.single_reference_s.append(
            step_latency(len(active), len(single), len(single) * bpe, tier).total_s)
        metrics.verify_reference_s.append(
            step_latency(len(active) * gamma, len(verified), len(verified) * bpe, tier).total_s)

        # replacement
        window.reset()
        for verdict in verdicts:
            record_activations(window, verdict.record)
        metrics.hotness.merge(window)
        draft = draft.replaced(select_draft_experts(policy, window, draft, policy_rng))
        repinned = pin_draft_experts(draft.keys(), residency, metrics.ledger, Phase.VERIFICATION, step)
        metrics.repin_bytes.append(repinned)
        if repinned:
            metrics.timings.append(step_latency(0, 0, repinned, tier))
            if policy == DraftPolicy.HOT_TEMPORAL:
                raise LedgerInvariantError(f"hot_temporal replacement migrated {repinned} bytes at step {step}")

        # advance
        for i, proposal, verdict in zip(active, speculation.proposals, verdicts):
            produced = proposal.tokens[:verdict.accepted] + [verdict.token]
            metrics.generated_per_step.append(len(produced))
            room = config.max_new_tokens - len(outputs[i])
            outputs[i].extend(produced[:room])

        flush_transients(residency)
        logger.debug("step %d: %d active, %d experts verified, %d bytes", step, len(active), len(needed), moved)
        step += 1
        active = [i for i in active if len(outputs[i]) < config.max_new_tokens]

    metrics.steps = step
    metrics.tokens_emitted = sum(len(o) for o in outputs)
    return DecodeResult(outputs, metrics)
