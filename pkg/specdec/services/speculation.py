# specdec/services/speculation.py
"""
Speculation phase: the draft model (non-expert weights plus the pinned
draft experts) proposes γ tokens per sequence without touching the ledger.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from django.core.exceptions import ValidationError

from core.exceptions import DraftResidencyError, LedgerInvariantError
from drafting.services.affinity import AffinityTable
from drafting.services.policies import DraftState
from memsim.services.ledger import MigrationLedger
from memsim.services.residency import ResidencyState
from moe.services.decoding import DecodeMode, greedy_next, sample_from_probs, temperature_probs
from moe.services.forward import forward
from moe.services.spec import ActivationRecord
from moe.services.weights import ModelWeights

logger = logging.getLogger(__name__)


@dataclass
class DraftProposal:
    tokens: List[int] = field(default_factory=list)
    # draft distribution each token was sampled from (sampling mode only)
    q: List[np.ndarray] = field(default_factory=list)
    records: List[ActivationRecord] = field(default_factory=list)


@dataclass
class Speculation:
    proposals: List[DraftProposal]
    # experts used across the batch, per autoregressive draft iteration
    iteration_experts: List[set]


def check_draft_residency(draft: DraftState, residency: ResidencyState) -> None:
    for key in draft.keys():
        if not residency.is_pinned(key) or not residency.is_resident(key):
            raise DraftResidencyError(f"draft expert {key} is not pinned on the device")


def speculate(
    weights: ModelWeights,
    draft: DraftState,
    affinity: AffinityTable,
    prefixes: Sequence[Sequence[int]],
    gamma: int,
    ledger: MigrationLedger,
    residency: ResidencyState,
    mode: str = DecodeMode.GREEDY,
    temperature: float = 1.0,
    rngs: Optional[Sequence[np.random.Generator]] = None,
) -> Speculation:
    """Generate ``gamma`` draft tokens for every prefix using only device-resident experts."""
    check_draft_residency(draft, residency)
    before = ledger.snapshot()
    sampling = mode == DecodeMode.SAMPLING
    if sampling and (rngs is None or len(rngs) != len(prefixes)):
        raise ValidationError("sampling speculation needs one generator per sequence", code="rngs")

    allowed = draft.restricted()
    pinned = set(draft.keys())
    proposals = [DraftProposal() for _ in prefixes]
    iteration_experts = []

    for _ in range(gamma):
        used = set()
        for index, prefix in enumerate(prefixes):
            proposal = proposals[index]
            result = forward(weights, list(prefix) + proposal.tokens, allowed, affinity)
            touched = result.record.final_keys()
            if not touched <= pinned:
                raise DraftResidencyError(f"draft pass used unpinned experts {sorted(touched - pinned)}")
            used |= touched
            if sampling:
                q = temperature_probs(result.logits, temperature)
                token = sample_from_probs(q, rngs[index])
                proposal.q.append(q)
            else:
                token = greedy_next(result.logits)
            proposal.tokens.append(token)
            proposal.records.append(result.record)
        iteration_experts.append(used)

    if ledger.total != before.total or ledger.count != before.count:
        raise LedgerInvariantError(
            f"speculation migrated {ledger.total - before.total} bytes; it must migrate none"
        )
    return Speculation(proposals=proposals, iteration_experts=iteration_experts)
