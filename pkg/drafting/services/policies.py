# drafting/services/policies.py
"""
Draft-expert selection: which N experts per MoE layer the draft model may
use, chosen once (random, hot_global) or after every verification
(hot_temporal).
"""
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional

import numpy as np
from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from drafting.services.hotness import HotnessCounter
from memsim.services.keys import ExpertKey


class DraftPolicy(models.TextChoices):
    RANDOM = "random", _("Random")
    HOT_GLOBAL = "hot_global", _("Hot-Global (static, warmup profile)")
    HOT_TEMPORAL = "hot_temporal", _("Hot-Temporal (replaced every step)")


@dataclass(frozen=True)
class DraftState:
    policy: str
    n_draft: int
    sets: Dict[int, FrozenSet[int]]

    def keys(self) -> List[ExpertKey]:
        return [ExpertKey(layer, e) for layer in sorted(self.sets) for e in sorted(self.sets[layer])]

    def restricted(self) -> Dict[int, FrozenSet[int]]:
        return dict(self.sets)

    def replaced(self, sets: Dict[int, FrozenSet[int]]) -> "DraftState":
        return DraftState(policy=self.policy, n_draft=self.n_draft, sets=sets)

    def validate(self, top_k: int, experts: int) -> "DraftState":
        if self.n_draft < top_k:
            raise ValidationError(f"N ≥ K violated: N={self.n_draft}, K={top_k}", code="n_draft")
        if self.n_draft > experts:
            raise ValidationError(f"N ≤ E violated: N={self.n_draft}, E={experts}", code="n_draft")
        for layer, chosen in self.sets.items():
            if len(chosen) != self.n_draft or not all(0 <= e < experts for e in chosen):
                raise ValidationError(
                    f"layer {layer}: draft set must hold {self.n_draft} distinct experts < {experts}",
                    code="draft_set",
                )
        return self


# -------------------------------------------------------------------
# SELECTION
# -------------------------------------------------------------------
def _check_n(n_draft: int, experts: int) -> None:
    if n_draft > experts:
        raise ValidationError(f"N ≤ E violated: N={n_draft}, E={experts}", code="n_draft")
    if n_draft < 1:
        raise ValidationError(f"N ≥ 1 violated: N={n_draft}", code="n_draft")


def _temporal_set(counts: np.ndarray, current: FrozenSet[int], n_draft: int) -> FrozenSet[int]:
    if not counts.any():
        return current
    order = np.argsort(-counts, kind="stable")
    chosen = [int(e) for e in order if counts[e] > 0][:n_draft]
    # fewer than N activated: keep the lowest-index current members to fill up
    for e in sorted(current):
        if len(chosen) >= n_draft:
            break
        if e not in chosen:
            chosen.append(e)
    return frozenset(chosen)


def select_draft_experts(policy: str, counter: HotnessCounter, current: Optional[DraftState],
                         rng: np.random.Generator, n_draft: Optional[int] = None) -> Dict[int, FrozenSet[int]]:
    """
    Per MoE layer, the N experts the draft model should use next.

    With ``current=None`` this is the start-up choice: uniform picks for
    random, top-N of ``counter`` (the warmup profile) for the hot policies.
    Afterwards random and hot_global keep their set; hot_temporal takes the
    top-N of ``counter`` (the last verification's counts).
    """
    n = current.n_draft if current is not None else n_draft
    if n is None:
        raise ValidationError("the start-up selection needs n_draft", code="n_draft")
    _check_n(n, counter.experts)

    if current is None:
        if policy == DraftPolicy.RANDOM:
            return {
                layer: frozenset(int(e) for e in rng.choice(counter.experts, size=n, replace=False))
                for layer in counter.layers
            }
        return {layer: frozenset(counter.top(layer, n)) for layer in counter.layers}

    if policy != DraftPolicy.HOT_TEMPORAL:
        return current.restricted()
    return {layer: _temporal_set(counter.counts[layer], current.sets[layer], n) for layer in counter.layers}


def initial_draft_state(policy: str, n_draft: int, warmup: HotnessCounter,
                        rng: np.random.Generator) -> DraftState:
    if policy not in DraftPolicy.values:
        raise ValidationError(f"unknown draft policy {policy!r}", code="policy")
    sets = select_draft_experts(policy, warmup, None, rng, n_draft=n_draft)
    return DraftState(policy=policy, n_draft=n_draft, sets=sets)
