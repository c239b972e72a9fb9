# drafting/services/hotness.py
"""
Expert hotness: activation counts per MoE layer, the skewness metric, and
the greedy warmup that profiles a model before its draft set is frozen.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from moe.services.decoding import greedy_next
from moe.services.forward import forward
from moe.services.spec import ActivationRecord, ModelSpec
from moe.services.weights import ModelWeights

logger = logging.getLogger(__name__)


@dataclass
class HotnessCounter:
    """
    Per MoE layer, how often each expert was picked by the gate, and how
    many tokens were routed through that layer in the window.
    """
    experts: int
    layers: Tuple[int, ...]
    counts: Dict[int, np.ndarray] = field(default_factory=dict)
    routed: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for layer in self.layers:
            self.counts.setdefault(layer, np.zeros(self.experts, dtype=np.int64))
            self.routed.setdefault(layer, 0)

    @classmethod
    def for_spec(cls, spec: ModelSpec) -> "HotnessCounter":
        return cls(experts=spec.experts_per_block, layers=spec.moe_layers)

    @property
    def routed_tokens(self) -> int:
        return max(self.routed.values(), default=0)

    @property
    def is_empty(self) -> bool:
        return not any(int(c.sum()) for c in self.counts.values())

    def add(self, layer: int, picks: Sequence[int]) -> None:
        if layer not in self.counts:
            raise ValidationError(f"layer {layer} is not an MoE layer of this counter", code="layer")
        for expert in picks:
            if not 0 <= expert < self.experts:
                raise ValidationError(f"expert {expert} out of range [0, {self.experts})", code="expert")
            self.counts[layer][expert] += 1
        self.routed[layer] += 1

    def reset(self) -> "HotnessCounter":
        for layer in self.layers:
            self.counts[layer][:] = 0
            self.routed[layer] = 0
        return self

    def copy(self) -> "HotnessCounter":
        return HotnessCounter(
            experts=self.experts, layers=self.layers,
            counts={layer: c.copy() for layer, c in self.counts.items()},
            routed=dict(self.routed),
        )

    def merge(self, other: "HotnessCounter") -> "HotnessCounter":
        for layer in other.layers:
            self.counts[layer] += other.counts[layer]
            self.routed[layer] += other.routed[layer]
        return self

    def top(self, layer: int, n: int) -> List[int]:
        """The ``n`` most-picked experts of ``layer``; the lower index wins ties."""
        order = np.argsort(-self.counts[layer], kind="stable")
        return [int(e) for e in order[:n]]

    def equals(self, other: "HotnessCounter") -> bool:
        return (
            self.experts == other.experts and self.layers == other.layers
            and all(np.array_equal(self.counts[l], other.counts[l]) for l in self.layers)
            and self.routed == other.routed
        )


def record_activations(counter: HotnessCounter, record: ActivationRecord) -> HotnessCounter:
    """Count the gate's raw picks, one per pick, for every row of a target-model record."""
    for row in record:
        counter.add(row.layer, row.raw)
    return counter


def skewness(counter: HotnessCounter, top_fraction: float = 0.25) -> float:
    """
    Share of routed picks covered by the hottest ``top_fraction`` of experts,
    averaged over the MoE layers that saw any tokens.
    """
    if not 0 < top_fraction <= 1:
        raise ValidationError(f"top_fraction must be in (0, 1], got {top_fraction}", code="top_fraction")
    if counter.experts * top_fraction < 1:
        raise ValidationError(
            f"top {top_fraction:.0%} of {counter.experts} experts is less than one expert", code="experts"
        )
    top_n = math.ceil(top_fraction * counter.experts)
    shares = []
    for layer in counter.layers:
        counts = counter.counts[layer]
        total = int(counts.sum())
        if total == 0:
            continue
        hottest = np.sort(counts)[::-1][:top_n]
        shares.append(int(hottest.sum()) / total)
    if not shares:
        raise ValidationError("no routed tokens to measure skewness on", code="empty_trace")
    return float(np.mean(shares))


def profile_hotness(weights: ModelWeights, prompts: Iterable[Sequence[int]], steps: int) -> HotnessCounter:
    """
    Greedy-decode ``steps`` tokens from each prompt with the full model and
    count every routed pick. Runs outside any ledger.
    """
    if steps < 1:
        raise ValidationError(f"warmup_steps ≥ 1 violated: {steps}", code="warmup")
    counter = HotnessCounter.for_spec(weights.spec)
    for prompt in prompts:
        prefix = list(prompt)
        for _ in range(steps):
            result = forward(weights, prefix)
            record_activations(counter, result.record)
            prefix.append(greedy_next(result.logits))
    logger.debug("warmup profiled %d routed tokens", counter.routed_tokens)
    return counter
