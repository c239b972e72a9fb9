# moe/services/forward.py
"""
Forward pass of the toy decoder for the last token of a prefix.

There is no KV cache: each call recomputes from the full prefix. Attention
is replaced by a single tanh(mean(prefix embeddings) @ M_l) term per layer.
"""
from typing import Dict, FrozenSet, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from django.core.exceptions import ValidationError

from drafting.services.affinity import AffinityTable, nearest_draft_expert
from moe.services.routing import route_topk, softmax
from moe.services.spec import ActivationRecord, RoutingRow
from moe.services.weights import ModelWeights


class ForwardResult(NamedTuple):
    logits: np.ndarray
    record: ActivationRecord


# -------------------------------------------------------------------
# INPUT CHECKS
# -------------------------------------------------------------------
def _check_prefix(prefix: Sequence[int], vocab_size: int) -> np.ndarray:
    tokens = np.asarray(prefix, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValidationError("prefix must be a non-empty token sequence", code="prefix")
    if tokens.min() < 0 or tokens.max() >= vocab_size:
        raise ValidationError(f"token out of range [0, {vocab_size})", code="token_range")
    return tokens


def _check_restriction(
    restricted: Optional[Mapping[int, Sequence[int]]],
    weights: ModelWeights,
    affinity: Optional[AffinityTable],
) -> Optional[Dict[int, FrozenSet[int]]]:
    if restricted is None:
        return None
    spec = weights.spec
    if affinity is None:
        raise ValidationError("a restricted forward needs an affinity table for remapping", code="affinity")
    sets = {}
    for layer in spec.moe_layers:
        if layer not in restricted:
            raise ValidationError(f"no allowed expert set for MoE layer {layer}", code="restricted")
        allowed = frozenset(int(e) for e in restricted[layer])
        if len(allowed) < spec.top_k:
            raise ValidationError(
                f"restricted set for layer {layer} has {len(allowed)} experts, fewer than K={spec.top_k}",
                code="restricted",
            )
        if min(allowed) < 0 or max(allowed) >= spec.experts_per_block:
            raise ValidationError(f"restricted set for layer {layer} has an out-of-range expert", code="restricted")
        sets[layer] = allowed
    return sets


# -------------------------------------------------------------------
# BUILDING BLOCKS
# -------------------------------------------------------------------
def effective_gate_bias(weights: ModelWeights, layer: int, prefix_len: int) -> np.ndarray:
    """Static bias, rotated by one expert every ``hotness_drift_period`` positions when drift is on."""
    bias = weights.gate_bias[layer]
    period = weights.spec.hotness_drift_period
    if period <= 0:
        return bias
    shift = (prefix_len // period) % weights.spec.experts_per_block
    return np.roll(bias, shift)


def expert_output(weights: ModelWeights, layer: int, expert: int, h: np.ndarray) -> np.ndarray:
    up = weights.expert_up[layer][expert]
    down = weights.expert_down[layer][expert]
    return np.maximum(h @ up, 0.0) @ down


def remap_to_draft(
    affinity: AffinityTable, layer: int, raw: Sequence[int], draft_set: FrozenSet[int]
) -> tuple:
    """Map each raw pick onto its nearest draft expert, never reusing one for the same token."""
    chosen = []
    for pick in raw:
        chosen.append(nearest_draft_expert(affinity, layer, pick, draft_set, excluded=chosen))
    return tuple(chosen)


# -------------------------------------------------------------------
# FORWARD
# -------------------------------------------------------------------
def forward(
    weights: ModelWeights,
    prefix: Sequence[int],
    restricted_experts: Optional[Mapping[int, Sequence[int]]] = None,
    affinity: Optional[AffinityTable] = None,
) -> ForwardResult:
    """
    Next-token logits for ``prefix`` plus the routing of its last token.

    Without ``restricted_experts`` the gate's raw top-K is used (target
    model). With it, picks outside the allowed set are remapped through the
    affinity table (draft model). Either way each expert's output is scaled
    by the softmax gate weight of the raw pick it stands in for.
    """
    spec = weights.spec
    tokens = _check_prefix(prefix, spec.vocab_size)
    draft_sets = _check_restriction(restricted_experts, weights, affinity)

    embedded = weights.embeddings[tokens]
    context = embedded.mean(axis=0)
    h = embedded[-1].copy()
    position = int(tokens.size) - 1
    rows = []

    for layer in range(spec.num_layers):
        h = h + np.tanh(context @ weights.mixing[layer])
        if spec.moe_layer_mask[layer]:
            gate_logits = h @ weights.gate[layer] + effective_gate_bias(weights, layer, tokens.size)
            gate_probs = softmax(gate_logits)
            raw = route_topk(gate_logits, spec.top_k)
            if draft_sets is None:
                final = raw
            else:
                final = remap_to_draft(affinity, layer, raw, draft_sets[layer])
            mixed = np.zeros_like(h)
            for pick, expert in zip(raw, final):
                mixed += gate_probs[pick] * expert_output(weights, layer, expert, h)
            h = h + mixed
            rows.append(RoutingRow(position=position, layer=layer, raw=raw, final=final))
        else:
            h = h + np.maximum(h @ weights.dense_up[layer], 0.0) @ weights.dense_down[layer]

    return ForwardResult(h @ weights.head, ActivationRecord(rows))
