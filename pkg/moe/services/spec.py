# moe/services/spec.py
"""
Shape of the toy MoE decoder and the routing record its forward pass emits.
"""
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from django.core.exceptions import ValidationError

from memsim.services.keys import ExpertKey


# -------------------------------------------------------------------
# MODEL SPEC
# -------------------------------------------------------------------
@dataclass(frozen=True)
class ModelSpec:
    """
    Hyper-parameters of the decoder.

    ``moe_layer_mask[l]`` says whether layer ``l`` is an MoE block (True) or
    a dense FFN (False); left as None, every layer is MoE. ``gate_skew``
    scales the decaying gate bias that makes low-index experts hot;
    ``hotness_drift_period`` (0 = off) rotates that bias by one expert
    every P positions.
    """
    num_layers: int = 4
    moe_layer_mask: Optional[Tuple[bool, ...]] = None
    experts_per_block: int = 16
    top_k: int = 2
    hidden_dim: int = 32
    ffn_dim: int = 64
    vocab_size: int = 64
    gate_skew: float = 1.5
    seed: int = 0
    hotness_drift_period: int = 0
    dtype_bytes: int = 4

    def __post_init__(self):
        if self.moe_layer_mask is None:
            object.__setattr__(self, "moe_layer_mask", tuple(True for _ in range(max(self.num_layers, 0))))
        else:
            object.__setattr__(self, "moe_layer_mask", tuple(bool(flag) for flag in self.moe_layer_mask))

    @classmethod
    def build(cls, num_layers: int = 4, moe_layers: Optional[Iterable[int]] = None, **kwargs) -> "ModelSpec":
        """Convenience constructor: ``moe_layers`` lists MoE layer indices (all layers when omitted)."""
        if moe_layers is None:
            mask = tuple(True for _ in range(num_layers))
        else:
            chosen = set(moe_layers)
            mask = tuple(layer in chosen for layer in range(num_layers))
        return cls(num_layers=num_layers, moe_layer_mask=mask, **kwargs)

    def with_changes(self, **kwargs) -> "ModelSpec":
        return replace(self, **kwargs)

    @property
    def moe_layers(self) -> Tuple[int, ...]:
        return tuple(layer for layer, is_moe in enumerate(self.moe_layer_mask) if is_moe)

    @property
    def bytes_per_expert(self) -> int:
        # up (d x f) plus down (f x d) in the model dtype
        return 2 * self.hidden_dim * self.ffn_dim * self.dtype_bytes

    def expert_keys(self) -> List[ExpertKey]:
        return [ExpertKey(layer, e) for layer in self.moe_layers for e in range(self.experts_per_block)]

    def validate(self) -> "ModelSpec":
        """Raise ValidationError naming the first invariant that fails."""
        E, K = self.experts_per_block, self.top_k
        if E < 1:
            raise ValidationError(f"E ≥ 1 violated: experts_per_block={E}", code="experts")
        if not 1 <= K <= E:
            raise ValidationError(f"1 ≤ K ≤ E violated: top_k={K}, experts_per_block={E}", code="top_k")
        if self.vocab_size < 2:
            raise ValidationError(f"V ≥ 2 violated: vocab_size={self.vocab_size}", code="vocab")
        if self.hidden_dim < 1 or self.ffn_dim < 1:
            raise ValidationError(
                f"d, f ≥ 1 violated: hidden_dim={self.hidden_dim}, ffn_dim={self.ffn_dim}", code="dims"
            )
        if self.num_layers < 1 or len(self.moe_layer_mask) != self.num_layers:
            raise ValidationError(
                f"moe_layer_mask must have one flag per layer ({len(self.moe_layer_mask)} flags, "
                f"{self.num_layers} layers)",
                code="mask",
            )
        if not any(self.moe_layer_mask):
            raise ValidationError("at least one layer must be an MoE block", code="mask")
        if self.gate_skew < 0:
            raise ValidationError(f"gate_skew ≥ 0 violated: {self.gate_skew}", code="gate_skew")
        if self.hotness_drift_period < 0:
            raise ValidationError(
                f"hotness_drift_period ≥ 0 violated: {self.hotness_drift_period}", code="drift"
            )
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}", code="seed")
        if self.dtype_bytes < 1:
            raise ValidationError(f"dtype_bytes ≥ 1 violated: {self.dtype_bytes}", code="dtype")
        return self


# -------------------------------------------------------------------
# ACTIVATION RECORD
# -------------------------------------------------------------------
@dataclass(frozen=True)
class RoutingRow:
    """Routing of one processed token through one MoE layer."""
    position: int
    layer: int
    raw: Tuple[int, ...]
    final: Tuple[int, ...]


@dataclass
class ActivationRecord:
    """
    Per processed token and MoE layer: the gate's raw top-K picks and the
    experts actually used after any draft remap (equal for target passes).
    """
    rows: List[RoutingRow] = field(default_factory=list)

    def __iter__(self) -> Iterator[RoutingRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def extend(self, other: "ActivationRecord") -> "ActivationRecord":
        self.rows.extend(other.rows)
        return self

    def raw_keys(self) -> set:
        return {ExpertKey(row.layer, e) for row in self.rows for e in row.raw}

    def final_keys(self) -> set:
        return {ExpertKey(row.layer, e) for row in self.rows for e in row.final}

    def for_layer(self, layer: int) -> List[RoutingRow]:
        return [row for row in self.rows if row.layer == layer]

    @classmethod
    def merged(cls, records: Sequence["ActivationRecord"]) -> "ActivationRecord":
        out = cls()
        for record in records:
            out.extend(record)
        return out
