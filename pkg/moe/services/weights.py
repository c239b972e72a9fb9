# moe/services/weights.py
"""
Synthetic, seeded parameters for the toy decoder.

All tensors are drawn from N(0, 1/sqrt(d)) with a PCG64 generator seeded
from ``ModelSpec.seed`` (see ``core.rng``). Draw order is fixed:
embeddings, output head, then layer by layer the attention-surrogate
mixing matrix followed by either (gate, expert up, expert down) for an MoE
layer or (dense up, dense down) for a dense layer.
"""
import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from core.rng import make_rng
from moe.services.spec import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelWeights:
    spec: ModelSpec
    embeddings: np.ndarray            # (V, d)
    head: np.ndarray                  # (d, V)
    mixing: Dict[int, np.ndarray]     # layer -> (d, d)
    gate: Dict[int, np.ndarray]       # moe layer -> (d, E)
    gate_bias: Dict[int, np.ndarray]  # moe layer -> (E,)
    expert_up: Dict[int, np.ndarray]  # moe layer -> (E, d, f)
    expert_down: Dict[int, np.ndarray]  # moe layer -> (E, f, d)
    dense_up: Dict[int, np.ndarray]   # dense layer -> (d, f)
    dense_down: Dict[int, np.ndarray]  # dense layer -> (f, d)

    def expert_vector(self, layer: int, expert: int) -> np.ndarray:
        """Flattened up‖down projections of one expert."""
        return np.concatenate([self.expert_up[layer][expert].ravel(), self.expert_down[layer][expert].ravel()])

    def all_tensors(self):
        yield self.embeddings
        yield self.head
        for group in (self.mixing, self.gate, self.gate_bias, self.expert_up,
                      self.expert_down, self.dense_up, self.dense_down):
            for layer in sorted(group):
                yield group[layer]


def gate_bias_profile(spec: ModelSpec) -> np.ndarray:
    """b_e = gate_skew * (1 - e/E): a decaying offset that makes low-index experts hot."""
    E = spec.experts_per_block
    return spec.gate_skew * (1.0 - np.arange(E, dtype=np.float64) / E)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def build_model(spec: ModelSpec) -> ModelWeights:
    """
    Deterministically synthesize weights for ``spec``.
    Two calls with equal specs return element-wise identical tensors.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    d, f, E, V = spec.hidden_dim, spec.ffn_dim, spec.experts_per_block, spec.vocab_size
    scale = 1.0 / np.sqrt(d)

    def draw(*shape):
        return _frozen(rng.normal(0.0, scale, size=shape))

    embeddings = draw(V, d)
    head = draw(d, V)
    mixing, gate, gate_bias = {}, {}, {}
    expert_up, expert_down, dense_up, dense_down = {}, {}, {}, {}
    bias = gate_bias_profile(spec)

    for layer, is_moe in enumerate(spec.moe_layer_mask):
        mixing[layer] = draw(d, d)
        if is_moe:
            gate[layer] = draw(d, E)
            gate_bias[layer] = _frozen(bias.copy())
            expert_up[layer] = draw(E, d, f)
            expert_down[layer] = draw(E, f, d)
        else:
            dense_up[layer] = draw(d, f)
            dense_down[layer] = draw(f, d)

    weights = ModelWeights(
        spec=spec, embeddings=embeddings, head=head, mixing=mixing, gate=gate, gate_bias=gate_bias,
        expert_up=expert_up, expert_down=expert_down, dense_up=dense_up, dense_down=dense_down,
    )
    logger.debug("built toy MoE: L=%d E=%d K=%d d=%d f=%d V=%d skew=%.3f seed=%d",
                 spec.num_layers, E, spec.top_k, d, f, V, spec.gate_skew, spec.seed)
    return weights
