# specdec/services/verification.py
"""
Verification phase: the target model scores all γ+1 positions of a draft
and decides how much of it to keep.
"""
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import CorruptDraftRecord
from moe.services.decoding import greedy_next, sample_from_probs, temperature_probs
from moe.services.forward import ForwardResult, forward
from moe.services.spec import ActivationRecord
from moe.services.weights import ModelWeights


class Verdict(NamedTuple):
    accepted: int
    token: int
    record: ActivationRecord
    # one record per verified position, 0..γ
    position_records: Tuple[ActivationRecord, ...]

    @property
    def tokens_generated(self) -> int:
        return self.accepted + 1


def target_pass(weights: ModelWeights, prefix: Sequence[int], drafts: Sequence[int]) -> List[ForwardResult]:
    """Full-model logits after prefix + drafts[:i] for every i in 0..γ."""
    base = list(prefix)
    return [forward(weights, base + list(drafts[:i])) for i in range(len(drafts) + 1)]


def _verdict(accepted: int, token: int, results: List[ForwardResult]) -> Verdict:
    records = tuple(r.record for r in results)
    return Verdict(accepted, token, ActivationRecord.merged(records), records)


def verify_greedy(weights: ModelWeights, prefix: Sequence[int], drafts: Sequence[int]) -> Verdict:
    """
    Keep the longest draft prefix that matches the target's greedy choice,
    then emit the target's token at the first mismatch (or the bonus token).
    """
    results = target_pass(weights, prefix, drafts)
    accepted = 0
    for i, token in enumerate(drafts):
        if token != greedy_next(results[i].logits):
            break
        accepted += 1
    return _verdict(accepted, greedy_next(results[accepted].logits), results)


def accept_or_resample(p: np.ndarray, q: np.ndarray, token: int,
                       rng: np.random.Generator) -> Tuple[bool, Optional[int]]:
    """
    One step of speculative sampling: keep ``token`` with probability
    min(1, p/q), otherwise draw a replacement from max(0, p - q) renormalized.
    """
    q_x = float(q[token])
    if not q_x > 0:
        raise CorruptDraftRecord(f"draft token {token} has draft probability {q_x}")
    if rng.random() < min(1.0, float(p[token]) / q_x):
        return True, token
    residual = np.maximum(p - q, 0.0)
    mass = residual.sum()
    if mass <= 0:
        # p == q up to rounding; rejection only happens on float noise
        residual, mass = p, p.sum()
    return False, sample_from_probs(residual / mass, rng)


def verify_sampling(weights: ModelWeights, prefix: Sequence[int], drafts: Sequence[int],
                    q: Sequence[np.ndarray], temperature: float, rng: np.random.Generator) -> Verdict:
    if len(q) != len(drafts):
        raise CorruptDraftRecord(f"{len(drafts)} draft tokens but {len(q)} draft distributions")
    results = target_pass(weights, prefix, drafts)
    for i, token in enumerate(drafts):
        p = temperature_probs(results[i].logits, temperature)
        kept, replacement = accept_or_resample(p, np.asarray(q[i]), token, rng)
        if not kept:
            return _verdict(i, replacement, results)
    bonus = sample_from_probs(temperature_probs(results[-1].logits, temperature), rng)
    return _verdict(len(drafts), bonus, results)
