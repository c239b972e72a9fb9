# moe/services/routing.py
"""
Gate normalization and top-K expert selection.
"""
from typing import Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError


def _as_finite(values, what: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1 or array.size == 0:
        raise ValidationError(f"{what} must be a non-empty 1-D sequence", code="shape")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{what} contains non-finite values", code="non_finite")
    return array


def softmax(logits: Sequence[float]) -> np.ndarray:
    """Numerically stable softmax (max-subtracted)."""
    x = _as_finite(logits, "logits")
    z = np.exp(x - x.max())
    return z / z.sum()


def route_topk(gate_logits: Sequence[float], k: int) -> Tuple[int, ...]:
    """
    Indices of the ``k`` largest logits, descending by logit.
    Equal logits keep the lower index first.
    """
    x = _as_finite(gate_logits, "gate logits")
    if k < 1:
        raise ValidationError(f"K ≥ 1 violated: K={k}", code="top_k")
    if k > x.size:
        raise ValidationError(f"K ≤ E violated: K={k}, E={x.size}", code="top_k")
    # stable sort on the negated logits keeps ties in index order
    order = np.argsort(-x, kind="stable")
    return tuple(int(i) for i in order[:k])
