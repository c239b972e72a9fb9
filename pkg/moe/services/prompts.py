# moe/services/prompts.py
from typing import List

from django.core.exceptions import ValidationError

from core.rng import SALT_PROMPTS, make_rng
from moe.services.spec import ModelSpec


def make_prompt(spec: ModelSpec, seed: int, index: int, length: int) -> List[int]:
    """Prompt ``index`` of run ``seed``; independent of how many prompts the batch holds."""
    rng = make_rng(seed, SALT_PROMPTS, index)
    return [int(t) for t in rng.integers(0, spec.vocab_size, size=length)]


def make_prompts(spec: ModelSpec, seed: int, batch: int, length: int = 8) -> List[List[int]]:
    if batch < 1:
        raise ValidationError(f"B ≥ 1 violated: batch={batch}", code="batch")
    if length < 1:
        raise ValidationError(f"prompt length must be ≥ 1, got {length}", code="prompt_len")
    return [make_prompt(spec, seed, i, length) for i in range(batch)]
