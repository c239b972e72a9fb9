# moe/services/decoding.py
"""
Turning next-token logits into tokens: greedy argmax or temperature sampling.
"""
import numpy as np
from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from moe.services.routing import _as_finite, softmax


class DecodeMode(models.TextChoices):
    GREEDY = "greedy", _("Greedy")
    SAMPLING = "sampling", _("Sampling")


def greedy_next(logits) -> int:
    """Argmax; the lowest index wins ties."""
    x = _as_finite(logits, "logits")
    return int(np.argmax(x))


def temperature_probs(logits, temperature: float) -> np.ndarray:
    if not temperature > 0:
        raise ValidationError(f"temperature > 0 violated: {temperature}", code="temperature")
    x = _as_finite(logits, "logits")
    return softmax(x / temperature)


def sample_from_probs(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of one index from a probability vector."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    index = int(np.searchsorted(cdf, u, side="right"))
    return min(index, len(probs) - 1)


def sample_next(logits, temperature: float, rng: np.random.Generator) -> int:
    """Draw from softmax(logits / temperature) with the caller's generator."""
    return sample_from_probs(temperature_probs(logits, temperature), rng)
