# baselines/services/config.py
import math
from dataclasses import dataclass

from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _


class BaselineKind(models.TextChoices):
    ONDEMAND = "ondemand", _("MoE-OnDemand")
    OVERLAP = "overlap", _("MoE-Overlap (oracle)")
    CACHING = "caching", _("MoE-Caching")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = BaselineKind.ONDEMAND
    cache_fraction: float = 0.10
    warmup_steps: int = 64

    def cache_size(self, experts: int) -> int:
        """Experts kept per layer by the caching baseline: ⌈fraction·E⌉."""
        if self.kind != BaselineKind.CACHING:
            return 0
        return min(experts, math.ceil(self.cache_fraction * experts))

    def validate(self) -> "BaselineConfig":
        if self.kind not in BaselineKind.values:
            raise ValidationError(f"unknown baseline {self.kind!r}", code="kind")
        if self.kind == BaselineKind.CACHING and not 0 < self.cache_fraction < 1:
            raise ValidationError(f"0 < cache_fraction < 1 violated: {self.cache_fraction}", code="cache_fraction")
        if self.warmup_steps < 1:
            raise ValidationError(f"warmup_steps ≥ 1 violated: {self.warmup_steps}", code="warmup")
        return self
