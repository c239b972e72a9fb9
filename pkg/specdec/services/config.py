# specdec/services/config.py
from dataclasses import dataclass, replace

from django.core.exceptions import ValidationError

from moe.services.decoding import DecodeMode


@dataclass(frozen=True)
class SpecConfig:
    """γ draft tokens per speculation phase, decoding mode and batch shape."""
    gamma: int = 10
    mode: str = DecodeMode.GREEDY
    temperature: float = 1.0
    batch: int = 1
    max_new_tokens: int = 32

    def with_changes(self, **kwargs) -> "SpecConfig":
        return replace(self, **kwargs)

    @property
    def sampling(self) -> bool:
        return self.mode == DecodeMode.SAMPLING

    def validate(self) -> "SpecConfig":
        if self.gamma < 1:
            raise ValidationError(f"γ ≥ 1 violated: gamma={self.gamma}", code="gamma")
        if self.batch < 1:
            raise ValidationError(f"B ≥ 1 violated: batch={self.batch}", code="batch")
        if self.mode not in DecodeMode.values:
            raise ValidationError(f"mode must be one of {DecodeMode.values}, got {self.mode!r}", code="mode")
        if self.sampling and not self.temperature > 0:
            raise ValidationError(f"temperature > 0 violated: {self.temperature}", code="temperature")
        if self.max_new_tokens < 1:
            raise ValidationError(f"max_new_tokens ≥ 1 violated: {self.max_new_tokens}", code="max_new_tokens")
        return self
