# memsim/services/tiers.py
"""
Memory tiers and the cost-model coefficients of the offloading system.
"""
from dataclasses import dataclass, replace
from typing import Optional

from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from moe.services.spec import ModelSpec

PCIE5_HOST_BANDWIDTH = 64e9  # bytes/s, host -> device


class Tier(models.TextChoices):
    DEVICE = "device", _("Device (GPU) memory")
    HOST = "host", _("Host (CPU) memory")
    SSD = "ssd", _("SSD")


class Phase(models.TextChoices):
    SPECULATION = "speculation", _("Speculation")
    VERIFICATION = "verification", _("Verification")
    BASELINE_STEP = "baseline-step", _("Baseline step")
    SETUP = "setup", _("Start-up pinning")


# -------------------------------------------------------------------
# TIER CONFIG
# -------------------------------------------------------------------
@dataclass(frozen=True)
class TierConfig:
    """
    Device capacity, transfer bandwidths and the linear compute model.

    ``offload_tier`` says where non-resident experts live; they migrate
    straight to the device at that tier's bandwidth. The default compute
    coefficients are scaled to toy expert sizes so that, as on real
    offloading systems, expert migration dominates a decoding step.
    """
    bytes_per_expert: int
    device_capacity_bytes: int
    host_bandwidth_bytes_per_s: float = PCIE5_HOST_BANDWIDTH
    ssd_bandwidth_bytes_per_s: Optional[float] = None
    offload_tier: str = Tier.HOST
    compute_rate_tokens_per_s_base: float = 1e9
    compute_cost_per_active_expert_s: float = 2e-8

    @classmethod
    def for_model(cls, spec: ModelSpec, device_capacity_bytes: Optional[int] = None, **kwargs) -> "TierConfig":
        """Derive bytes_per_expert from the model; capacity defaults to every expert of the model."""
        if not device_capacity_bytes:
            device_capacity_bytes = spec.bytes_per_expert * len(spec.expert_keys())
        return cls(bytes_per_expert=spec.bytes_per_expert, device_capacity_bytes=device_capacity_bytes, **kwargs)

    def with_changes(self, **kwargs) -> "TierConfig":
        return replace(self, **kwargs)

    def with_source_bandwidth(self, bandwidth: float) -> "TierConfig":
        """Override the bandwidth of whichever tier experts are offloaded to."""
        if self.offload_tier == Tier.SSD:
            return replace(self, ssd_bandwidth_bytes_per_s=bandwidth)
        return replace(self, host_bandwidth_bytes_per_s=bandwidth)

    @property
    def source_bandwidth(self) -> float:
        if self.offload_tier == Tier.SSD:
            return self.ssd_bandwidth_bytes_per_s
        return self.host_bandwidth_bytes_per_s

    def validate(self, n_draft: int = 0, num_moe_layers: int = 0) -> "TierConfig":
        if self.bytes_per_expert <= 0:
            raise ValidationError(f"bytes_per_expert > 0 violated: {self.bytes_per_expert}", code="bytes")
        if not self.host_bandwidth_bytes_per_s > 0:
            raise ValidationError("host bandwidth > 0 violated", code="bandwidth")
        if self.offload_tier not in (Tier.HOST, Tier.SSD):
            raise ValidationError(f"experts can only be offloaded to host or ssd, not {self.offload_tier!r}",
                                  code="offload_tier")
        if self.offload_tier == Tier.SSD and not (self.ssd_bandwidth_bytes_per_s or 0) > 0:
            raise ValidationError("ssd offload needs an ssd bandwidth > 0", code="bandwidth")
        if self.ssd_bandwidth_bytes_per_s is not None and not self.ssd_bandwidth_bytes_per_s > 0:
            raise ValidationError("ssd bandwidth > 0 violated", code="bandwidth")
        if not self.compute_rate_tokens_per_s_base > 0 or self.compute_cost_per_active_expert_s < 0:
            raise ValidationError("compute coefficients must be positive", code="compute")
        needed = n_draft * num_moe_layers * self.bytes_per_expert
        if self.device_capacity_bytes < needed:
            raise ValidationError(
                f"device capacity ≥ N·(MoE layers)·bytes_per_expert violated: "
                f"{self.device_capacity_bytes} < {needed}",
                code="capacity",
            )
        return self
