# harness/services/config.py
"""
Flat ``key = value`` experiment configs.

    # comments and blank lines are ignored
    experts = 16
    n_draft = 2, 4, 8, 16
    seeds = 0-19

Unknown and repeated keys are rejected with their line number. Missing keys
take the ``MOELAB`` defaults from settings. ``serialize_config`` writes the
canonical form: every key, in ``CONFIG_KEYS`` order.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

from django.conf import settings

from baselines.services.config import BaselineConfig, BaselineKind
from core.exceptions import ConfigError
from harness.serializers import ExperimentConfigSerializer
from memsim.services.tiers import TierConfig
from moe.services.spec import ModelSpec
from specdec.services.config import SpecConfig

CONFIG_KEYS = (
    "layers", "moe_layers", "experts", "top_k", "hidden_dim", "ffn_dim", "vocab_size", "gate_skew",
    "hotness_drift_period", "model_seed", "dtype_bytes",
    "device_capacity_bytes", "host_bandwidth", "ssd_bandwidth", "offload_tier", "compute_rate",
    "expert_compute_cost",
    "engines", "policy", "remap", "mode", "temperature", "batch", "gamma", "n_draft", "bandwidth",
    "max_new_tokens", "prompt_len", "seeds", "warmup_steps", "cache_fraction",
    "workers", "output", "format", "verbose",
)
SWEEP_AXES = ("engines", "policy", "batch", "gamma", "n_draft", "bandwidth", "seeds")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated config: the typed values keyed as in the file."""
    values: Tuple[Tuple[str, object], ...]
    lines: Dict[str, int] = field(default_factory=dict, compare=False, hash=False)

    def __getitem__(self, key: str):
        return dict(self.values)[key]

    def as_dict(self) -> dict:
        return dict(self.values)

    # ---------------------------------------------------------------
    # EMBEDDED CONFIGS
    # ---------------------------------------------------------------
    @property
    def model(self) -> ModelSpec:
        v = self.as_dict()
        return ModelSpec.build(
            num_layers=v["layers"],
            moe_layers=v["moe_layers"] or None,
            experts_per_block=v["experts"],
            top_k=v["top_k"],
            hidden_dim=v["hidden_dim"],
            ffn_dim=v["ffn_dim"],
            vocab_size=v["vocab_size"],
            gate_skew=v["gate_skew"],
            seed=v["model_seed"],
            hotness_drift_period=v["hotness_drift_period"],
            dtype_bytes=v["dtype_bytes"],
        )

    @property
    def tier(self) -> TierConfig:
        v = self.as_dict()
        return TierConfig.for_model(
            self.model,
            device_capacity_bytes=v["device_capacity_bytes"],
            host_bandwidth_bytes_per_s=v["host_bandwidth"],
            ssd_bandwidth_bytes_per_s=v["ssd_bandwidth"] or None,
            offload_tier=v["offload_tier"],
            compute_rate_tokens_per_s_base=v["compute_rate"],
            compute_cost_per_active_expert_s=v["expert_compute_cost"],
        )

    def spec_config(self, gamma: int, batch: int) -> SpecConfig:
        v = self.as_dict()
        return SpecConfig(gamma=gamma, mode=v["mode"], temperature=v["temperature"], batch=batch,
                          max_new_tokens=v["max_new_tokens"])

    def baseline_config(self, kind: str) -> BaselineConfig:
        v = self.as_dict()
        fraction = v["cache_fraction"] if kind == BaselineKind.CACHING else BaselineConfig.cache_fraction
        return BaselineConfig(kind=kind, cache_fraction=fraction, warmup_steps=v["warmup_steps"])

    @property
    def bandwidths(self) -> List[float]:
        return list(self["bandwidth"]) or [self.tier.source_bandwidth]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Re-validate with some keys replaced (CLI flags)."""
        applied = {k: v for k, v in overrides.items() if v is not None}
        data = self.as_dict()
        data.update(applied)
        return _validated(data, {k: n for k, n in self.lines.items() if k not in applied})


# -------------------------------------------------------------------
# PARSING
# -------------------------------------------------------------------
def config_defaults() -> dict:
    return {key: settings.MOELAB[key] for key in CONFIG_KEYS}


def _flatten(errors, key: str = "") -> List[Tuple[str, str]]:
    """DRF error structure -> (field, message) pairs; list indexes keep the field name."""
    if isinstance(errors, dict):
        pairs = []
        for name, value in errors.items():
            pairs.extend(_flatten(value, name if isinstance(name, str) else key))
        return pairs
    if isinstance(errors, (list, tuple)):
        pairs = []
        for item in errors:
            pairs.extend(_flatten(item, key))
        return pairs
    return [(key, str(errors))]


def _validated(data: dict, lines: Dict[str, int]) -> ExperimentConfig:
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        key, message = _flatten(serializer.errors)[0]
        if key and key != "non_field_errors":
            message = f"{key}: {message}"
        raise ConfigError(message, line=lines.get(key))
    validated = serializer.validated_data
    return ExperimentConfig(values=tuple((k, _freeze(validated[k])) for k in CONFIG_KEYS), lines=lines)


def _freeze(value):
    return tuple(value) if isinstance(value, list) else value


def parse_config_text(text: str) -> ExperimentConfig:
    raw: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=number)
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=number)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", line=number)
        raw[key] = value.strip()
        lines[key] = number
    data = config_defaults()
    data.update(raw)
    return _validated(data, lines)


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config_text(text)


# -------------------------------------------------------------------
# SERIALIZING
# -------------------------------------------------------------------
def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    return "".join(f"{key} = {_format_value(value)}\n" for key, value in config.values)
