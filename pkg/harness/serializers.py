from collections import OrderedDict

from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers

from baselines.services.config import BaselineConfig, BaselineKind
from drafting.services.affinity import RemapMode
from drafting.services.policies import DraftPolicy
from harness.models import Engine, Experiment, ResultRecord
from memsim.services.tiers import Tier, TierConfig
from moe.services.decoding import DecodeMode
from moe.services.spec import ModelSpec
from specdec.services.config import SpecConfig

RESULT_COLUMNS = (
    "policy", "batch", "gamma", "n_draft", "bandwidth", "seed", "tau", "tokens_per_sec",
    "bytes_total", "bytes_spec", "bytes_verify", "lambda", "s_eq1", "s_eq2",
)
VERBOSE_COLUMNS = (
    "engine", "bytes_setup", "c_ratio", "compute_s", "migration_s", "steps", "tokens", "text_hash",
)


# -------------------------------------------------------------------
# CONFIG FIELDS
# -------------------------------------------------------------------
class CommaListField(serializers.ListField):
    """A list given either as a Python list or as ``a, b, c`` text."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(",") if part.strip()]
        return super().to_internal_value(data)


class SeedListField(CommaListField):
    """Seeds as a comma list where ``a-b`` expands to the inclusive range."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(",") if part.strip()]
        expanded = []
        for item in data:
            text = str(item)
            if "-" in text.strip("-"):
                low, _, high = text.partition("-")
                try:
                    low, high = int(low), int(high)
                except ValueError:
                    raise serializers.ValidationError(f"bad seed range {text!r}")
                if low > high:
                    raise serializers.ValidationError(f"empty seed range {text!r}")
                expanded.extend(str(s) for s in range(low, high + 1))
            else:
                expanded.append(text)
        return super().to_internal_value(expanded)


def _count(name, minimum=1, **kwargs):
    return serializers.IntegerField(
        min_value=minimum,
        error_messages={"min_value": f"{name} ≥ {minimum} violated"},
        **kwargs,
    )


def _positive(name, **kwargs):
    return serializers.FloatField(
        min_value=0.0,
        error_messages={"min_value": f"{name} ≥ 0 violated"},
        **kwargs,
    )


# -------------------------------------------------------------------
# EXPERIMENT CONFIG
# -------------------------------------------------------------------
class ExperimentConfigSerializer(serializers.Serializer):
    """Field and cross-field validation of a flat experiment config."""

    # model
    layers = _count("L")
    moe_layers = CommaListField(child=serializers.IntegerField(min_value=0), allow_empty=True)
    experts = _count("E")
    top_k = _count("K")
    hidden_dim = _count("d")
    ffn_dim = _count("f")
    vocab_size = _count("V", minimum=2)
    gate_skew = _positive("gate_skew")
    hotness_drift_period = _count("hotness_drift_period", minimum=0)
    model_seed = _count("model_seed", minimum=0)
    dtype_bytes = _count("dtype_bytes")

    # memory tiers and cost model
    device_capacity_bytes = _count("device_capacity_bytes", minimum=0)
    host_bandwidth = _positive("host_bandwidth")
    ssd_bandwidth = _positive("ssd_bandwidth")
    offload_tier = serializers.ChoiceField(choices=[Tier.HOST, Tier.SSD])
    compute_rate = _positive("compute_rate")
    expert_compute_cost = _positive("expert_compute_cost")

    # decoding
    engines = CommaListField(child=serializers.ChoiceField(choices=Engine.values), allow_empty=False)
    policy = CommaListField(child=serializers.ChoiceField(choices=DraftPolicy.values), allow_empty=False)
    remap = serializers.ChoiceField(choices=RemapMode.values)
    mode = serializers.ChoiceField(choices=DecodeMode.values)
    temperature = serializers.FloatField()
    batch = CommaListField(child=_count("B"), allow_empty=False)
    gamma = CommaListField(child=_count("γ"), allow_empty=False)
    n_draft = CommaListField(child=_count("N"), allow_empty=False)
    bandwidth = CommaListField(child=_positive("bandwidth"), allow_empty=True)
    max_new_tokens = _count("max_new_tokens")
    prompt_len = _count("prompt_len")
    seeds = SeedListField(child=_count("seed", minimum=0), allow_empty=False)
    warmup_steps = _count("warmup_steps")
    cache_fraction = serializers.FloatField()

    # harness
    workers = _count("workers")
    output = serializers.CharField(allow_blank=True)
    format = serializers.ChoiceField(choices=["csv", "json"])
    verbose = serializers.BooleanField()

    def validate(self, attrs):
        spec = ModelSpec.build(
            num_layers=attrs["layers"],
            moe_layers=attrs["moe_layers"] or None,
            experts_per_block=attrs["experts"],
            top_k=attrs["top_k"],
            hidden_dim=attrs["hidden_dim"],
            ffn_dim=attrs["ffn_dim"],
            vocab_size=attrs["vocab_size"],
            gate_skew=attrs["gate_skew"],
            seed=attrs["model_seed"],
            hotness_drift_period=attrs["hotness_drift_period"],
            dtype_bytes=attrs["dtype_bytes"],
        )
        if any(layer >= attrs["layers"] for layer in attrs["moe_layers"]):
            raise serializers.ValidationError({"moe_layers": "MoE layer index ≥ layers"})
        try:
            spec.validate()
            tier = TierConfig.for_model(
                spec,
                device_capacity_bytes=attrs["device_capacity_bytes"],
                host_bandwidth_bytes_per_s=attrs["host_bandwidth"],
                ssd_bandwidth_bytes_per_s=attrs["ssd_bandwidth"] or None,
                offload_tier=attrs["offload_tier"],
                compute_rate_tokens_per_s_base=attrs["compute_rate"],
                compute_cost_per_active_expert_s=attrs["expert_compute_cost"],
            )
            for n in attrs["n_draft"]:
                tier.validate(n, len(spec.moe_layers))
            for gamma in attrs["gamma"]:
                SpecConfig(gamma=gamma, mode=attrs["mode"], temperature=attrs["temperature"],
                           max_new_tokens=attrs["max_new_tokens"]).validate()
            if BaselineKind.CACHING in attrs["engines"]:
                BaselineConfig(kind=BaselineKind.CACHING, cache_fraction=attrs["cache_fraction"],
                               warmup_steps=attrs["warmup_steps"]).validate()
        except DjangoValidationError as exc:
            raise serializers.ValidationError(exc.messages)

        for n in attrs["n_draft"]:
            if n < spec.top_k:
                raise serializers.ValidationError({"n_draft": f"N ≥ K violated: N={n}, K={spec.top_k}"})
            if n > spec.experts_per_block:
                raise serializers.ValidationError({"n_draft": f"N ≤ E violated: N={n}, E={spec.experts_per_block}"})
        for b in attrs["bandwidth"]:
            if not b > 0:
                raise serializers.ValidationError({"bandwidth": "bandwidth > 0 violated"})
        return attrs


# -------------------------------------------------------------------
# RESULT ROWS
# -------------------------------------------------------------------
class ResultRowSerializer(serializers.ModelSerializer):
    """
    Result rows in emission order. ``lambda`` is a Python keyword, so the
    column is added in ``get_fields`` over the model's ``lam``.
    Pass ``context={"verbose": True}`` for the extra columns.
    """

    class Meta:
        model = ResultRecord
        fields = [c for c in RESULT_COLUMNS if c != "lambda"] + list(VERBOSE_COLUMNS)

    def get_fields(self):
        fields = super().get_fields()
        fields["lambda"] = serializers.FloatField(source="lam")
        columns = RESULT_COLUMNS + (VERBOSE_COLUMNS if self.context.get("verbose") else ())
        return OrderedDict((name, fields[name]) for name in columns)


class ResultRecordSerializer(ResultRowSerializer):
    """API view of a stored row: every column plus the experiment link."""

    class Meta(ResultRowSerializer.Meta):
        fields = ResultRowSerializer.Meta.fields + ["id", "experiment", "wall_clock_s"]

    def get_fields(self):
        fields = super(ResultRowSerializer, self).get_fields()
        fields["lambda"] = serializers.FloatField(source="lam")
        columns = ("id", "experiment") + RESULT_COLUMNS + VERBOSE_COLUMNS + ("wall_clock_s",)
        return OrderedDict((name, fields[name]) for name in columns)


class ExperimentSerializer(serializers.ModelSerializer):
    rows = serializers.IntegerField(source="results.count", read_only=True)

    class Meta:
        model = Experiment
        fields = ["id", "name", "created_at", "rows", "config_text", "notes"]
