import uuid

from django.db import models
from django.utils.translation import gettext_lazy as _


class Engine(models.TextChoices):
    SPECMOE = "specmoe", _("Self-assisted speculative decoding")
    ONDEMAND = "ondemand", _("MoE-OnDemand")
    OVERLAP = "overlap", _("MoE-Overlap (oracle)")
    CACHING = "caching", _("MoE-Caching")


# -------------------------------------------------------------------
# EXPERIMENT
# -------------------------------------------------------------------
class Experiment(models.Model):
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    name = models.CharField(max_length=120, blank=True, help_text=_("Optional label, e.g. 'N sweep, skew 1.5'"))
    config_text = models.TextField(help_text=_("Canonical key = value echo of the config that produced the rows."))
    created_at = models.DateTimeField(auto_now_add=True)
    notes = models.TextField(blank=True)

    class Meta:
        ordering = ["-created_at"]
        verbose_name = _("Experiment")
        verbose_name_plural = _("Experiments")

    def __str__(self):
        label = self.name or str(self.id)[:8]
        return f"{label} ({self.results.count()} rows)"


# -------------------------------------------------------------------
# RESULT ROW
# -------------------------------------------------------------------
class ResultRecord(models.Model):
    """One sweep cell: the config echo plus everything measured for it."""
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    experiment = models.ForeignKey(Experiment, on_delete=models.CASCADE, related_name="results")

    engine = models.CharField(max_length=12, choices=Engine.choices, default=Engine.SPECMOE)
    policy = models.CharField(max_length=20, help_text=_("Draft policy, or the engine name for baselines."))
    batch = models.PositiveIntegerField()
    gamma = models.PositiveIntegerField(help_text=_("Draft tokens per speculative step (0 for baselines)."))
    n_draft = models.PositiveIntegerField(help_text=_("Experts pinned per MoE layer."))
    bandwidth = models.FloatField(help_text=_("Offload-tier to device bandwidth, bytes/s."))
    seed = models.PositiveBigIntegerField()

    tau = models.FloatField()
    tokens_per_sec = models.FloatField(help_text=_("Modeled throughput under the cost model."))
    bytes_total = models.PositiveBigIntegerField()
    bytes_spec = models.PositiveBigIntegerField()
    bytes_verify = models.PositiveBigIntegerField()
    bytes_setup = models.PositiveBigIntegerField(default=0)
    lam = models.FloatField(_("lambda"))
    s_eq1 = models.FloatField()
    s_eq2 = models.FloatField()
    c_ratio = models.FloatField(default=0.0)

    compute_s = models.FloatField(default=0.0)
    migration_s = models.FloatField(default=0.0)
    wall_clock_s = models.FloatField(default=0.0, help_text=_("Real time the simulation itself took."))
    steps = models.PositiveIntegerField(default=0)
    tokens = models.PositiveIntegerField(default=0)
    text_hash = models.CharField(max_length=64, blank=True)

    class Meta:
        ordering = ["engine", "policy", "batch", "gamma", "n_draft", "bandwidth", "seed"]
        verbose_name = _("Result row")
        verbose_name_plural = _("Result rows")

    def __str__(self):
        return f"{self.engine}/{self.policy} B={self.batch} γ={self.gamma} N={self.n_draft} seed={self.seed}"

    def sort_key(self) -> tuple:
        return (self.engine, self.policy, self.batch, self.gamma, self.n_draft, self.bandwidth, self.seed)
