from django.contrib import admin
from django.utils.translation import gettext_lazy as _

from .models import Experiment, ResultRecord


# -------------------------------------------------------------------
# INLINE: Result rows in an experiment
# -------------------------------------------------------------------
class ResultRecordInline(admin.TabularInline):
    model = ResultRecord
    fields = ("engine", "policy", "batch", "gamma", "n_draft", "seed", "tau", "tokens_per_sec", "bytes_total")
    readonly_fields = fields
    show_change_link = True
    extra = 0

    def has_add_permission(self, request, obj=None):
        return False


# -------------------------------------------------------------------
# EXPERIMENT ADMIN
# -------------------------------------------------------------------
@admin.register(Experiment)
class ExperimentAdmin(admin.ModelAdmin):
    list_display = ("name", "created_at", "display_rows")
    search_fields = ("name", "notes")
    ordering = ("-created_at",)
    readonly_fields = ("id", "created_at", "config_text")
    inlines = [ResultRecordInline]

    fieldsets = (
        (None, {"fields": ("id", "name", "notes")}),
        (_("Config"), {"fields": ("config_text",)}),
        (_("Timestamps"), {"fields": ("created_at",)}),
    )

    @admin.display(description="Rows")
    def display_rows(self, obj):
        return obj.results.count()


# -------------------------------------------------------------------
# RESULT ROW ADMIN
# -------------------------------------------------------------------
@admin.register(ResultRecord)
class ResultRecordAdmin(admin.ModelAdmin):
    list_display = ("engine", "policy", "batch", "gamma", "n_draft", "seed", "tau", "lam", "s_eq2",
                    "display_transfer")
    list_filter = ("engine", "policy", "batch", "gamma", "n_draft")
    search_fields = ("experiment__name", "text_hash")
    readonly_fields = [f.name for f in ResultRecord._meta.fields]

    fieldsets = (
        (None, {"fields": ("id", "experiment", "engine", "policy")}),
        (_("Sweep cell"), {"fields": ("batch", "gamma", "n_draft", "bandwidth", "seed")}),
        (_("Transfer"), {"fields": ("bytes_total", "bytes_spec", "bytes_verify", "bytes_setup")}),
        (_("Speed"), {"fields": ("tau", "tokens_per_sec", "lam", "c_ratio", "s_eq1", "s_eq2",
                                 "compute_s", "migration_s", "wall_clock_s")}),
        (_("Output"), {"fields": ("steps", "tokens", "text_hash")}),
    )

    @admin.display(description="Transfer (MiB)")
    def display_transfer(self, obj):
        return f"{obj.bytes_total / 2**20:,.2f}"

    def has_add_permission(self, request):
        return False
