from django.apps import AppConfig


class MoeConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'moe'
    verbose_name = "Toy MoE decoder"
