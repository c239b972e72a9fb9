from django.apps import AppConfig


class SpecdecConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'specdec'
    verbose_name = "Speculative decoding"
