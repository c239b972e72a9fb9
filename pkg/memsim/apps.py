from django.apps import AppConfig


class MemsimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'memsim'
    verbose_name = "Memory tier simulator"
