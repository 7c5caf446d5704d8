from django.apps import AppConfig


class TwinbenchConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'twinbench'
    verbose_name = 'Digital twin benchmark'
