from django.apps import AppConfig


class DemandioConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'demandio'
