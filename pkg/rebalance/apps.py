from django.apps import AppConfig


class RebalanceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rebalance'
