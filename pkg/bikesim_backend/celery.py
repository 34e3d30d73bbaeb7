import os
from celery import Celery

# Set the default Django settings module
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'bikesim_backend.settings')

app = Celery('bikesim_backend')

# Workers read CELERY_* keys from the Django settings
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up experiments.tasks
app.autodiscover_tasks()
