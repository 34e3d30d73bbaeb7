"""
Django settings for bikesim_backend project.

The project hosts the bike fleet simulator: each Django app is one layer of
the simulator (geo, routing, engine, modes, rebalance, demandio, metrics) and
`experiments` exposes the command-line surface and run provenance.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

from decouple import config, Csv


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = config("SECRET_KEY", default="bikesim-local-only")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = config("ALLOWED_HOSTS", default="localhost,127.0.0.1", cast=Csv())


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',

    'geo',
    'routing',
    'engine',
    'modes',
    'rebalance',
    'demandio',
    'metrics',
    'experiments',
]



# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': config("DB_ENGINE", default='django.db.backends.sqlite3'),
        'NAME': config("DB_NAME", default=str(BASE_DIR / 'bikesim.sqlite3')),
        'USER': config("DB_USER", default=''),
        'PASSWORD': config("DB_PASSWORD", default=''),
        'HOST': config("DB_HOST", default=''),
        'PORT': config("DB_PORT", default=''),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
}


# Simulator defaults

BIKESIM = {
    'DATA_DIR': Path(config("BIKESIM_DATA_DIR", default=str(BASE_DIR / 'data'))),
    'BOSTON_DATA_DIR': Path(config("BIKESIM_BOSTON_DIR", default=str(BASE_DIR / 'data' / 'boston'))),
    'CACHE_DIR': Path(config("BIKESIM_CACHE_DIR", default=str(BASE_DIR / 'data' / 'cache'))),
    # Below this node count plain bidirectional Dijkstra answers queries
    'ROUTING_CH_MIN_NODES': config("BIKESIM_CH_MIN_NODES", default=1000, cast=int),
    'SWEEP_WORKERS': config("BIKESIM_WORKERS", default=os.cpu_count() or 1, cast=int),
    'LOG_FLUSH_EVERY': config("BIKESIM_LOG_FLUSH_EVERY", default=10000, cast=int),
}


CELERY_BROKER_URL = config("CELERY_BROKER_URL", default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config("CELERY_RESULT_BACKEND", default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = 'UTC'
CELERY_TASK_ALWAYS_EAGER = config("CELERY_TASK_ALWAYS_EAGER", default=False, cast=bool)


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': config("BIKESIM_LOG_LEVEL", default='INFO'),
    },
}
