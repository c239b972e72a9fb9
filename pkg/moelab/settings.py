"""
Django settings for the moelab project.

Experiment defaults live in ``MOELAB``; every key can be overridden from the
environment as ``MOELAB_<KEY>`` (e.g. ``MOELAB_GAMMA=5``). List-valued
defaults take comma-separated values.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'MOELAB_SECRET_KEY',
    'django-insecure-moelab-7q$2v!k0w_local-only-key-c4r9#x1m',
)

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('MOELAB_DEBUG', '1') == '1'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    'rest_framework',
    'django_filters',

    'core',
    'moe',
    'memsim',
    'drafting',
    'specdec',
    'baselines',
    'harness',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'moelab.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'moelab.wsgi.application'


# Database

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# -------------------------------------------------------------------
# REST FRAMEWORK
# -------------------------------------------------------------------
REST_FRAMEWORK = {
    'DEFAULT_FILTER_BACKENDS': ['django_filters.rest_framework.DjangoFilterBackend'],
    'DEFAULT_RENDERER_CLASSES': ['rest_framework.renderers.JSONRenderer'],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.LimitOffsetPagination',
    'PAGE_SIZE': 100,
}


# -------------------------------------------------------------------
# EXPERIMENT DEFAULTS
# -------------------------------------------------------------------
def _from_env(key, default):
    raw = os.environ.get(f'MOELAB_{key.upper()}')
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.strip().lower() in ('1', 'true', 'yes', 'on')
    if isinstance(default, list):
        return [part.strip() for part in raw.split(',') if part.strip()]
    return type(default)(raw)


_MOELAB_DEFAULTS = {
    # model
    'layers': 4,
    'moe_layers': [],
    'experts': 16,
    'top_k': 2,
    'hidden_dim': 32,
    'ffn_dim': 64,
    'vocab_size': 64,
    'gate_skew': 1.5,
    'hotness_drift_period': 0,
    'model_seed': 0,
    'dtype_bytes': 4,
    # memory tiers and cost model
    'device_capacity_bytes': 0,
    'host_bandwidth': 64e9,
    'ssd_bandwidth': 0.0,
    'offload_tier': 'host',
    'compute_rate': 1e9,
    'expert_compute_cost': 2e-8,
    # decoding
    'engines': ['specmoe'],
    'policy': ['hot_temporal'],
    'remap': 'affinity',
    'mode': 'greedy',
    'temperature': 1.0,
    'batch': [1],
    'gamma': [10],
    'n_draft': [4],
    'bandwidth': [],
    'max_new_tokens': 32,
    'prompt_len': 8,
    'seeds': [str(s) for s in range(20)],
    'warmup_steps': 64,
    'cache_fraction': 0.10,
    # harness
    'workers': 1,
    'output': '',
    'format': 'csv',
    'verbose': False,
}

MOELAB = {key: _from_env(key, value) for key, value in _MOELAB_DEFAULTS.items()}


# -------------------------------------------------------------------
# LOGGING
# -------------------------------------------------------------------
MOELAB_LOG_LEVEL = os.environ.get('MOELAB_LOG_LEVEL', 'WARNING').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': MOELAB_LOG_LEVEL, 'propagate': False}
        for app in ('core', 'moe', 'memsim', 'drafting', 'specdec', 'baselines', 'harness')
    },
}
