"""
Django settings for condpath project.

The project has no web surface: it hosts the ``diagrams`` app, whose
management commands are the command-line front end, and the ``CONDPATH``
dict that tunes the analysis library.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('CONDPATH_SECRET_KEY', 'django-insecure-condpath-local-only')

DEBUG = os.environ.get('CONDPATH_DEBUG', '') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'diagrams',
]

MIDDLEWARE = []


# Database
# Nothing is persisted; the test runner works without a database.

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging
# Everything goes to stderr; stdout belongs to command reports.

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'diagrams': {
            'handlers': ['console'],
            'level': os.environ.get('CONDPATH_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}


# Analysis tunables (validated by diagrams.conf.AnalysisSettings)

_CONDPATH_DEFAULTS = {
    'rel_tol': 1e-9,
    'abs_tol': 1e-12,
    'pivot_tol': 1e-10,
    'sign_band': 1e-9,
    'path_cap': 10000,
    'split_variance': 1.0,
    'split_suffix_attempts': 3,
    'pd_attempts': 100,
    'loading_step': 0.1,
    'loading_max': 5,
    'witness_floor': 1e-6,
}

# CONDPATH_PATH_CAP=50000 etc. override the defaults; pydantic coerces the strings.
CONDPATH = {
    key: os.environ.get(f'CONDPATH_{key.upper()}', default)
    for key, default in _CONDPATH_DEFAULTS.items()
}
