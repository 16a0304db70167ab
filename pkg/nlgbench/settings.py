"""
Django settings for the nlgbench project.

Numerical tunables of the toolkit live in the ``NLG`` dict at the bottom;
``games.conf.nlg_setting`` reads them with defaults.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'NLG_SECRET_KEY',
    'django-insecure-3v!k0q8d^w$u1n7x#g14-bench-local-only',
)

DEBUG = os.environ.get('NLG_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    'games',
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

ROOT_URLCONF = 'nlgbench.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database
# Runs and ingested counts are stored here (see games.services.records).

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'games': {
            'handlers': ['console'],
            'level': os.environ.get('NLG_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Toolkit tunables

NLG = {
    'THREADS': int(os.environ.get('NLG_THREADS', '1')),
    'REPFIND_RESTARTS': 32,
    'FIT_RESTARTS': 16,
    'ANSATZ_RESTARTS': 64,
    'CLASSICAL_MAX_BITS': 30,
    'DEFAULT_SHOTS': 2000,
    'DELTA': 0.05,
    'ALPHA': 0.05,
    'FOLDS': 5,
    'OUTPUT_DIR': BASE_DIR / 'runs',
}
