from pathlib import Path
import os
from django.core.management.utils import get_random_secret_key

# Try to import dotenv, but don't fail if it's not available
try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = None

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Pick up a local .env before reading any DCEM_* variable
if load_dotenv:
    load_dotenv(BASE_DIR / '.env')


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SECRET_KEY', get_random_secret_key())

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third party apps
    'rest_framework',

    # Local apps
    'dcem',
]

# Database
# The experiments never touch the ORM; the default stays so Django's checks pass.
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

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Experiment defaults
DCEM = {
    # Every simulation and model seed derives from this one
    'MASTER_SEED': int(os.environ.get('DCEM_MASTER_SEED', '42')),
    'WORKERS': int(os.environ.get('DCEM_WORKERS', '1')),
    'RESULTS_DIR': Path(os.environ.get('DCEM_RESULTS_DIR', BASE_DIR / 'results')),
    'GRID_RESOLUTION': float(os.environ.get('DCEM_GRID_RESOLUTION', '1e-5')),
}


# Logging
DCEM_LOG_LEVEL = os.environ.get('DCEM_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'dcem': {
            'handlers': ['console'],
            'level': DCEM_LOG_LEVEL,
            'propagate': False,
        },
    },
}
