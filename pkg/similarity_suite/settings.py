"""
Django settings for the similarity_suite project.
The project only hosts management commands; no web server is configured.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths
BASE_DIR = Path(__file__).resolve().parent.parent

# ==================== CORE ====================
SECRET_KEY = os.environ.get('SECRET_KEY', 'similarity-suite-local-key')
DEBUG = os.environ.get('SIMILARITY_DEBUG', 'False') == 'True'
ALLOWED_HOSTS = []

# ==================== APPLICATION DEFINITION ====================
INSTALLED_APPS = [
    # Django core
    'django.contrib.contenttypes',
    'django.contrib.auth',

    # Third party apps
    'rest_framework',

    # Local apps
    'similarity',
]

# ==================== DATABASE ====================
# Nothing is persisted; the app keeps no models
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

# ==================== INTERNATIONALIZATION ====================
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.AutoField'

# ==================== LOGGING CONFIGURATION ====================
LOG_LEVEL = os.environ.get('SIMILARITY_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {message}',
            'style': '{',
        },
        'verbose': {
            'format': '{asctime} {levelname} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple'
        },
        'file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'debug.log',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': True,
        },
        'similarity': {
            'handlers': ['console', 'file'],
            'level': 'DEBUG',
            'propagate': False,
        },
    },
}

# Create logs directory if it doesn't exist
os.makedirs(BASE_DIR / 'logs', exist_ok=True)

# ==================== APP SPECIFIC SETTINGS ====================
# Where `run` writes CSV and plot files unless --out is given
SIMILARITY_OUTPUT_DIR = Path(os.environ.get('SIMILARITY_OUTPUT_DIR', BASE_DIR / 'output'))

# Directory searched for bundled scenarios by name
SIMILARITY_SCENARIO_DIR = BASE_DIR / 'similarity' / 'bundled'

# Largest accepted residual per equation. Values are relative to the largest
# term of the equation except the plume FD comparisons, which are pointwise
# relative to the series.
SIMILARITY_VERIFY_THRESHOLDS = {
    'lake-case1': 1e-8,
    'lake-case2': 1e-8,
    'lake-reduced-ode': 1e-3,
    'continuity': 1e-6,
    'momentum': 1e-4,
    'energy': 1e-4,
    'similarity-odes': 1e-6,
    'plume-mode': 1e-8,
    'plume-fd-deviation': 1e-2,
    'plume-fd-robin': 1e-2,
    'advection-diffusion': 1e-4,
}

SIMILARITY_PLOT_FORMAT = 'svg'
