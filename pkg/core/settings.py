"""
Django settings for the entity linking toolkit.

The project has no web surface; Django provides settings, the ORM used for the
ingested knowledge base, management commands and the test runner.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "linking-local-only-not-a-secret")

DEBUG = os.environ.get("DJANGO_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "linking",
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.environ.get("LINKING_DB", BASE_DIR / "db.sqlite3"),
    }
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Run defaults, overridable per run by a config file or command flags
LINKING = {
    "SEED": int(os.environ.get("LINKING_SEED", "0")),
    "THREADS": int(os.environ.get("LINKING_THREADS", "1")),
    "CHECKPOINT_DIR": os.environ.get("LINKING_CHECKPOINT_DIR", str(BASE_DIR / "checkpoints")),
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "linking": {
            "handlers": ["console"],
            "level": os.environ.get("LINKING_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
