"""
Django settings for the raycert project.

The project is used as a command-line toolkit: there is no URL configuration,
no database and no served endpoint. Settings hold the installed app, logging
and the single environment-driven tolerance.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals (signing); nothing here is secret
SECRET_KEY = os.getenv("RAYCERT_SECRET_KEY", "raycert-local-only")

DEBUG = False

ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    "raycert",
]

MIDDLEWARE: list[str] = []

DATABASES: dict[str, dict[str, str]] = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging goes to stderr; stdout is reserved for JSON payloads
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        "raycert": {
            "handlers": ["stderr"],
            "level": "WARNING",
            "propagate": False,
        },
    },
}


# Bundled model, domain and operator inputs
RAYCERT_BUNDLED_DIR = BASE_DIR / "raycert" / "bundled"

# Base numerical tolerance; all operator tolerances are derived from it
RAYCERT_DEFAULT_TOL = float(os.getenv("RAYCERT_DEFAULT_TOL", "1e-10"))
