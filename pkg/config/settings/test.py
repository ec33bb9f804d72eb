"""
With these settings, tests run faster.
"""

from .base import *  # noqa: F403
from .base import LOGGING
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="Hs4vNc8QpLa1XzTe7WmKd3RbYu6JoGi9FqVn2CwEt5ZhMy0SrPgBlAkUxDjIf8Oe",
)
DEBUG = False
DEFAULT_SEED = 0
# Keep the training loop single-threaded under pytest.
PREFETCH_BATCHES = 0

# LOGGING
# ------------------------------------------------------------------------------
LOGGING["root"]["level"] = "WARNING"  # type: ignore[index]

# Celery
# ------------------------------------------------------------------------------
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
