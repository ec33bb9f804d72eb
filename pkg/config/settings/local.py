from .base import *  # noqa: F403
from .base import LOGGING
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = True
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="q7Rk2mVb9TzLw4HcXe8NjPa3UsYd6GfQo1BiKt5ZrMnWv0ExJhCyDpSgAlFuOc2T",
)

# LOGGING
# ------------------------------------------------------------------------------
LOGGING["root"]["level"] = env("CAAN_LOG_LEVEL", default="DEBUG")  # type: ignore[index]

# Celery
# ------------------------------------------------------------------------------
# https://docs.celeryq.dev/en/stable/userguide/configuration.html#task-eager-propagates
CELERY_TASK_EAGER_PROPAGATES = True
