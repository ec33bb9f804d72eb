from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class PoolheadsConfig(AppConfig):
    name = "caan.poolheads"
    verbose_name = _("Pooling heads")
