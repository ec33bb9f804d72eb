from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class NetworkConfig(AppConfig):
    name = "caan.network"
    verbose_name = _("Scene and device networks")
