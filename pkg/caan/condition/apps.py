from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ConditionConfig(AppConfig):
    name = "caan.condition"
    verbose_name = _("Device conditioning")
