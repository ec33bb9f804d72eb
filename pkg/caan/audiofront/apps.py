from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class AudiofrontConfig(AppConfig):
    name = "caan.audiofront"
    verbose_name = _("Audio front end")
