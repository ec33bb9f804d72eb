from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class TensorConfig(AppConfig):
    name = "caan.tensor"
    verbose_name = _("Tensor engine")
