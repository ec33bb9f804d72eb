from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class EvalvizConfig(AppConfig):
    name = "caan.evalviz"
    verbose_name = _("Evaluation and visualisation")
