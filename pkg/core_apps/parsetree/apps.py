from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ParsetreeConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "core_apps.parsetree"
    verbose_name = _("Parse Trees")
