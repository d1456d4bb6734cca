from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class SemanticParserConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "core_apps.parser"
    verbose_name = _("Semantic Parser")
