from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class DatasetConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "core_apps.dataset"
    verbose_name = _("Versioned Datasets")
