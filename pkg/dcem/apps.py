from django.apps import AppConfig


class DcemConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dcem'
    verbose_name = 'Disparate censorship EM'
