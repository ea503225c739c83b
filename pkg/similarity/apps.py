# similarity/apps.py
from django.apps import AppConfig

class SimilarityConfig(AppConfig):
    default_auto_field = 'django.db.models.AutoField'
    name = 'similarity'
    verbose_name = 'Group-theoretic similarity solutions'
