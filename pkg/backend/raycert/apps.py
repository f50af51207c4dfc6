from django.apps import AppConfig


class RaycertConfig(AppConfig):
    name = "raycert"
    verbose_name = "Ray structure certificates"
