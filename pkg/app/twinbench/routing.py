from django.urls import path
from twinbench.consumers import BatchProgressConsumer

websocket_urlpatterns = [
    path("progress/", BatchProgressConsumer.as_asgi()),
]
