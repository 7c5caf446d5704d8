"""
ASGI config for the twinbench project.

HTTP serves the admin and the results API; websockets carry the live
batch progress feed.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'app.settings')

django_asgi_app = get_asgi_application()

from channels.routing import ProtocolTypeRouter, URLRouter  # noqa: E402
from twinbench import routing  # noqa: E402
from twinbench.middleware import TokenAuthMiddleware  # noqa: E402

application = ProtocolTypeRouter(
    {
        'http': django_asgi_app,
        'websocket': TokenAuthMiddleware(URLRouter(routing.websocket_urlpatterns)),
    }
)
