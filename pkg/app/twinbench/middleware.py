from urllib.parse import parse_qs

from channels.db import database_sync_to_async
from django.utils.translation import gettext_lazy as _
from rest_framework.exceptions import AuthenticationFailed


def authenticate_token(key):
    """
    Resolve a DRF token key to its active user.

    Websocket clients pass the key in the query string, for example:

        ws://host/progress/?token=401f7ac837da42b97f613d789819ff93537bee6a
    """
    from rest_framework.authtoken.models import Token

    try:
        token = Token.objects.select_related("user").get(key=key)
    except Token.DoesNotExist:
        raise AuthenticationFailed(_("Invalid token."))
    if not token.user.is_active:
        raise AuthenticationFailed(_("User inactive or deleted."))
    return token.user


@database_sync_to_async
def get_user(token_key):
    """The user behind ``token_key``, or AnonymousUser when it is missing or invalid."""
    from django.contrib.auth.models import AnonymousUser

    if not token_key:
        return AnonymousUser()
    try:
        return authenticate_token(token_key)
    except AuthenticationFailed:
        return AnonymousUser()


class TokenAuthMiddleware:
    """Populate ``scope['user']`` from a ``?token=`` query parameter."""

    def __init__(self, app) -> None:
        self.app = app

    async def __call__(self, scope, receive, send):
        query_params = parse_qs(scope.get("query_string", b"").decode())
        token_key = query_params.get("token", [None])[0]
        scope["token"] = token_key
        scope["user"] = await get_user(token_key)
        return await self.app(scope, receive, send)
