import logging

from asgiref.sync import async_to_sync
from channels.layers import get_channel_layer
from django.conf import settings

logger = logging.getLogger(__name__)


def progress_group() -> str:
    return settings.TWINBENCH.get("PROGRESS_GROUP", "twinbench__progress")


def publish_progress(event: dict) -> None:
    """Forward a runner stage event to websocket listeners; never raises."""
    channel_layer = get_channel_layer()
    if channel_layer is None:
        return
    try:
        async_to_sync(channel_layer.group_send)(
            progress_group(),
            {"type": "run_progress", **event},
        )
    except Exception:
        logger.exception("could not publish progress for %s", event.get("model"))
