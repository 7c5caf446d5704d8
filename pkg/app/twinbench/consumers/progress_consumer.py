from channels.generic.websocket import JsonWebsocketConsumer
from asgiref.sync import async_to_sync
from twinbench.models import ModelRun
from twinbench.progress import progress_group
from twinbench.serializers import ModelRunSerializer

RECENT_RUNS = 10


class BatchProgressConsumer(JsonWebsocketConsumer):
    """Live stage events of running batches"""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.user = None
        self.group_name = None

    def connect(self):
        self.user = self.scope["user"]
        if not self.user.is_authenticated:
            self.close()
            return
        self.accept()

        self.group_name = progress_group()
        async_to_sync(self.channel_layer.group_add)(
            self.group_name,
            self.channel_name,
        )

        recent = ModelRun.objects.select_related("experiment").order_by("-timestamp")[:RECENT_RUNS]
        self.send_json(
            {
                "type": "recent_runs",
                "runs": ModelRunSerializer(recent, many=True).data,
            }
        )

    def disconnect(self, code):
        if self.group_name is not None:
            async_to_sync(self.channel_layer.group_discard)(
                self.group_name,
                self.channel_name,
            )
        return super().disconnect(code)

    def run_progress(self, event):
        self.send_json(event)
