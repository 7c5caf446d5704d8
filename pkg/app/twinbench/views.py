from rest_framework.response import Response
from rest_framework.authtoken.models import Token
from rest_framework.authtoken.views import ObtainAuthToken
from rest_framework.mixins import RetrieveModelMixin, ListModelMixin
from rest_framework.viewsets import GenericViewSet
from rest_framework.permissions import IsAuthenticated
from .serializers import ExperimentSerializer, ModelRunSerializer, FrameScoreSerializer
from .paginators import RunPagination, FrameScorePagination
from .models import Experiment, ModelRun, FrameScore
import uuid


def _uuid_or_none(value):
    try:
        return uuid.UUID(value)
    except (TypeError, ValueError):
        return None


class ExperimentViewSet(ListModelMixin, RetrieveModelMixin, GenericViewSet):
    permission_classes = [IsAuthenticated]
    serializer_class = ExperimentSerializer
    queryset = Experiment.objects.all().order_by("-created")
    pagination_class = RunPagination


class ModelRunViewSet(ListModelMixin, RetrieveModelMixin, GenericViewSet):
    """Runs, optionally filtered by ``?experiment=<id>`` and ``?status=<status>``."""
    permission_classes = [IsAuthenticated]
    serializer_class = ModelRunSerializer
    queryset = ModelRun.objects.none()
    pagination_class = RunPagination

    def get_queryset(self):
        queryset = ModelRun.objects.select_related("experiment").order_by("model", "variant")
        experiment = self.request.GET.get("experiment")
        if experiment:
            queryset = queryset.filter(experiment__id=_uuid_or_none(experiment))
        status = self.request.GET.get("status")
        if status:
            queryset = queryset.filter(status=status)
        return queryset


class FrameScoreViewSet(ListModelMixin, GenericViewSet):
    permission_classes = [IsAuthenticated]
    serializer_class = FrameScoreSerializer
    queryset = FrameScore.objects.none()
    pagination_class = FrameScorePagination

    def get_queryset(self):
        run = _uuid_or_none(self.request.GET.get("run"))
        if run is None:
            return FrameScore.objects.none()
        return FrameScore.objects.filter(run__id=run).order_by("frame_index")


class CustomObtainAuthTokenView(ObtainAuthToken):
    def post(self, request, *args, **kwargs):
        serializer = self.get_serializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        user = serializer.validated_data["user"]
        token, created = Token.objects.get_or_create(user=user)
        return Response({"token": token.key, "username": user.username})
