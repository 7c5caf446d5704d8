from twinbench.views import ExperimentViewSet, ModelRunViewSet, FrameScoreViewSet
from rest_framework.routers import DefaultRouter

router = DefaultRouter()

router.register("experiments", ExperimentViewSet)
router.register("runs", ModelRunViewSet)
router.register("frames", FrameScoreViewSet)

app_name = "api"
urlpatterns = router.urls
