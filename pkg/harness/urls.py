from rest_framework.routers import DefaultRouter

from .views import ExperimentViewSet, ResultRecordViewSet

router = DefaultRouter()
router.register("experiments", ExperimentViewSet, basename="experiment")
router.register("results", ResultRecordViewSet, basename="result")

urlpatterns = router.urls
