from django_filters.rest_framework import DjangoFilterBackend
from rest_framework import viewsets

from .models import Experiment, ResultRecord
from .serializers import ExperimentSerializer, ResultRecordSerializer


class ExperimentViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = Experiment.objects.all()
    serializer_class = ExperimentSerializer


class ResultRecordViewSet(viewsets.ReadOnlyModelViewSet):
    """Stored result rows; filter with e.g. ``?engine=specmoe&policy=hot_temporal&batch=8``."""
    queryset = ResultRecord.objects.select_related("experiment")
    serializer_class = ResultRecordSerializer
    filter_backends = [DjangoFilterBackend]
    filterset_fields = ["experiment", "engine", "policy", "batch", "gamma", "n_draft", "bandwidth", "seed"]
