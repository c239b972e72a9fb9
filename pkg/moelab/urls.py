"""
URL configuration for the moelab project.

    /admin/            browse saved experiments and their result rows
    /api/experiments/  read-only experiment list
    /api/results/      read-only result rows, filterable by sweep axis
"""
from django.contrib import admin
from django.urls import include, path

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/', include('harness.urls')),
]
