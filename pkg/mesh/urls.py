from django.urls import path

from . import views

app_name = 'mesh'

urlpatterns = [
    # =============================================================================
    # RUN ARCHIVE URLS
    # =============================================================================
    path('runs/', views.run_list, name='run_list'),
    path('runs/<int:pk>/kpis/', views.run_kpis, name='run_kpis'),

    # =============================================================================
    # EXPORT URLS
    # =============================================================================
    path('runs/<int:pk>/export/', views.export_run, name='export_run'),
]
