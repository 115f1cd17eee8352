from django.contrib import admin
from django.urls import include, path

urlpatterns = [
    path('admin/', admin.site.urls),
    path('', include('mesh.urls')),
]

handler404 = 'mesh.views.custom_404'
