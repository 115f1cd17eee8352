import logging

from django.contrib.auth.decorators import login_required
from django.http import HttpResponse, JsonResponse
from django.shortcuts import get_object_or_404

from ..metrics import write_dataset
from ..models import SimulationRun
from ..reports import XLSX_CONTENT_TYPE, dataset_workbook

logger = logging.getLogger(__name__)


# =============================================================================
# DATASET EXPORT VIEWS
# =============================================================================

@login_required(login_url='admin:login')
def export_run(request, pk):
    """Download a stored run's dataset as CSV (default) or XLSX."""
    run = get_object_or_404(SimulationRun, pk=pk)
    export_format = request.GET.get('format', 'csv')
    filename_base = f"run{run.pk}_{run.scenario_source.replace('/', '_')}_seed{run.seed}"
    records = run.packet_records()
    logger.info("Exporting run %s as %s (%d records)", run.pk, export_format, len(records))

    if export_format == 'csv':
        response = HttpResponse(content_type='text/csv; charset=utf-8')
        response['Content-Disposition'] = f'attachment; filename="{filename_base}.csv"'
        write_dataset(records, response)
        return response
    if export_format == 'xlsx':
        response = HttpResponse(content_type=XLSX_CONTENT_TYPE)
        response['Content-Disposition'] = f'attachment; filename="{filename_base}.xlsx"'
        dataset_workbook(records).save(response)
        return response
    return JsonResponse({'error': f"Unsupported export format: {export_format}"}, status=400)
