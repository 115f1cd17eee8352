from django.contrib.auth.decorators import login_required
from django.http import JsonResponse
from django.shortcuts import get_object_or_404

from ..models import SimulationRun


def run_summary(run):
    """Archive listing entry for one stored run."""
    return {
        'id': run.pk,
        'scenario': run.scenario_source,
        'seed': run.seed,
        'packet_count': run.packet_count,
        'records': run.record_count,
        'delivered': run.delivered_count,
        'pdr': round(run.pdr, 6),
        'created_at': run.created_at.isoformat(),
    }


# =============================================================================
# RUN ARCHIVE VIEWS
# =============================================================================

@login_required(login_url='admin:login')
def run_list(request):
    """Stored runs, newest first, optionally filtered by ?scenario=."""
    runs = SimulationRun.objects.all()
    scenario = request.GET.get('scenario', '')
    if scenario:
        runs = runs.filter(scenario_source=scenario)
    return JsonResponse({'runs': [run_summary(run) for run in runs]})


@login_required(login_url='admin:login')
def run_kpis(request, pk):
    run = get_object_or_404(SimulationRun, pk=pk)
    return JsonResponse({'run': run_summary(run), 'kpis': run.kpis})


# =============================================================================
# ERROR HANDLERS
# =============================================================================

def custom_404(request, exception):
    return JsonResponse({'error': 'Not found', 'path': request.path}, status=404)
