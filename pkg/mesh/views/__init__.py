# Import all views from submodules for easy access
from .run_views import (
    # Run archive views
    run_list,
    run_kpis,

    # Error handlers
    custom_404,
)

from .data_views import (
    # Export views
    export_run,
)

__all__ = [
    'run_list',
    'run_kpis',
    'custom_404',
    'export_run',
]
