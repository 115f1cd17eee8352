import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import django
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ...metrics import kpi_report
from ...models import SimulationRun
from ...radio_sim import run
from ...reports import format_report, write_run_artifacts
from ...scenario import BUILTIN_SCENARIOS, ScenarioParseError, resolve_scenario

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2
EXIT_IO = 3


@dataclass
class RunResult:
    seed: int
    out_dir: Path
    records: list
    paths: list


def execute_run(scenario, seed, out_dir, workbook=False):
    """Simulate one seed and write its artifacts; runs in a worker process for --runs."""
    records = run(scenario, seed)
    paths = write_run_artifacts(records, out_dir, workbook=workbook)
    return RunResult(seed, Path(out_dir), records, paths)


def scenario_label(source):
    return source if source in BUILTIN_SCENARIOS else Path(source).stem


def load_or_fail(source):
    """Resolve a scenario, mapping failures onto the command exit codes."""
    try:
        return resolve_scenario(source)
    except ScenarioParseError as exc:
        raise CommandError(f"cannot parse scenario: {exc}", returncode=EXIT_VALIDATION) from exc
    except ValidationError as exc:
        details = '\n  '.join(exc.messages)
        raise CommandError(f"invalid scenario {source}:\n  {details}", returncode=EXIT_VALIDATION) from exc
    except OSError as exc:
        raise CommandError(f"cannot read scenario {source}: {exc}", returncode=EXIT_IO) from exc


class Command(BaseCommand):
    help = "Run a scenario and write the dataset CSV, KPI JSON and per-priority eCDF CSVs."

    def add_arguments(self, parser):
        parser.add_argument('--scenario', default='experiment1',
                            help="Builtin name (experiment1, experiment2) or path to a scenario file.")
        parser.add_argument('--seed', type=int, default=None,
                            help="Random seed (default: MESH_DEFAULT_SEED).")
        parser.add_argument('--out', default=None,
                            help="Output directory (default: MESH_OUTPUT_ROOT/<scenario>-seed<seed>).")
        parser.add_argument('--packets', type=int, default=None,
                            help="Override the packet count of every flow.")
        parser.add_argument('--interval-ms', type=int, default=None, dest='interval_ms',
                            help="Override the generation interval of every flow.")
        parser.add_argument('--no-jitter', action='store_true', dest='no_jitter',
                            help="Disable the random advertising delay.")
        parser.add_argument('--runs', type=int, default=1,
                            help="Number of consecutive seeds to run in parallel.")
        parser.add_argument('--xlsx', action='store_true',
                            help="Also write the dataset as an Excel workbook.")
        parser.add_argument('--save', action='store_true',
                            help="Store the run and its records in the database.")

    def handle(self, *args, **options):
        seed = settings.MESH_DEFAULT_SEED if options['seed'] is None else options['seed']
        for name, value, minimum in (('--seed', seed, 0), ('--runs', options['runs'], 1),
                                     ('--packets', options['packets'], 1),
                                     ('--interval-ms', options['interval_ms'], 1)):
            if value is not None and value < minimum:
                raise CommandError(f"{name} must be at least {minimum}", returncode=EXIT_VALIDATION)

        source = options['scenario']
        scenario = load_or_fail(source).with_overrides(
            packet_count=options['packets'],
            generation_interval_ms=options['interval_ms'],
            jitter=False if options['no_jitter'] else None,
        )
        label = scenario_label(source)
        out_root = Path(options['out'] or settings.MESH_OUTPUT_ROOT / f"{label}-seed{seed}")
        seeds = list(range(seed, seed + options['runs']))

        try:
            results = self._execute(scenario, seeds, out_root, options['xlsx'])
        except ValidationError as exc:
            raise CommandError('\n'.join(exc.messages), returncode=EXIT_VALIDATION) from exc
        except OSError as exc:
            raise CommandError(f"cannot write results: {exc}", returncode=EXIT_IO) from exc

        flow_labels = {index + 1: f"{flow.source_node} -> {flow.destination_node}"
                       for index, flow in enumerate(scenario.traffic)}
        for result in results:
            self.stdout.write(f"\n{label}, seed {result.seed}\n")
            self.stdout.write(format_report(result.records, flow_labels))
            self.stdout.write(self.style.SUCCESS(
                f"\nWrote {len(result.paths)} files to {result.out_dir}"))
            if options['save']:
                stored = SimulationRun.objects.store(
                    scenario_source=source, seed=result.seed, records=result.records,
                    kpis=kpi_report(result.records), packet_count=options['packets'])
                self.stdout.write(f"Saved as run {stored.pk}")

    def _execute(self, scenario, seeds, out_root, workbook):
        if len(seeds) == 1:
            return [execute_run(scenario, seeds[0], out_root, workbook)]

        workers = min(len(seeds), settings.MESH_RUN_WORKERS or os.cpu_count() or 1)
        logger.info("Running %d seeds on %d workers", len(seeds), workers)
        with ProcessPoolExecutor(max_workers=workers, initializer=django.setup) as pool:
            futures = [pool.submit(execute_run, scenario, seed, out_root / f"seed-{seed}", workbook)
                       for seed in seeds]
            return [future.result() for future in futures]
