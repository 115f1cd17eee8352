from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ...metrics import DatasetSchemaError, MetricsError
from ...reports import format_report, kpi_json, load_dataset
from .run_experiment import EXIT_IO, EXIT_VALIDATION


class Command(BaseCommand):
    help = "Recompute KPI tables from a dataset (.csv or .xlsx), grouped by test id."

    def add_arguments(self, parser):
        parser.add_argument('dataset', help="Dataset file (.csv or .xlsx) with the standard dataset columns.")
        parser.add_argument('--json', dest='json_out', default=None,
                            help="Write the KPI JSON here ('-' for standard output).")

    def handle(self, *args, **options):
        path = options['dataset']
        try:
            records = load_dataset(path)
        except DatasetSchemaError as exc:
            raise CommandError(f"{path}: {exc}", returncode=EXIT_VALIDATION) from exc
        except OSError as exc:
            raise CommandError(f"cannot read dataset {path}: {exc}", returncode=EXIT_IO) from exc

        if not records:
            self.stdout.write(self.style.WARNING(f"{path} holds no records"))
            return

        try:
            report = kpi_json(records)
        except MetricsError as exc:
            raise CommandError(f"{path}: {exc}", returncode=EXIT_VALIDATION) from exc

        json_out = options['json_out']
        if json_out == '-':
            self.stdout.write(report, ending='')
            return
        self.stdout.write(format_report(records))
        if json_out:
            try:
                Path(json_out).write_text(report, encoding='utf-8')
            except OSError as exc:
                raise CommandError(f"cannot write {json_out}: {exc}", returncode=EXIT_IO) from exc
            self.stdout.write(self.style.SUCCESS(f"\nKPI JSON written to {json_out}"))
