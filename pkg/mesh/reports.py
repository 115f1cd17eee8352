"""
Run artifacts: dataset files, KPI JSON, eCDF CSVs and the printed KPI summary.
"""

import json
import logging
from pathlib import Path

import openpyxl
from openpyxl.styles import Alignment, Font, PatternFill

from .metrics import (
    DATASET_COLUMNS,
    DatasetSchemaError,
    check_dataset_header,
    dataset_row,
    delivered_pdts,
    export_dataset,
    export_ecdf,
    import_dataset,
    kpi_report,
    kpis_by_test,
    record_from_row,
)

logger = logging.getLogger(__name__)

DATASET_CSV = 'dataset.csv'
DATASET_XLSX = 'dataset.xlsx'
KPI_JSON = 'kpis.json'

# Reference 80th-percentile PDTs (ms) of the hardware testbed, logged for comparison only.
REFERENCE_P80_MS = {1: 20, 2: 100, 3: 300}

XLSX_CONTENT_TYPE = 'application/vnd.openxmlformats-officedocument.spreadsheetml.sheet'


def kpi_json(records):
    return json.dumps(kpi_report(records), indent=2, sort_keys=True) + '\n'


def ecdf_filename(test_id, priority):
    return f"ecdf_test{test_id}_p{priority}.csv"


# =============================================================================
# WORKBOOK
# =============================================================================

def dataset_workbook(records):
    """Workbook with the dataset columns and a styled header row."""
    workbook = openpyxl.Workbook()
    worksheet = workbook.active
    worksheet.title = 'Dataset'

    header_font = Font(bold=True, color='FFFFFF')
    header_fill = PatternFill(start_color='2563EB', end_color='2563EB', fill_type='solid')
    for col_num, header in enumerate(DATASET_COLUMNS, 1):
        cell = worksheet.cell(row=1, column=col_num, value=header)
        cell.font = header_font
        cell.fill = header_fill
        cell.alignment = Alignment(horizontal='center')

    for row_num, record in enumerate(records, 2):
        for col_num, value in enumerate(dataset_row(record), 1):
            worksheet.cell(row=row_num, column=col_num, value=None if value == '' else value)

    for column in worksheet.columns:
        width = max(len(str(cell.value)) for cell in column if cell.value is not None)
        worksheet.column_dimensions[column[0].column_letter].width = min(width + 2, 50)
    return workbook


def export_workbook(records, destination):
    dataset_workbook(records).save(destination)


def import_workbook(path):
    workbook = openpyxl.load_workbook(path, read_only=True, data_only=True)
    try:
        rows = workbook.active.iter_rows(values_only=True)
        try:
            header = check_dataset_header(next(rows))
        except StopIteration:
            raise DatasetSchemaError("workbook is empty; expected a header row", line=1) from None
        records = []
        for line, values in enumerate(rows, start=2):
            if all(value is None for value in values):
                continue
            records.append(record_from_row(dict(zip(header, values)), line))
        return records
    finally:
        workbook.close()


def load_dataset(path):
    """Read a dataset from ``.csv`` or ``.xlsx``."""
    path = Path(path)
    if path.suffix.lower() == '.xlsx':
        return import_workbook(path)
    return import_dataset(path)


# =============================================================================
# RUN ARTIFACTS
# =============================================================================

def write_run_artifacts(records, out_dir, workbook=False):
    """Write dataset, KPI JSON and per-flow, per-priority eCDFs; return the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = [out_dir / DATASET_CSV, out_dir / KPI_JSON]
    export_dataset(records, written[0])
    written[1].write_text(kpi_json(records), encoding='utf-8')

    for test_id, table in kpis_by_test(records).items():
        for priority in table.priorities:
            values = delivered_pdts(records, priority=priority, test_id=test_id)
            if values:
                path = out_dir / ecdf_filename(test_id, priority)
                export_ecdf(values, path)
                written.append(path)

    if workbook:
        written.append(out_dir / DATASET_XLSX)
        export_workbook(records, written[-1])
    logger.info("Wrote %d artifacts to %s", len(written), out_dir)
    return written


# =============================================================================
# TABLE RENDERING
# =============================================================================

def _cell(value, digits=3):
    if value is None:
        return '-'
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def format_kpi_table(table, title):
    rows = [
        ('PDR', 'pdr'),
        ('Number of hops Avg', 'hops_avg'),
        ('PDT Avg (ms)', 'pdt_avg'),
        ('PDT Std. Dev (ms)', 'pdt_std'),
        ('PDT Min (ms)', 'pdt_min'),
        ('PDT Max (ms)', 'pdt_max'),
        ('PDT 80th pct (ms)', 'pdt_p80'),
        ('Packets sent', 'sent'),
    ]
    headers = ['KPI'] + [f"Priority {priority}" for priority in table.priorities]
    body = [[label] + [_cell(getattr(row, attr)) for row in table] for label, attr in rows]
    widths = [max(len(line[i]) for line in [headers] + body) for i in range(len(headers))]

    lines = [title]
    lines.append('  '.join(h.ljust(widths[0]) if i == 0 else h.rjust(widths[i])
                           for i, h in enumerate(headers)))
    lines.append('  '.join('-' * width for width in widths))
    for line in body:
        lines.append('  '.join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i])
                               for i, c in enumerate(line)))
    return '\n'.join(lines)


def format_report(records, flow_labels=None):
    flow_labels = flow_labels or {}
    blocks = []
    for test_id, table in kpis_by_test(records).items():
        label = flow_labels.get(test_id)
        title = f"Test {test_id}" + (f" ({label})" if label else '')
        blocks.append(format_kpi_table(table, title))
    return '\n\n'.join(blocks)
