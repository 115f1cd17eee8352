"""
Packet records, KPI computation, eCDFs and the CSV dataset contract.

Dataset columns, in order (CSV header written byte-for-byte, ``\\n`` line ends)::

    Timestamp,Test Id,Packet Id,Sender Address,Receiver Address,TTL,Tx Power,Priority Class,Delivered,Number of hops,PDT

Addresses are written as 0x-prefixed four-digit hex. Timestamp is the
reception wall-clock in milliseconds for delivered rows (origination + PDT)
and the origination wall-clock otherwise. Undelivered rows leave
``Number of hops`` and ``PDT`` empty.
"""

import csv
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .pdu_codec import format_address

logger = logging.getLogger(__name__)

DATASET_COLUMNS = (
    'Timestamp', 'Test Id', 'Packet Id', 'Sender Address', 'Receiver Address',
    'TTL', 'Tx Power', 'Priority Class', 'Delivered', 'Number of hops', 'PDT',
)

ECDF_COLUMNS = ('pdt_ms', 'fraction')


class MetricsError(ValueError):
    pass


class DatasetSchemaError(ValueError):
    def __init__(self, message, column=None, line=None):
        super().__init__(message)
        self.column = column
        self.line = line


@dataclass(frozen=True)
class PacketRecord:
    timestamp: int
    test_id: int
    packet_id: int
    sender_address: int
    receiver_address: int
    ttl: int
    tx_power: int
    priority_class: int
    delivered: int
    number_of_hops: int = None
    pdt_ms: int = None

    def __post_init__(self):
        if self.delivered not in (0, 1):
            raise MetricsError(f"delivered must be 0 or 1, got {self.delivered!r}")
        if self.delivered:
            if self.number_of_hops is None or self.pdt_ms is None:
                raise MetricsError("delivered record needs hops and PDT")
            if not 0 <= self.number_of_hops <= self.ttl:
                raise MetricsError(f"hops {self.number_of_hops} outside 0..{self.ttl}")
            if self.pdt_ms < 0:
                raise MetricsError(f"negative PDT {self.pdt_ms}")
        elif self.number_of_hops is not None or self.pdt_ms is not None:
            raise MetricsError("undelivered record cannot carry hops or PDT")

    @property
    def reception_timestamp(self):
        return self.timestamp + self.pdt_ms if self.delivered else self.timestamp


def hops_from_ttl(initial_ttl, ttl_at_delivery):
    if not 0 <= ttl_at_delivery <= initial_ttl:
        raise MetricsError(
            f"ttl at delivery {ttl_at_delivery} outside 0..{initial_ttl}")
    return initial_ttl - ttl_at_delivery


# =============================================================================
# KPIs
# =============================================================================

@dataclass(frozen=True)
class PriorityKpis:
    priority_class: int
    sent: int
    delivered: int
    pdr: float
    hops_avg: float = None
    pdt_avg: float = None
    pdt_std: float = None
    pdt_min: int = None
    pdt_max: int = None
    pdt_p80: float = None

    def as_dict(self):
        return asdict(self)


class KpiTable:
    """KPIs keyed by priority class."""

    def __init__(self, rows):
        self.rows = dict(sorted(rows.items()))

    def __getitem__(self, priority):
        return self.rows[priority]

    def __iter__(self):
        return iter(self.rows.values())

    def __len__(self):
        return len(self.rows)

    @property
    def priorities(self):
        return list(self.rows)

    def as_dict(self):
        return {str(priority): row.as_dict() for priority, row in self.rows.items()}


def _priority_kpis(priority, group):
    delivered = [r for r in group if r.delivered]
    row = dict(priority_class=priority, sent=len(group), delivered=len(delivered),
               pdr=len(delivered) / len(group))
    if delivered:
        # Sorted so float reductions do not depend on record order.
        pdt = np.sort(np.array([r.pdt_ms for r in delivered], dtype=np.int64))
        hops = np.array([r.number_of_hops for r in delivered], dtype=np.int64)
        row.update(
            hops_avg=float(hops.sum() / len(hops)),
            pdt_avg=float(pdt.sum() / len(pdt)),
            pdt_std=float(np.std(pdt, ddof=1)) if len(pdt) > 1 else 0.0,
            pdt_min=int(pdt[0]),
            pdt_max=int(pdt[-1]),
            pdt_p80=float(np.percentile(pdt, 80)),
        )
    return PriorityKpis(**row)


def compute_kpis(records):
    records = list(records)
    if not records:
        raise MetricsError("cannot compute KPIs of an empty record set")
    groups = defaultdict(list)
    for record in records:
        groups[record.priority_class].append(record)
    return KpiTable({priority: _priority_kpis(priority, group)
                     for priority, group in groups.items()})


def kpis_by_test(records):
    """One KpiTable per test id (one per traffic flow)."""
    groups = defaultdict(list)
    for record in records:
        groups[record.test_id].append(record)
    return {test_id: compute_kpis(group) for test_id, group in sorted(groups.items())}


def kpi_report(records):
    """JSON-ready nested mapping: test id -> priority -> KPI fields."""
    return {str(test_id): table.as_dict() for test_id, table in kpis_by_test(records).items()}


def ecdf(values):
    """Return ``(value, fraction)`` steps; equal values collapse onto their upper step."""
    values = np.asarray(list(values))
    if values.size == 0:
        raise MetricsError("eCDF of an empty sample")
    points, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    return [(point.item(), float(fraction)) for point, fraction in zip(points, fractions)]


def percentile(values, q):
    values = np.asarray(list(values))
    if values.size == 0:
        raise MetricsError("percentile of an empty sample")
    return float(np.percentile(values, q))


def delivered_pdts(records, priority=None, test_id=None):
    return [r.pdt_ms for r in records
            if r.delivered
            and (priority is None or r.priority_class == priority)
            and (test_id is None or r.test_id == test_id)]


# =============================================================================
# DATASET EXPORT / IMPORT
# =============================================================================

def dataset_row(record):
    return [
        record.reception_timestamp,
        record.test_id,
        record.packet_id,
        format_address(record.sender_address),
        format_address(record.receiver_address),
        record.ttl,
        record.tx_power,
        record.priority_class,
        record.delivered,
        '' if record.number_of_hops is None else record.number_of_hops,
        '' if record.pdt_ms is None else record.pdt_ms,
    ]


def _cell_int(row, column, line, optional=False):
    value = row.get(column)
    if value is None or (isinstance(value, str) and not value.strip()):
        if optional:
            return None
        raise DatasetSchemaError(f"line {line}: column '{column}' is empty", column=column, line=line)
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    try:
        return int(str(value).strip(), 0)
    except ValueError:
        raise DatasetSchemaError(
            f"line {line}: column '{column}' has non-integer value {value!r}",
            column=column, line=line) from None


def check_dataset_header(header):
    header = [str(name).strip() if name is not None else '' for name in header]
    for column in DATASET_COLUMNS:
        if column not in header:
            raise DatasetSchemaError(f"dataset is missing column '{column}'", column=column, line=1)
    for column in header:
        if column not in DATASET_COLUMNS:
            raise DatasetSchemaError(f"dataset has unknown column '{column}'", column=column, line=1)
    return header


def record_from_row(row, line):
    """Build a PacketRecord from a mapping keyed by dataset column names."""
    delivered = _cell_int(row, 'Delivered', line)
    hops = _cell_int(row, 'Number of hops', line, optional=True)
    pdt = _cell_int(row, 'PDT', line, optional=True)
    timestamp = _cell_int(row, 'Timestamp', line)
    if delivered and pdt is not None:
        timestamp -= pdt
    try:
        return PacketRecord(
            timestamp=timestamp,
            test_id=_cell_int(row, 'Test Id', line),
            packet_id=_cell_int(row, 'Packet Id', line),
            sender_address=_cell_int(row, 'Sender Address', line),
            receiver_address=_cell_int(row, 'Receiver Address', line),
            ttl=_cell_int(row, 'TTL', line),
            tx_power=_cell_int(row, 'Tx Power', line),
            priority_class=_cell_int(row, 'Priority Class', line),
            delivered=delivered,
            number_of_hops=hops,
            pdt_ms=pdt,
        )
    except MetricsError as exc:
        raise DatasetSchemaError(f"line {line}: {exc}", line=line) from exc


def write_dataset(records, handle):
    writer = csv.writer(handle, lineterminator='\n')
    writer.writerow(DATASET_COLUMNS)
    for record in records:
        writer.writerow(dataset_row(record))


def export_dataset(records, destination):
    with open(destination, 'w', newline='', encoding='utf-8') as handle:
        write_dataset(records, handle)


def import_dataset(path):
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        try:
            header = check_dataset_header(next(reader))
        except StopIteration:
            raise DatasetSchemaError("dataset is empty; expected a header row", line=1) from None
        records = []
        for line, values in enumerate(reader, start=2):
            if not any(value.strip() for value in values):
                continue
            if len(values) != len(header):
                raise DatasetSchemaError(
                    f"line {line}: expected {len(header)} fields, found {len(values)}", line=line)
            records.append(record_from_row(dict(zip(header, values)), line))
    logger.debug("Imported %d records from %s", len(records), path)
    return records


def export_ecdf(values, destination):
    with open(destination, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(ECDF_COLUMNS)
        for value, fraction in ecdf(values):
            writer.writerow([value, repr(fraction)])
