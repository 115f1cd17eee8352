import io
import random
import tempfile
from pathlib import Path

from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from mesh.metrics import (
    DATASET_COLUMNS,
    DatasetSchemaError,
    MetricsError,
    PacketRecord,
    compute_kpis,
    ecdf,
    hops_from_ttl,
    import_dataset,
    kpi_report,
    percentile,
    write_dataset,
)

HEADER = ','.join(DATASET_COLUMNS)
TABLE_ROWS = (
    '1670585825695,1,18,0x0091,0x00C4,7,4,1,1,1,17',
    '1670585837784,1,24,0x0091,0x00C4,7,4,1,1,0,12',
)


def record(packet_id=1, priority=1, delivered=1, hops=1, pdt=10, test_id=1, ttl=7):
    return PacketRecord(
        timestamp=1_670_585_800_000 + packet_id, test_id=test_id, packet_id=packet_id,
        sender_address=0x0091, receiver_address=0x00C4, ttl=ttl, tx_power=4,
        priority_class=priority, delivered=delivered,
        number_of_hops=hops if delivered else None, pdt_ms=pdt if delivered else None,
    )


def write_csv(directory, text, name='dataset.csv'):
    path = Path(directory) / name
    path.write_text(text, encoding='utf-8')
    return path


delivered_records = st.builds(
    PacketRecord,
    timestamp=st.integers(0, 2_000_000_000_000),
    test_id=st.integers(1, 5),
    packet_id=st.integers(1, 10_000),
    sender_address=st.integers(1, 0x7FFF),
    receiver_address=st.integers(1, 0x7FFF),
    ttl=st.just(7),
    tx_power=st.sampled_from([4, 0, -8, -20, -40]),
    priority_class=st.integers(1, 3),
    delivered=st.just(1),
    number_of_hops=st.integers(0, 7),
    pdt_ms=st.integers(0, 60_000),
)
undelivered_records = st.builds(
    PacketRecord,
    timestamp=st.integers(0, 2_000_000_000_000),
    test_id=st.integers(1, 5),
    packet_id=st.integers(1, 10_000),
    sender_address=st.integers(1, 0x7FFF),
    receiver_address=st.integers(1, 0x7FFF),
    ttl=st.integers(0, 127),
    tx_power=st.sampled_from([4, 0, -8, -20, -40]),
    priority_class=st.integers(1, 3),
    delivered=st.just(0),
)


class PacketRecordTests(SimpleTestCase):
    def test_delivered_needs_hops_and_pdt(self):
        with self.assertRaises(MetricsError):
            PacketRecord(0, 1, 1, 1, 2, 7, 4, 1, 1)

    def test_undelivered_cannot_carry_pdt(self):
        with self.assertRaises(MetricsError):
            PacketRecord(0, 1, 1, 1, 2, 7, 4, 1, 0, None, 12)

    def test_hops_bounded_by_ttl(self):
        with self.assertRaises(MetricsError):
            record(ttl=3, hops=4)

    def test_reception_timestamp(self):
        self.assertEqual(record(pdt=17).reception_timestamp, record(pdt=17).timestamp + 17)
        self.assertEqual(record(delivered=0).reception_timestamp, record(delivered=0).timestamp)


class HopsFromTtlTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(hops_from_ttl(7, 7), 0)
        self.assertEqual(hops_from_ttl(7, 4), 3)
        self.assertEqual(hops_from_ttl(3, 0), 3)

    def test_ttl_cannot_grow(self):
        with self.assertRaises(MetricsError):
            hops_from_ttl(5, 6)


class ComputeKpisTests(SimpleTestCase):
    def test_delivery_ratio(self):
        records = [record(packet_id=i, delivered=int(i < 5430)) for i in range(6000)]
        self.assertAlmostEqual(compute_kpis(records)[1].pdr, 0.905)

    def test_pdt_statistics(self):
        table = compute_kpis([record(packet_id=i, pdt=pdt, hops=i)
                              for i, pdt in enumerate((10, 20, 30))])
        row = table[1]
        self.assertEqual((row.sent, row.delivered, row.pdr), (3, 3, 1.0))
        self.assertEqual(row.pdt_avg, 20.0)
        self.assertEqual(row.pdt_std, 10.0)
        self.assertEqual((row.pdt_min, row.pdt_max), (10, 30))
        self.assertEqual(row.hops_avg, 1.0)
        self.assertAlmostEqual(row.pdt_p80, 26.0)

    def test_nothing_delivered(self):
        row = compute_kpis([record(delivered=0)])[1]
        self.assertEqual((row.sent, row.delivered, row.pdr), (1, 0, 0.0))
        self.assertIsNone(row.pdt_avg)
        self.assertIsNone(row.hops_avg)
        self.assertIsNone(row.pdt_std)

    def test_single_delivery_has_zero_spread(self):
        self.assertEqual(compute_kpis([record(pdt=12)])[1].pdt_std, 0.0)

    def test_empty_input(self):
        with self.assertRaises(MetricsError):
            compute_kpis([])

    def test_priorities_are_separated(self):
        table = compute_kpis([record(1, priority=3), record(2, priority=1), record(3, priority=3, delivered=0)])
        self.assertEqual(table.priorities, [1, 3])
        self.assertEqual(table[3].pdr, 0.5)

    def test_order_does_not_matter(self):
        records = [record(packet_id=i, priority=1 + i % 3, delivered=int(i % 7 != 0),
                          pdt=(i * 37) % 400, hops=i % 4)
                   for i in range(300)]
        shuffled = list(records)
        random.Random(3).shuffle(shuffled)
        self.assertEqual(kpi_report(records), kpi_report(shuffled))

    def test_report_is_grouped_by_test(self):
        report = kpi_report([record(1, test_id=1), record(2, test_id=2, priority=2)])
        self.assertEqual(sorted(report), ['1', '2'])
        self.assertEqual(sorted(report['2']), ['2'])
        self.assertEqual(report['1']['1']['pdt_avg'], 10.0)


class EcdfTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(ecdf([3, 1, 2]), [(1, 1 / 3), (2, 2 / 3), (3, 1.0)])
        self.assertEqual(ecdf([5, 5, 5, 9]), [(5, 0.75), (9, 1.0)])

    def test_empty_sample(self):
        with self.assertRaises(MetricsError):
            ecdf([])
        with self.assertRaises(MetricsError):
            percentile([], 80)

    def test_percentile(self):
        self.assertEqual(percentile([10, 20, 30, 40, 50], 80), 42.0)
        self.assertEqual(percentile([7], 80), 7.0)

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(st.integers(0, 100_000), min_size=1))
    def test_steps_are_monotone_and_end_at_one(self, values):
        steps = ecdf(values)
        points = [point for point, _ in steps]
        fractions = [fraction for _, fraction in steps]
        self.assertEqual(points, sorted(set(values)))
        self.assertTrue(all(a < b for a, b in zip(fractions, fractions[1:])))
        self.assertGreater(fractions[0], 0.0)
        self.assertEqual(fractions[-1], 1.0)


class DatasetTests(SimpleTestCase):
    def test_reference_rows_survive_import_and_export(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(tmp, '\n'.join((HEADER,) + TABLE_ROWS) + '\n')
            records = import_dataset(path)
        self.assertEqual([r.pdt_ms for r in records], [17, 12])
        self.assertEqual([r.number_of_hops for r in records], [1, 0])
        self.assertEqual(records[0].timestamp, 1670585825695 - 17)
        self.assertEqual(records[0].sender_address, 0x0091)

        buffer = io.StringIO()
        write_dataset(records, buffer)
        self.assertEqual(buffer.getvalue().splitlines(), [HEADER, *TABLE_ROWS])

    def test_undelivered_row_leaves_hops_and_pdt_empty(self):
        buffer = io.StringIO()
        write_dataset([record(packet_id=3, delivered=0)], buffer)
        self.assertTrue(buffer.getvalue().splitlines()[1].endswith(',7,4,1,0,,'))

    def test_header_only(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(import_dataset(write_csv(tmp, HEADER + '\n')), [])

    def test_empty_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DatasetSchemaError):
                import_dataset(write_csv(tmp, ''))

    def test_missing_column_is_named(self):
        header = ','.join(column for column in DATASET_COLUMNS if column != 'Priority Class')
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DatasetSchemaError) as ctx:
                import_dataset(write_csv(tmp, header + '\n'))
        self.assertEqual(ctx.exception.column, 'Priority Class')

    def test_bad_cell_reports_line_and_column(self):
        bad = TABLE_ROWS[1].replace(',7,4,', ',seven,4,')
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DatasetSchemaError) as ctx:
                import_dataset(write_csv(tmp, '\n'.join((HEADER, TABLE_ROWS[0], bad)) + '\n'))
        self.assertEqual((ctx.exception.line, ctx.exception.column), (3, 'TTL'))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.one_of(delivered_records, undelivered_records), max_size=20))
    def test_records_survive_a_file_round_trip(self, records):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'dataset.csv'
            with open(path, 'w', newline='', encoding='utf-8') as handle:
                write_dataset(records, handle)
            self.assertEqual(import_dataset(path), records)
