"""Desk-scale replicas of the two builtin experiments, checked for trends."""

import functools
import io
import logging
import statistics

from django.test import SimpleTestCase

from mesh.metrics import compute_kpis, delivered_pdts, ecdf, percentile, write_dataset
from mesh.radio_sim import run
from mesh.reports import REFERENCE_P80_MS
from mesh.scenario import experiment1, experiment2

logger = logging.getLogger(__name__)

REPLICA_PACKETS = 1500
SEED = 42
PRIORITIES = (1, 2, 3)


@functools.lru_cache(maxsize=None)
def replica(name):
    scenario = {'experiment1': experiment1, 'experiment2': experiment2}[name]()
    return tuple(run(scenario.with_overrides(packet_count=REPLICA_PACKETS), SEED))


def flow_records(records, test_id):
    return [record for record in records if record.test_id == test_id]


def dataset_text(records):
    buffer = io.StringIO()
    write_dataset(records, buffer)
    return buffer.getvalue()


class TrendAssertions:
    def assertPriorityOrdering(self, records):
        medians = [statistics.median(delivered_pdts(records, priority=p)) for p in PRIORITIES]
        logger.info("Median PDT by priority: %s", medians)
        self.assertGreater(medians[0], 0)
        self.assertGreaterEqual(medians[1], 1.5 * medians[0], medians)
        self.assertGreaterEqual(medians[2], 1.5 * medians[1], medians)

    def assertConservation(self, records, sent):
        table = compute_kpis(records)
        self.assertEqual(sum(row.sent for row in table), sent)
        for record in records:
            if record.delivered:
                self.assertTrue(0 <= record.number_of_hops <= record.ttl)
        for priority in table.priorities:
            values = delivered_pdts(records, priority=priority)
            if values:
                fractions = [fraction for _, fraction in ecdf(values)]
                self.assertEqual(fractions, sorted(fractions))
                self.assertEqual(fractions[-1], 1.0)


class SingleFlowExperimentTests(TrendAssertions, SimpleTestCase):
    def setUp(self):
        self.records = replica('experiment1')
        self.table = compute_kpis(self.records)

    def test_every_packet_is_accounted_for(self):
        self.assertEqual(len(self.records), REPLICA_PACKETS)
        self.assertConservation(self.records, REPLICA_PACKETS)

    def test_latency_grows_with_priority_number(self):
        self.assertPriorityOrdering(self.records)

    def test_delivery_ratio(self):
        self.assertEqual(self.table[1].pdr, 1.0)
        self.assertEqual(self.table[2].pdr, 1.0)
        self.assertGreaterEqual(self.table[3].pdr, 0.80)
        self.assertLess(self.table[3].pdr, 1.0)

    def test_hop_count_grows_with_priority_number(self):
        hops = [self.table[p].hops_avg for p in PRIORITIES]
        self.assertLess(hops[0], hops[1])
        self.assertLess(hops[1], hops[2])
        policy = experiment1().policy
        for priority in PRIORITIES:
            self.assertLessEqual(self.table[priority].hops_avg, policy.params_for_priority(priority).ttl)

    def test_80th_percentiles_are_ordered(self):
        p80 = [percentile(delivered_pdts(self.records, priority=p), 80) for p in PRIORITIES]
        for priority, value in zip(PRIORITIES, p80):
            logger.info("P%d 80th percentile PDT %.1f ms (testbed reference %d ms)",
                        priority, value, REFERENCE_P80_MS[priority])
        self.assertLess(p80[0], p80[1])
        self.assertLess(p80[1], p80[2])

    def test_rerun_is_byte_identical(self):
        scenario = experiment1().with_overrides(packet_count=REPLICA_PACKETS)
        self.assertEqual(dataset_text(run(scenario, SEED)), dataset_text(self.records))


class TwoFlowExperimentTests(TrendAssertions, SimpleTestCase):
    def setUp(self):
        self.records = replica('experiment2')
        self.first = flow_records(self.records, 1)
        self.second = flow_records(self.records, 2)

    def test_both_flows_are_accounted_for(self):
        self.assertEqual((len(self.first), len(self.second)), (REPLICA_PACKETS, REPLICA_PACKETS))
        self.assertConservation(self.records, 2 * REPLICA_PACKETS)

    def test_priority_ordering_holds_per_flow(self):
        self.assertPriorityOrdering(self.first)
        self.assertPriorityOrdering(self.second)

    def test_second_flow_keeps_the_first_flow_plan(self):
        single = replica('experiment1')
        self.assertEqual([r.priority_class for r in self.first], [r.priority_class for r in single])
        self.assertEqual([r.timestamp for r in self.first], [r.timestamp for r in single])

    def test_congestion_never_improves_latency(self):
        single = compute_kpis(replica('experiment1'))
        shared = compute_kpis(self.first)
        for priority in PRIORITIES:
            logger.info("P%d mean PDT on A -> H: %.2f ms alone, %.2f ms shared",
                        priority, single[priority].pdt_avg, shared[priority].pdt_avg)
            self.assertGreaterEqual(shared[priority].pdt_avg, 0.95 * single[priority].pdt_avg)
