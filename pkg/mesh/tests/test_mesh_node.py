from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from mesh.mesh_node import (
    CACHE_CAPACITY,
    Deliver,
    DeliverAndRelay,
    Discard,
    DiscardReason,
    NodeConfig,
    NodeState,
    Relay,
    cache_check_insert,
    handle_received,
    originate,
    schedule_transmissions,
)
from mesh.pdu_codec import NetworkPdu
from mesh.qos_policy import SENSOR_OPCODES, TxParams, builtin_table2_policy

GROUP = 0xC000


def node(relay=True, subscriptions=(GROUP,)):
    return NodeState(NodeConfig(
        node_id='H', elements=(0x00C4, 0x00C5, 0x00C6),
        subscriptions=frozenset(subscriptions), relay_enabled=relay, position=(16.5, 0.0)))


class HandleReceivedTests(SimpleTestCase):
    def setUp(self):
        self.policy = builtin_table2_policy()

    def pdu(self, **fields):
        values = dict(src=0x0091, dst=0x0200, ttl=7, seq=18, priority=1, payload=b'\x01')
        values.update(fields)
        return NetworkPdu(**values)

    def test_own_unicast_is_delivered_without_relay(self):
        decision = handle_received(node(), self.pdu(dst=0x00C5), self.policy)
        self.assertEqual(decision, Deliver(0x00C5))

    def test_subscribed_group_is_delivered_and_relayed(self):
        pdu = self.pdu(dst=GROUP)
        decision = handle_received(node(), pdu, self.policy)
        self.assertIsInstance(decision, DeliverAndRelay)
        self.assertEqual(decision.address, GROUP)
        self.assertEqual(decision.pdu, replace(pdu, ttl=6))
        self.assertEqual(decision.params, self.policy.params_for_priority(1))

    def test_subscribed_group_with_last_hop_ttl_is_only_delivered(self):
        decision = handle_received(node(), self.pdu(dst=GROUP, ttl=1), self.policy)
        self.assertEqual(decision, Deliver(GROUP))

    def test_subscribed_group_on_non_relay_is_only_delivered(self):
        decision = handle_received(node(relay=False), self.pdu(dst=GROUP), self.policy)
        self.assertEqual(decision, Deliver(GROUP))

    def test_foreign_unicast_is_relayed_with_ttl_decremented(self):
        pdu = self.pdu()
        decision = handle_received(node(), pdu, self.policy)
        self.assertIsInstance(decision, Relay)
        self.assertEqual(decision.pdu.ttl, 6)
        self.assertEqual(decision.pdu.priority, 1)
        self.assertEqual(replace(decision.pdu, ttl=pdu.ttl), pdu)

    def test_foreign_group_is_relayed(self):
        decision = handle_received(node(subscriptions=()), self.pdu(dst=0xC123), self.policy)
        self.assertIsInstance(decision, Relay)

    def test_relay_params_follow_the_packet_priority(self):
        for priority, expected in ((1, 1), (3, 3), (0, 2), (42, 2)):
            with self.subTest(priority=priority):
                decision = handle_received(node(), self.pdu(priority=priority, seq=priority), self.policy)
                self.assertEqual(decision.params, self.policy.params_for_priority(expected))

    def test_low_ttl_is_discarded(self):
        for ttl in (0, 1):
            with self.subTest(ttl=ttl):
                decision = handle_received(node(), self.pdu(ttl=ttl, seq=ttl), self.policy)
                self.assertEqual(decision, Discard(DiscardReason.TTL_EXPIRED))

    def test_relay_disabled_discards_foreign_traffic(self):
        decision = handle_received(node(relay=False), self.pdu(), self.policy)
        self.assertEqual(decision, Discard(DiscardReason.RELAY_DISABLED))

    def test_second_copy_is_a_duplicate(self):
        state = node()
        self.assertIsInstance(handle_received(state, self.pdu(), self.policy), Relay)
        self.assertEqual(handle_received(state, self.pdu(), self.policy),
                         Discard(DiscardReason.DUPLICATE))

    def test_duplicate_check_precedes_delivery(self):
        state = node()
        handle_received(state, self.pdu(dst=0x00C4), self.policy)
        self.assertEqual(handle_received(state, self.pdu(dst=0x00C4, ttl=3), self.policy),
                         Discard(DiscardReason.DUPLICATE))


class MessageCacheTests(SimpleTestCase):
    def test_fresh_then_seen(self):
        state = node()
        self.assertFalse(cache_check_insert(state, 0x0091, 1))
        self.assertTrue(cache_check_insert(state, 0x0091, 1))

    def test_oldest_entry_is_evicted(self):
        state = node()
        for seq in range(CACHE_CAPACITY + 1):
            cache_check_insert(state, 0x0091, seq)
        self.assertEqual(len(state.message_cache), CACHE_CAPACITY)
        self.assertFalse(cache_check_insert(state, 0x0091, 0))

    def test_recent_hit_survives_eviction(self):
        state = node()
        for seq in range(CACHE_CAPACITY):
            cache_check_insert(state, 0x0091, seq)
        cache_check_insert(state, 0x0091, 0)
        cache_check_insert(state, 0x0091, CACHE_CAPACITY)
        self.assertTrue(cache_check_insert(state, 0x0091, 0))
        self.assertFalse(cache_check_insert(state, 0x0091, 1))

    def test_key_is_the_source_and_seq_pair(self):
        state = node()
        self.assertFalse(cache_check_insert(state, 0x0091, 5))
        self.assertFalse(cache_check_insert(state, 0x0092, 5))


class OriginateTests(SimpleTestCase):
    def setUp(self):
        self.policy = builtin_table2_policy()
        self.state = NodeState(NodeConfig(
            node_id='A', elements=(0x0091, 0x0092, 0x0093), position=(0.0, 0.0)))

    def test_first_element_with_p1_opcode(self):
        result = originate(self.state, 0, SENSOR_OPCODES[1], b'\x00' * 11, 0x00C4, self.policy, 0, jitter_ms=0.0)
        self.assertEqual(result.pdu.src, 0x0091)
        self.assertEqual(result.pdu.ttl, 7)
        self.assertEqual(result.pdu.priority, 1)
        self.assertEqual(result.params, self.policy.params_for_priority(1))
        self.assertEqual(len(result.schedule), 3)

    def test_sequence_advances_per_element(self):
        first = originate(self.state, 2, SENSOR_OPCODES[3], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        second = originate(self.state, 2, SENSOR_OPCODES[3], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        other = originate(self.state, 0, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        self.assertEqual(second.pdu.seq, first.pdu.seq + 1)
        self.assertEqual(other.pdu.seq, 0)

    def test_sequence_wraps(self):
        self.state.seq_counters[0] = 0xFFFF
        last = originate(self.state, 0, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        wrapped = originate(self.state, 0, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        self.assertEqual((last.pdu.seq, wrapped.pdu.seq), (0xFFFF, 0))

    def test_unknown_opcode_gets_default_priority(self):
        result = originate(self.state, 1, 0x8201, b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        self.assertEqual(result.pdu.priority, 2)
        self.assertEqual(result.pdu.ttl, 5)

    def test_own_packet_echo_is_a_duplicate(self):
        result = originate(self.state, 0, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        self.assertEqual(handle_received(self.state, result.pdu, self.policy),
                         Discard(DiscardReason.DUPLICATE))

    def test_invalid_element_and_payload(self):
        with self.assertRaises(IndexError):
            originate(self.state, 3, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 0, jitter_ms=0.0)
        with self.assertRaises(ValueError):
            originate(self.state, 0, SENSOR_OPCODES[1], bytes(12), 0xC000, self.policy, 0, jitter_ms=0.0)


class ScheduleTransmissionsTests(SimpleTestCase):
    def setUp(self):
        self.policy = builtin_table2_policy()
        self.pdu = NetworkPdu(src=0x0091, dst=0xC000, ttl=7, seq=0, priority=1)

    def times(self, params, now=0, rng=None, jitter_ms=0.0):
        return [event.time_us for event in schedule_transmissions(self.pdu, params, now, rng, jitter_ms)]

    def test_p1_without_jitter(self):
        self.assertEqual(self.times(self.policy.params_for_priority(1), now=1000),
                         [1000, 21000, 41000])

    def test_p3_without_jitter(self):
        self.assertEqual(self.times(self.policy.params_for_priority(3)), [0, 200_000, 400_000])

    def test_default_bound_follows_the_generator(self):
        params = self.policy.params_for_priority(3)
        plain = schedule_transmissions(self.pdu, params, 0)
        self.assertEqual([event.time_us for event in plain], [0, 200_000, 400_000])
        jittered = schedule_transmissions(self.pdu, params, 0, np.random.default_rng(5))
        for event in jittered:
            self.assertTrue(0 <= event.time_us - event.index * 200_000 <= 10_000)
        with self.assertRaises(ValueError):
            schedule_transmissions(self.pdu, params, 0, jitter_ms=10.0)

    def test_originate_without_a_generator(self):
        state = NodeState(NodeConfig(node_id='A', elements=(0x0091,), position=(0.0, 0.0)))
        result = originate(state, 0, SENSOR_OPCODES[1], b'', 0xC000, self.policy, 7)
        self.assertEqual([event.time_us for event in result.schedule], [7, 20_007, 40_007])

    def test_no_repetitions(self):
        self.assertEqual(self.times(TxParams(0, 20, 7, 4), now=5), [5])

    def test_jitter_stays_within_bound(self):
        params = self.policy.params_for_priority(2)
        rng = np.random.default_rng(3)
        for _ in range(200):
            events = schedule_transmissions(self.pdu, params, 0, rng, jitter_ms=10.0)
            self.assertEqual(len(events), 1 + params.n_rep)
            for event in events:
                offset = event.time_us - event.index * 100_000
                self.assertTrue(0 <= offset <= 10_000, offset)
                self.assertEqual(event.tx_power, -8)
