"""
Discrete-event radio engine.

Time is kept in integer microseconds from the start of the run. Each
advertising event occupies channels 37, 38 and 39 one after another for one
airtime each; the three channels are independent collision domains.
Reception is evaluated when a channel transmission ends, against every
overlapping transmission on the same channel. Radios are half duplex: a node
that is on air on a channel hears nothing else on that channel meanwhile.
"""

import enum
import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field

from django.core.exceptions import ValidationError

from .mesh_node import (
    ADVERTISING_CHANNELS,
    Deliver,
    DeliverAndRelay,
    NodeState,
    Relay,
    handle_received,
    originate,
    schedule_transmissions,
)
from .metrics import PacketRecord, hops_from_ttl
from .streams import RandomStreams

logger = logging.getLogger(__name__)


class RadioError(ValueError):
    pass


@dataclass(frozen=True)
class RadioModel:
    path_loss_ref_db: float = 40.0
    path_loss_exp: float = 3.0
    sensitivity_dbm: float = -90.0
    capture_margin_db: float = 10.0
    scan_duty: float = 1.0
    airtime_us: int = 376

    def violations(self, label='radio'):
        problems = []
        if not self.path_loss_exp > 0:
            problems.append(f"{label}.path_loss_exp: must be positive, got {self.path_loss_exp}")
        if not 0.0 <= self.scan_duty <= 1.0:
            problems.append(f"{label}.scan_duty: {self.scan_duty} outside 0..1")
        if not self.airtime_us > 0:
            problems.append(f"{label}.airtime_us: must be positive, got {self.airtime_us}")
        if self.capture_margin_db < 0:
            problems.append(f"{label}.capture_margin_db: must not be negative")
        return problems


def link_rssi(model, pos_a, pos_b, tx_power):
    distance = math.dist(pos_a, pos_b)
    if distance == 0:
        raise RadioError(f"coincident positions {tuple(pos_a)}")
    return tx_power - model.path_loss_ref_db - 10 * model.path_loss_exp * math.log10(distance)


def reception_outcome(model, rssi, overlapping=(), rng=None):
    """
    Decide whether one channel transmission is received.

    A scan draw is consumed whenever ``scan_duty < 1``, whatever the other
    conditions say, so collisions do not shift later draws.
    """
    heard = True
    if model.scan_duty < 1.0:
        heard = rng.random() < model.scan_duty
    if rssi < model.sensitivity_dbm:
        return False
    if overlapping and rssi < max(overlapping) + model.capture_margin_db:
        return False
    return heard


# =============================================================================
# EVENT QUEUE
# =============================================================================

class EventKind(enum.IntEnum):
    TRAFFIC_ORIGINATION = 1
    BROADCAST_START = 2
    BROADCAST_END = 3
    DELIVERY_TIMEOUT = 4


@dataclass(order=True, frozen=True)
class Event:
    time_us: int
    order: int
    kind: EventKind = field(compare=False)
    payload: object = field(compare=False, default=None)


class EventQueue:
    """Min-heap on time; simultaneous events pop in insertion order."""

    def __init__(self):
        self._heap = []
        self._counter = itertools.count()

    def __len__(self):
        return len(self._heap)

    def push(self, time_us, kind, payload=None):
        event = Event(int(time_us), next(self._counter), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self):
        return heapq.heappop(self._heap)


@dataclass(slots=True)
class Transmission:
    node: int
    channel: int
    start_us: int
    end_us: int
    pdu: object
    tx_power: int


@dataclass(slots=True)
class PacketTrack:
    flow_index: int
    packet_id: int
    origin_us: int
    destination: int
    receiver_address: int
    pdu: object
    tx_power: int
    delivered_us: int = None
    ttl_at_delivery: int = None


# =============================================================================
# SIMULATION
# =============================================================================

class Simulation:
    """One seeded run of a scenario to quiescence."""

    def __init__(self, scenario, seed):
        # scenario imports RadioModel from this module.
        from .scenario import generate_traffic, validate_scenario

        problems = validate_scenario(scenario)
        if problems:
            raise ValidationError(problems)

        self.scenario = scenario
        self.model = scenario.radio
        self.policy = scenario.policy
        self.streams = RandomStreams(seed)
        self.queue = EventQueue()
        self.nodes = [NodeState(config) for config in scenario.nodes]
        self.node_index = {config.node_id: i for i, config in enumerate(scenario.nodes)}
        self.positions = [config.position for config in scenario.nodes]
        self.jitter_ms = scenario.jitter_ms
        self.timeout_us = scenario.delivery_timeout_ms * 1000

        self._links = {}
        self._reach = {}
        self._airspace = {channel: [] for channel in ADVERTISING_CHANNELS}
        self._pending = {}
        self._scan_streams = {}
        # Channel transmissions per (src, seq) still queued or on air.
        self._in_flight = {}
        self.records = []
        self.events_processed = 0
        self.traffic = [
            generate_traffic(flow, self.policy, self.streams.traffic(flow_index), flow_index=flow_index)
            for flow_index, flow in enumerate(scenario.traffic)
        ]

        self._handlers = {
            EventKind.TRAFFIC_ORIGINATION: self._on_origination,
            EventKind.BROADCAST_START: self._on_broadcast_start,
            EventKind.BROADCAST_END: self._on_broadcast_end,
            EventKind.DELIVERY_TIMEOUT: self._on_timeout,
        }

    # -- radio geometry -----------------------------------------------------

    def _link(self, tx, rx, tx_power):
        key = (tx, rx, tx_power)
        rssi = self._links.get(key)
        if rssi is None:
            rssi = link_rssi(self.model, self.positions[tx], self.positions[rx], tx_power)
            self._links[key] = rssi
        return rssi

    def _receivers(self, tx, tx_power):
        """Nodes that can hear ``tx`` at this power, with their rssi, in node order."""
        key = (tx, tx_power)
        reach = self._reach.get(key)
        if reach is None:
            reach = []
            for rx in range(len(self.nodes)):
                if rx == tx:
                    continue
                rssi = self._link(tx, rx, tx_power)
                if rssi >= self.model.sensitivity_dbm:
                    reach.append((rx, rssi))
            self._reach[key] = reach
        return reach

    def _scan_stream(self, rx, pdu):
        """Per receiver and packet; kept until the packet's last transmission ends."""
        per_packet = self._scan_streams.setdefault(pdu.cache_key, {})
        stream = per_packet.get(rx)
        if stream is None:
            stream = per_packet[rx] = self.streams.scan(rx, pdu.src, pdu.seq)
        return stream

    # -- scheduling -----------------------------------------------------------

    def _queue_broadcasts(self, node, schedule):
        airtime = self.model.airtime_us
        for broadcast in schedule:
            key = broadcast.pdu.cache_key
            for slot, channel in enumerate(ADVERTISING_CHANNELS):
                start = broadcast.time_us + slot * airtime
                self.queue.push(start, EventKind.BROADCAST_START, Transmission(
                    node, channel, start, start + airtime, broadcast.pdu, broadcast.tx_power))
                self._in_flight[key] = self._in_flight.get(key, 0) + 1

    def _queue_traffic(self):
        for originations in self.traffic:
            for origination in originations:
                self.queue.push(origination.time_us, EventKind.TRAFFIC_ORIGINATION, origination)

    # -- handlers -------------------------------------------------------------

    def _on_origination(self, now, origination):
        flow = self.scenario.traffic[origination.flow_index]
        source = self.node_index[flow.source_node]
        destination = self.node_index[flow.destination_node]
        state = self.nodes[source]
        src = state.config.elements[origination.element_index]
        rng = self.streams.jitter(source, src, state.peek_seq(origination.element_index))

        result = originate(
            state, origination.element_index, origination.opcode, origination.payload,
            self.scenario.flow_group_address(origination.flow_index),
            self.policy, now, rng=rng, jitter_ms=self.jitter_ms)

        key = result.pdu.cache_key
        if key in self._pending:
            logger.warning("Packet %s still in flight when its seq was reused", key)
            self._finalize(key)
        self._pending[key] = PacketTrack(
            flow_index=origination.flow_index,
            packet_id=origination.packet_id,
            origin_us=now,
            destination=destination,
            receiver_address=self.scenario.nodes[destination].primary_address,
            pdu=result.pdu,
            tx_power=result.params.tx_power,
        )
        self.queue.push(now + self.timeout_us, EventKind.DELIVERY_TIMEOUT, key)
        self._queue_broadcasts(source, result.schedule)

    def _on_broadcast_start(self, now, transmission):
        self._airspace[transmission.channel].append(transmission)
        self.queue.push(transmission.end_us, EventKind.BROADCAST_END, transmission)

    def _on_broadcast_end(self, now, transmission):
        on_air = self._airspace[transmission.channel]
        horizon = now - self.model.airtime_us
        on_air[:] = [other for other in on_air if other.end_us > horizon]
        overlapping = [other for other in on_air
                       if other is not transmission
                       and other.start_us < transmission.end_us
                       and other.end_us > transmission.start_us]

        busy = {other.node for other in overlapping}
        for rx, rssi in self._receivers(transmission.node, transmission.tx_power):
            interference = [self._link(other.node, rx, other.tx_power)
                            for other in overlapping if other.node != rx]
            rng = self._scan_stream(rx, transmission.pdu) if self.model.scan_duty < 1.0 else None
            heard = reception_outcome(self.model, rssi, interference, rng)
            # Half duplex: a node on air on this channel hears nothing on it.
            if heard and rx not in busy:
                self._receive(now, rx, transmission.pdu)

        key = transmission.pdu.cache_key
        self._in_flight[key] -= 1
        if not self._in_flight[key]:
            del self._in_flight[key]
            self._scan_streams.pop(key, None)

    def _receive(self, now, rx, pdu):
        decision = handle_received(self.nodes[rx], pdu, self.policy)
        if isinstance(decision, (Deliver, DeliverAndRelay)):
            track = self._pending.get(pdu.cache_key)
            if track is not None and track.destination == rx and track.delivered_us is None:
                track.delivered_us = now
                track.ttl_at_delivery = pdu.ttl
        if isinstance(decision, (Relay, DeliverAndRelay)):
            rng = self.streams.jitter(rx, pdu.src, pdu.seq)
            schedule = schedule_transmissions(
                decision.pdu, decision.params, now, rng, jitter_ms=self.jitter_ms)
            self._queue_broadcasts(rx, schedule)

    def _on_timeout(self, now, key):
        self._finalize(key)

    def _finalize(self, key):
        track = self._pending.pop(key, None)
        if track is None:
            return
        pdu = track.pdu
        delivered = (track.delivered_us is not None
                     and track.delivered_us - track.origin_us <= self.timeout_us)
        self.records.append(PacketRecord(
            timestamp=self.scenario.start_epoch_ms + track.origin_us // 1000,
            test_id=track.flow_index + 1,
            packet_id=track.packet_id,
            sender_address=pdu.src,
            receiver_address=track.receiver_address,
            ttl=pdu.ttl,
            tx_power=track.tx_power,
            priority_class=pdu.priority,
            delivered=int(delivered),
            number_of_hops=hops_from_ttl(pdu.ttl, track.ttl_at_delivery) if delivered else None,
            # Whole milliseconds, rounded half up.
            pdt_ms=(track.delivered_us - track.origin_us + 500) // 1000 if delivered else None,
        ))

    # -- main loop ------------------------------------------------------------

    def run(self):
        logger.info("Starting run: %d nodes, %d flows, seed %d",
                    len(self.nodes), len(self.scenario.traffic), self.streams.seed)
        self._queue_traffic()
        while self.queue:
            event = self.queue.pop()
            self._handlers[event.kind](event.time_us, event.payload)
            self.events_processed += 1
        for key in list(self._pending):
            self._finalize(key)

        self.records.sort(key=lambda r: (r.test_id, r.packet_id))
        logger.info("Run finished: %d records, %d delivered, %d events",
                    len(self.records), sum(r.delivered for r in self.records),
                    self.events_processed)
        return self.records


def run(scenario, seed):
    return Simulation(scenario, seed).run()
