"""
Per-node protocol state: origination, the receive/deliver/relay decision,
duplicate suppression and broadcast scheduling.
"""

import enum
from collections import OrderedDict
from dataclasses import dataclass, field

from .pdu_codec import MAX_PAYLOAD, SEQ_MAX, NetworkPdu, is_unicast

CACHE_CAPACITY = 128
ADVERTISING_CHANNELS = (37, 38, 39)
DEFAULT_JITTER_MS = 10.0
# Received ttl must be at least this for the decremented copy to be relayable.
MIN_RELAY_TTL = 2


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    elements: tuple
    subscriptions: frozenset = frozenset()
    relay_enabled: bool = True
    position: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(self.elements))
        object.__setattr__(self, 'subscriptions', frozenset(self.subscriptions))
        object.__setattr__(self, 'position', tuple(float(c) for c in self.position))

    @property
    def primary_address(self):
        return self.elements[0]

    def owns(self, address):
        return address in self.elements


class MessageCache:
    """Bounded LRU set of ``(src, seq)`` pairs."""

    def __init__(self, capacity=CACHE_CAPACITY):
        self.capacity = capacity
        self._entries = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def check_insert(self, key):
        if key in self._entries:
            self._entries.move_to_end(key)
            return True
        self._entries[key] = None
        if len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
        return False


@dataclass
class NodeState:
    config: NodeConfig
    seq_counters: list = field(default_factory=list)
    message_cache: MessageCache = field(default_factory=MessageCache)

    def __post_init__(self):
        if not self.seq_counters:
            self.seq_counters = [0] * len(self.config.elements)

    def peek_seq(self, element_index):
        return self.seq_counters[element_index]

    def next_seq(self, element_index):
        seq = self.seq_counters[element_index]
        self.seq_counters[element_index] = (seq + 1) & SEQ_MAX
        return seq


# =============================================================================
# RELAY DECISIONS
# =============================================================================

class DiscardReason(enum.Enum):
    DUPLICATE = 'duplicate'
    TTL_EXPIRED = 'ttl-expired'
    RELAY_DISABLED = 'relay-disabled'


@dataclass(frozen=True)
class Deliver:
    address: int


@dataclass(frozen=True)
class DeliverAndRelay:
    address: int
    pdu: NetworkPdu
    params: object


@dataclass(frozen=True)
class Relay:
    pdu: NetworkPdu
    params: object


@dataclass(frozen=True)
class Discard:
    reason: DiscardReason


@dataclass(frozen=True)
class Broadcast:
    """One advertising event: the PDU sent on 37, 38 and 39 back to back from ``time_us``."""
    time_us: int
    index: int
    pdu: NetworkPdu
    tx_power: int


@dataclass(frozen=True)
class Origination:
    pdu: NetworkPdu
    params: object
    schedule: tuple


def cache_check_insert(state, src, seq):
    return state.message_cache.check_insert((src, seq))


def _relay_refusal(state, pdu):
    if not state.config.relay_enabled:
        return DiscardReason.RELAY_DISABLED
    if pdu.ttl < MIN_RELAY_TTL:
        return DiscardReason.TTL_EXPIRED
    return None


def handle_received(state, pdu, policy):
    if cache_check_insert(state, pdu.src, pdu.seq):
        return Discard(DiscardReason.DUPLICATE)

    if is_unicast(pdu.dst) and state.config.owns(pdu.dst):
        return Deliver(pdu.dst)

    refusal = _relay_refusal(state, pdu)
    if pdu.dst in state.config.subscriptions:
        if refusal is not None:
            return Deliver(pdu.dst)
        return DeliverAndRelay(pdu.dst, pdu.relayed(), policy.params_for_priority(pdu.priority))

    if refusal is not None:
        return Discard(refusal)
    return Relay(pdu.relayed(), policy.params_for_priority(pdu.priority))


def schedule_transmissions(pdu, params, now_us, rng=None, jitter_ms=None):
    """
    Lay out ``1 + n_rep`` advertising events starting at ``now_us``.

    Event k starts at ``now + k * adv_interval + jitter_k`` with jitter_k drawn
    uniformly from whole microseconds in ``[0, jitter_ms]``. A zero bound
    consumes no draws. Without ``rng`` the bound defaults to zero; with one it
    defaults to ``DEFAULT_JITTER_MS``.
    """
    if jitter_ms is None:
        jitter_ms = DEFAULT_JITTER_MS if rng is not None else 0.0
    jitter_us = round(jitter_ms * 1000)
    if jitter_us and rng is None:
        raise ValueError(f"a jitter bound of {jitter_ms} ms needs a random generator")
    interval_us = params.adv_interval_ms * 1000
    events = []
    for k in range(params.transmissions):
        jitter = int(rng.integers(0, jitter_us, endpoint=True)) if jitter_us else 0
        events.append(Broadcast(now_us + k * interval_us + jitter, k, pdu, params.tx_power))
    return tuple(events)


def originate(state, element_index, opcode, payload, dst, policy, now_us,
              rng=None, jitter_ms=None):
    if not 0 <= element_index < len(state.config.elements):
        raise IndexError(
            f"node {state.config.node_id} has no element {element_index} "
            f"({len(state.config.elements)} configured)")
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} octets exceeds {MAX_PAYLOAD}")

    priority = policy.priority_for_opcode(opcode)
    params = policy.params_for_priority(priority)
    src = state.config.elements[element_index]
    seq = state.next_seq(element_index)
    pdu = NetworkPdu(src=src, dst=dst, ttl=params.ttl, seq=seq,
                     priority=priority, payload=bytes(payload))
    # Echoes of our own packet must not be relayed back.
    cache_check_insert(state, src, seq)
    return Origination(pdu, params, schedule_transmissions(pdu, params, now_us, rng, jitter_ms))
