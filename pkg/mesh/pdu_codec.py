"""
Network PDU codec with the priority class carried in the SEQ field.

Wire layout (8 octets + payload, all multi-octet fields big-endian):

    offset  size  field
    0       1     TTL (low 7 bits; bit 7 is always written as 0)
    1       3     SEQ+PRI: priority in the most-significant octet, seq in the low two
    4       2     SRC (unicast element address)
    6       2     DST (unicast or group address)
    8       0-11  payload (unsegmented)

IV index, NID, CTL and NetMIC are not represented.
"""

import struct
from dataclasses import dataclass, replace

HEADER_LENGTH = 8
MAX_PAYLOAD = 11

SEQ_MAX = 0xFFFF
PRIORITY_MAX = 0xFF
SEQ_PRIORITY_MAX = 0xFFFFFF
TTL_MAX = 127

UNICAST_MIN = 0x0001
UNICAST_MAX = 0x7FFF
GROUP_MIN = 0xC000
GROUP_MAX = 0xFFFF

# 0 marks a packet without an explicit priority class.
NO_PRIORITY = 0

_ADDRESSES = struct.Struct('>HH')


# =============================================================================
# ERRORS
# =============================================================================

class PduError(ValueError):
    """Base class for codec failures; ``field`` names the offending field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SeqRangeError(PduError):
    pass


class PduEncodeError(PduError):
    pass


class PduTruncatedError(PduError):
    pass


class PduLengthError(PduError):
    pass


# =============================================================================
# ADDRESSES
# =============================================================================

def is_unicast(address):
    return UNICAST_MIN <= address <= UNICAST_MAX


def is_group(address):
    return GROUP_MIN <= address <= GROUP_MAX


def format_address(address):
    """Render an address the way the dataset does (``0x00C4``)."""
    return f"0x{address:04X}"


# =============================================================================
# SEQ + PRIORITY FIELD
# =============================================================================

def pack_seq_priority(seq, priority):
    if not 0 <= seq <= SEQ_MAX:
        raise SeqRangeError(f"seq {seq} outside 0..{SEQ_MAX}", field='seq')
    if not 0 <= priority <= PRIORITY_MAX:
        raise SeqRangeError(f"priority {priority} outside 0..{PRIORITY_MAX}", field='priority')
    return (priority << 16) | seq


def unpack_seq_priority(value):
    """Split a 24-bit SEQ+PRI field into ``(seq, priority)``."""
    if not 0 <= value <= SEQ_PRIORITY_MAX:
        raise SeqRangeError(f"field 0x{value:X} exceeds 24 bits", field='seq_priority')
    return value & SEQ_MAX, value >> 16


# =============================================================================
# NETWORK PDU
# =============================================================================

@dataclass(frozen=True)
class NetworkPdu:
    src: int
    dst: int
    ttl: int
    seq: int
    priority: int = NO_PRIORITY
    payload: bytes = b''

    def problems(self):
        """Return ``(field, message)`` pairs for every violated invariant."""
        found = []
        if not is_unicast(self.src):
            found.append(('src', f"src {self.src:#06x} is not a unicast address"))
        if not (is_unicast(self.dst) or is_group(self.dst)):
            found.append(('dst', f"dst {self.dst:#06x} is neither unicast nor group"))
        if not 0 <= self.ttl <= TTL_MAX:
            found.append(('ttl', f"ttl {self.ttl} outside 0..{TTL_MAX}"))
        if not 0 <= self.seq <= SEQ_MAX:
            found.append(('seq', f"seq {self.seq} outside 0..{SEQ_MAX}"))
        if not 0 <= self.priority <= PRIORITY_MAX:
            found.append(('priority', f"priority {self.priority} outside 0..{PRIORITY_MAX}"))
        if len(self.payload) > MAX_PAYLOAD:
            found.append(('payload', f"payload of {len(self.payload)} octets exceeds {MAX_PAYLOAD}"))
        return found

    def relayed(self):
        """Copy for retransmission: ttl decremented, every other field unchanged."""
        return replace(self, ttl=self.ttl - 1)

    @property
    def cache_key(self):
        return self.src, self.seq


def encode_network_pdu(pdu):
    problems = pdu.problems()
    if problems:
        field, message = problems[0]
        raise PduEncodeError(message, field=field)
    header = bytes([pdu.ttl & 0x7F])
    header += pack_seq_priority(pdu.seq, pdu.priority).to_bytes(3, 'big')
    header += _ADDRESSES.pack(pdu.src, pdu.dst)
    return header + bytes(pdu.payload)


def decode_network_pdu(data):
    data = bytes(data)
    if len(data) < HEADER_LENGTH:
        raise PduTruncatedError(
            f"network PDU needs at least {HEADER_LENGTH} octets, got {len(data)}", field='header')
    payload = data[HEADER_LENGTH:]
    if len(payload) > MAX_PAYLOAD:
        raise PduLengthError(
            f"payload of {len(payload)} octets exceeds {MAX_PAYLOAD}", field='payload')

    seq, priority = unpack_seq_priority(int.from_bytes(data[1:4], 'big'))
    src, dst = _ADDRESSES.unpack_from(data, 4)
    pdu = NetworkPdu(src=src, dst=dst, ttl=data[0] & 0x7F, seq=seq,
                     priority=priority, payload=payload)
    problems = pdu.problems()
    if problems:
        field, message = problems[0]
        raise PduError(message, field=field)
    return pdu
