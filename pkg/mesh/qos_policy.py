"""
Opcode -> priority class -> transmission parameter tables.

Lower priority numbers get the better service level. Packets that carry no
priority, or one the policy does not know, are sent with the parameters of
``default_priority``.
"""

from dataclasses import dataclass, field
from types import MappingProxyType

from .pdu_codec import PRIORITY_MAX, TTL_MAX

N_REP_RANGE = (0, 1000)
ADV_INTERVAL_RANGE_MS = (20, 10240)
TTL_RANGE = (0, TTL_MAX)
TX_POWER_LEVELS_DBM = (4, 0, -8, -20, -40)

# Vendor opcodes (6-bit opcode followed by company id 0x0059, little-endian),
# one sensor model per priority class.
SENSOR_OPCODES = MappingProxyType({
    1: 0xC15900,
    2: 0xC25900,
    3: 0xC35900,
})

DEFAULT_PRIORITY = 2


def tx_power_choices_text():
    return ', '.join(str(level) for level in TX_POWER_LEVELS_DBM)


@dataclass(frozen=True)
class TxParams:
    n_rep: int
    adv_interval_ms: int
    ttl: int
    tx_power: int

    @property
    def transmissions(self):
        return 1 + self.n_rep

    def violations(self, label='params'):
        problems = []
        low, high = N_REP_RANGE
        if not low <= self.n_rep <= high:
            problems.append(f"{label}.n_rep: {self.n_rep} outside {low}..{high}")
        low, high = ADV_INTERVAL_RANGE_MS
        if not low <= self.adv_interval_ms <= high:
            problems.append(
                f"{label}.adv_interval_ms: {self.adv_interval_ms} ms outside {low}..{high} ms")
        low, high = TTL_RANGE
        if not low <= self.ttl <= high:
            problems.append(f"{label}.ttl: {self.ttl} outside {low}..{high}")
        if self.tx_power not in TX_POWER_LEVELS_DBM:
            problems.append(
                f"{label}.tx_power_dbm: {self.tx_power} dBm is not one of "
                f"{tx_power_choices_text()} dBm")
        return problems


@dataclass(frozen=True)
class QosPolicy:
    opcode_to_priority: MappingProxyType = field(default_factory=dict)
    priority_to_params: MappingProxyType = field(default_factory=dict)
    default_priority: int = DEFAULT_PRIORITY

    def __post_init__(self):
        object.__setattr__(self, 'opcode_to_priority', MappingProxyType(dict(self.opcode_to_priority)))
        object.__setattr__(self, 'priority_to_params', MappingProxyType(dict(self.priority_to_params)))

    def __reduce__(self):
        # mappingproxy does not pickle; rebuild from plain dicts.
        return (type(self), (dict(self.opcode_to_priority), dict(self.priority_to_params),
                             self.default_priority))

    def priority_for_opcode(self, opcode):
        return self.opcode_to_priority.get(opcode, self.default_priority)

    def params_for_priority(self, priority):
        params = self.priority_to_params.get(priority)
        if params is None:
            return self.priority_to_params[self.default_priority]
        return params

    def opcode_for_priority(self, priority):
        """Lowest opcode mapped to ``priority``, or None."""
        opcodes = [op for op, mapped in self.opcode_to_priority.items() if mapped == priority]
        return min(opcodes) if opcodes else None


def builtin_table2_policy():
    """Three-class policy: fast/strong P1, medium P2, slow/weak P3."""
    return QosPolicy(
        opcode_to_priority={opcode: priority for priority, opcode in SENSOR_OPCODES.items()},
        priority_to_params={
            1: TxParams(n_rep=2, adv_interval_ms=20, ttl=7, tx_power=4),
            2: TxParams(n_rep=2, adv_interval_ms=100, ttl=5, tx_power=-8),
            3: TxParams(n_rep=2, adv_interval_ms=200, ttl=3, tx_power=-20),
        },
        default_priority=DEFAULT_PRIORITY,
    )


def priority_for_opcode(policy, opcode):
    return policy.priority_for_opcode(opcode)


def params_for_priority(policy, priority):
    return policy.params_for_priority(priority)


def validate_policy(policy):
    """Return every violation found in ``policy``; an empty list means it is usable."""
    problems = []
    for priority, params in sorted(policy.priority_to_params.items()):
        if not 1 <= priority <= PRIORITY_MAX:
            problems.append(f"policy.priorities: class {priority} outside 1..{PRIORITY_MAX}")
        problems.extend(params.violations(label=f"policy.priorities[{priority}]"))
    for opcode, priority in sorted(policy.opcode_to_priority.items()):
        if not 0 <= opcode <= 0xFFFFFF:
            problems.append(f"policy.opcodes: opcode {opcode:#x} is wider than 3 octets")
        if priority not in policy.priority_to_params:
            problems.append(
                f"policy.opcodes: opcode {opcode:#08x} maps to priority {priority} "
                f"which has no transmission parameters")
    if policy.default_priority not in policy.priority_to_params:
        problems.append(
            f"policy.default_priority: {policy.default_priority} has no transmission parameters")
    return problems
