"""
Scenario files: topology, radio model, QoS policy and traffic plan.

A scenario is a YAML mapping::

    start_epoch_ms: 1670000000000     # wall-clock of simulated time 0
    group_address: 0xC000             # flow i publishes to group_address + i
    jitter_ms: 10                     # per-event advertising delay bound
    delivery_timeout_ms: 5000
    radio:    {path_loss_ref_db, path_loss_exp, sensitivity_dbm,
               capture_margin_db, scan_duty, airtime_us}
    policy:
      default_priority: 2
      priorities: [{priority, n_rep, adv_interval_ms, ttl, tx_power_dbm}, ...]
      opcodes:    [{opcode, priority}, ...]
    nodes:
      - {id, x, y, elements: [...], subscriptions: [...], relay: true}
    traffic:
      - {source, destination, packet_count, generation_interval_ms,
         priority_weights: {1: 1, 2: 1, 3: 1}}

Only ``nodes`` and ``traffic`` are required; omitted sections take the
defaults of RadioModel and the builtin three-class policy. Unknown keys are
rejected.
"""

import functools
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml
from django.conf import settings
from django.core.exceptions import ValidationError

from .forms import (
    NodeForm,
    OpcodeForm,
    PolicyForm,
    RadioModelForm,
    ScenarioForm,
    TrafficFlowForm,
    TxParamsForm,
)
from .mesh_node import NodeConfig
from .pdu_codec import GROUP_MAX, MAX_PAYLOAD, format_address, is_group
from .qos_policy import DEFAULT_PRIORITY, QosPolicy, TxParams, builtin_table2_policy, validate_policy
from .radio_sim import RadioModel

logger = logging.getLogger(__name__)

BUILTIN_SCENARIOS = ('experiment1', 'experiment2')
DEFAULT_GROUP_ADDRESS = 0xC000
UNIFORM_WEIGHTS = ((1, 1.0), (2, 1.0), (3, 1.0))

TOP_LEVEL_KEYS = ('start_epoch_ms', 'group_address', 'jitter_ms', 'delivery_timeout_ms',
                  'radio', 'policy', 'nodes', 'traffic')
POLICY_KEYS = ('default_priority', 'priorities', 'opcodes')


class ScenarioParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class TrafficFlow:
    source_node: str
    destination_node: str
    packet_count: int = 6000
    generation_interval_ms: int = 2000
    priority_weights: tuple = UNIFORM_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, 'priority_weights',
                           tuple(sorted((int(p), float(w)) for p, w in self.priority_weights)))

    @property
    def active_priorities(self):
        return [priority for priority, weight in self.priority_weights if weight > 0]


@dataclass(frozen=True)
class TrafficOrigination:
    time_us: int
    flow_index: int
    packet_id: int
    priority: int
    element_index: int
    opcode: int
    payload: bytes

    @property
    def time_ms(self):
        return self.time_us / 1000


@dataclass(frozen=True)
class Scenario:
    nodes: tuple
    radio: RadioModel
    policy: QosPolicy
    traffic: tuple
    group_address: int = DEFAULT_GROUP_ADDRESS
    start_epoch_ms: int = 0
    jitter_ms: float = 10.0
    delivery_timeout_ms: int = 5000

    def __post_init__(self):
        object.__setattr__(self, 'nodes', tuple(self.nodes))
        object.__setattr__(self, 'traffic', tuple(self.traffic))

    def node(self, node_id):
        for config in self.nodes:
            if config.node_id == node_id:
                return config
        raise KeyError(node_id)

    def flow_group_address(self, flow_index):
        return self.group_address + flow_index

    def with_overrides(self, packet_count=None, generation_interval_ms=None, jitter=None):
        """Copy with every flow's count/interval replaced, and jitter optionally disabled."""
        changes = {}
        if packet_count is not None:
            changes['packet_count'] = packet_count
        if generation_interval_ms is not None:
            changes['generation_interval_ms'] = generation_interval_ms
        scenario = replace(self, traffic=tuple(replace(flow, **changes) for flow in self.traffic))
        if jitter is False:
            scenario = replace(scenario, jitter_ms=0.0)
        return scenario


# =============================================================================
# VALIDATION
# =============================================================================

def validate_scenario(scenario):
    """Return every violation in ``scenario``; empty when it can be simulated."""
    problems = []
    if len(scenario.nodes) < 2:
        problems.append(f"nodes: at least 2 nodes required, found {len(scenario.nodes)}")

    ids, owners, positions = set(), {}, {}
    for config in scenario.nodes:
        label = f"nodes[{config.node_id}]"
        if config.node_id in ids:
            problems.append(f"{label}: duplicate node id")
        ids.add(config.node_id)
        if not config.elements:
            problems.append(f"{label}.elements: at least one element required")
        for address in config.elements:
            if address in owners:
                problems.append(
                    f"{label}.elements: {format_address(address)} already used by node {owners[address]}")
            owners.setdefault(address, config.node_id)
        for address in config.subscriptions:
            if not is_group(address):
                problems.append(f"{label}.subscriptions: {format_address(address)} is not a group address")
        if config.position in positions:
            problems.append(f"{label}: same position as node {positions[config.position]}")
        positions.setdefault(config.position, config.node_id)

    problems.extend(scenario.radio.violations())
    problems.extend(validate_policy(scenario.policy))

    if not is_group(scenario.group_address):
        problems.append(f"group_address: {scenario.group_address:#06x} is not a group address")
    elif scenario.group_address + max(len(scenario.traffic) - 1, 0) > GROUP_MAX:
        problems.append("group_address: too high for the number of flows")
    if scenario.jitter_ms < 0:
        problems.append("jitter_ms: must not be negative")
    if scenario.delivery_timeout_ms <= 0:
        problems.append("delivery_timeout_ms: must be positive")
    if scenario.start_epoch_ms < 0:
        problems.append("start_epoch_ms: must not be negative")

    if not scenario.traffic:
        problems.append("traffic: at least one flow required")
    for index, flow in enumerate(scenario.traffic):
        problems.extend(_flow_violations(scenario, index, flow, ids))
    return problems


def _flow_violations(scenario, index, flow, ids):
    label = f"traffic[{index}]"
    problems = []
    if flow.packet_count < 1:
        problems.append(f"{label}.packet_count: must be at least 1")
    if flow.generation_interval_ms <= 0:
        problems.append(f"{label}.generation_interval_ms: must be positive")
    if any(weight < 0 for _, weight in flow.priority_weights):
        problems.append(f"{label}.priority_weights: weights must not be negative")
    if not flow.active_priorities:
        problems.append(f"{label}.priority_weights: at least one weight must be positive")
    for end, node_id in (('source', flow.source_node), ('destination', flow.destination_node)):
        if node_id not in ids:
            problems.append(f"{label}.{end}: unknown node '{node_id}'")
    if problems:
        return problems
    if flow.source_node == flow.destination_node:
        problems.append(f"{label}.destination: must differ from the source")

    source = scenario.node(flow.source_node)
    for priority in flow.active_priorities:
        if priority > len(source.elements):
            problems.append(
                f"{label}.priority_weights: priority {priority} needs element {priority} "
                f"but node {source.node_id} has {len(source.elements)}")
        if scenario.policy.opcode_for_priority(priority) is None:
            problems.append(f"{label}.priority_weights: no opcode maps to priority {priority}")

    group = scenario.flow_group_address(index)
    if group not in scenario.node(flow.destination_node).subscriptions:
        problems.append(
            f"{label}.destination: node {flow.destination_node} does not subscribe to "
            f"{format_address(group)}")
    return problems


# =============================================================================
# LOADING
# =============================================================================

def _unknown_keys(data, allowed, label, problems):
    for key in data:
        if key not in allowed:
            problems.append(f"{label}: unknown key '{key}'")


def _clean(form_class, data, label, problems):
    if not isinstance(data, dict):
        problems.append(f"{label}: expected a mapping")
        return None
    form = form_class(data=data)
    _unknown_keys(data, form.fields, label, problems)
    if not form.is_valid():
        for field, messages in form.errors.items():
            where = label if field == '__all__' else f"{label}.{field}"
            problems.extend(f"{where}: {message}" for message in messages)
        return None
    return {key: value for key, value in form.cleaned_data.items() if value is not None}


def _clean_list(form_class, items, label, problems):
    if not isinstance(items, list):
        problems.append(f"{label}: expected a list")
        return []
    return [_clean(form_class, item, f"{label}[{index}]", problems)
            for index, item in enumerate(items)]


def _build_policy(data, problems):
    if data is None:
        return builtin_table2_policy()
    if not isinstance(data, dict):
        problems.append("policy: expected a mapping")
        return None
    _unknown_keys(data, POLICY_KEYS, 'policy', problems)
    header = _clean(PolicyForm, {'default_priority': data.get('default_priority')}, 'policy', problems)

    params = {}
    for entry in _clean_list(TxParamsForm, data.get('priorities', []), 'policy.priorities', problems):
        if entry is None:
            continue
        if entry['priority'] in params:
            problems.append(f"policy.priorities: priority {entry['priority']} listed twice")
        params[entry['priority']] = TxParams(
            n_rep=entry['n_rep'], adv_interval_ms=entry['adv_interval_ms'],
            ttl=entry['ttl'], tx_power=entry['tx_power_dbm'])

    opcodes = {}
    for entry in _clean_list(OpcodeForm, data.get('opcodes', []), 'policy.opcodes', problems):
        if entry is None:
            continue
        if entry['opcode'] in opcodes:
            problems.append(f"policy.opcodes: opcode {entry['opcode']:#08x} listed twice")
        opcodes[entry['opcode']] = entry['priority']

    if header is None:
        return None
    return QosPolicy(opcode_to_priority=opcodes, priority_to_params=params,
                     default_priority=header.get('default_priority', DEFAULT_PRIORITY))


def _build(document, problems):
    _unknown_keys(document, TOP_LEVEL_KEYS, 'scenario', problems)
    for required in ('nodes', 'traffic'):
        if required not in document:
            problems.append(f"scenario: missing required key '{required}'")
    header = _clean(ScenarioForm, {key: document.get(key) for key in ScenarioForm.base_fields},
                    'scenario', problems)
    radio = _clean(RadioModelForm, document.get('radio') or {}, 'radio', problems)
    policy = _build_policy(document.get('policy'), problems)

    nodes = []
    for entry in _clean_list(NodeForm, document.get('nodes', []), 'nodes', problems):
        if entry is not None:
            nodes.append(NodeConfig(
                node_id=entry['id'],
                elements=entry['elements'],
                subscriptions=entry.get('subscriptions', ()),
                relay_enabled=entry.get('relay', True),
                position=(entry['x'], entry['y']),
            ))

    flows = []
    for entry in _clean_list(TrafficFlowForm, document.get('traffic', []), 'traffic', problems):
        if entry is not None:
            flows.append(TrafficFlow(
                source_node=entry['source'],
                destination_node=entry['destination'],
                packet_count=entry['packet_count'],
                generation_interval_ms=entry['generation_interval_ms'],
                priority_weights=entry.get('priority_weights', UNIFORM_WEIGHTS),
            ))

    if problems or header is None or radio is None or policy is None:
        return None
    return Scenario(nodes=nodes, radio=RadioModel(**radio), policy=policy, traffic=flows, **header)


def load_scenario(text, source='<string>'):
    """Parse and validate a scenario document; raises ScenarioParseError or ValidationError."""
    try:
        document = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, column = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ScenarioParseError(
            f"{source}:{line}:{column}: {exc.problem or exc.context}", line, column) from exc
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{source}: {exc}") from exc
    if not isinstance(document, dict):
        raise ScenarioParseError(f"{source}: top level must be a mapping", 1, 1)

    problems = []
    scenario = _build(document, problems)
    if scenario is not None:
        problems.extend(validate_scenario(scenario))
    if problems:
        raise ValidationError(problems)
    return scenario


def load_scenario_file(path):
    path = Path(path)
    scenario = load_scenario(path.read_text(encoding='utf-8'), source=str(path))
    logger.info("Loaded scenario %s (%d nodes, %d flows)", path, len(scenario.nodes), len(scenario.traffic))
    return scenario


def builtin_path(name):
    return Path(settings.MESH_EXPERIMENTS_DIR) / f"{name}.yaml"


@functools.lru_cache(maxsize=None)
def load_builtin(name):
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown builtin scenario '{name}'")
    return load_scenario_file(builtin_path(name))


def resolve_scenario(source):
    """Builtin name or file path -> Scenario."""
    if source in BUILTIN_SCENARIOS:
        return load_builtin(source)
    return load_scenario_file(source)


def experiment1():
    return load_builtin('experiment1')


def experiment2():
    return load_builtin('experiment2')


# =============================================================================
# SERIALIZATION
# =============================================================================

def scenario_document(scenario):
    radio = scenario.radio
    policy = scenario.policy
    return {
        'start_epoch_ms': scenario.start_epoch_ms,
        'group_address': scenario.group_address,
        'jitter_ms': scenario.jitter_ms,
        'delivery_timeout_ms': scenario.delivery_timeout_ms,
        'radio': {
            'path_loss_ref_db': radio.path_loss_ref_db,
            'path_loss_exp': radio.path_loss_exp,
            'sensitivity_dbm': radio.sensitivity_dbm,
            'capture_margin_db': radio.capture_margin_db,
            'scan_duty': radio.scan_duty,
            'airtime_us': radio.airtime_us,
        },
        'policy': {
            'default_priority': policy.default_priority,
            'priorities': [
                {'priority': priority, 'n_rep': params.n_rep,
                 'adv_interval_ms': params.adv_interval_ms, 'ttl': params.ttl,
                 'tx_power_dbm': params.tx_power}
                for priority, params in sorted(policy.priority_to_params.items())
            ],
            'opcodes': [
                {'opcode': opcode, 'priority': priority}
                for opcode, priority in sorted(policy.opcode_to_priority.items())
            ],
        },
        'nodes': [
            {'id': node.node_id, 'x': node.position[0], 'y': node.position[1],
             'elements': list(node.elements), 'subscriptions': sorted(node.subscriptions),
             'relay': node.relay_enabled}
            for node in scenario.nodes
        ],
        'traffic': [
            {'source': flow.source_node, 'destination': flow.destination_node,
             'packet_count': flow.packet_count,
             'generation_interval_ms': flow.generation_interval_ms,
             'priority_weights': dict(flow.priority_weights)}
            for flow in scenario.traffic
        ],
    }


def serialize_scenario(scenario):
    return yaml.safe_dump(scenario_document(scenario), sort_keys=False)


# =============================================================================
# TRAFFIC
# =============================================================================

def build_payload(opcode, packet_id):
    """Access payload: opcode octets, 4-octet packet id, zero padding to a full unsegmented PDU."""
    width = max(1, (opcode.bit_length() + 7) // 8)
    body = opcode.to_bytes(width, 'big') + (packet_id & 0xFFFFFFFF).to_bytes(4, 'big')
    return body.ljust(MAX_PAYLOAD, b'\x00')


def generate_traffic(flow, policy, rng, flow_index=0):
    """
    Originations at ``k * generation_interval`` for k in 0..count-1.

    Each packet draws its priority from the flow's weights and is sent from
    the element dedicated to that priority (priority p -> element p, 1-based).
    """
    classes = np.array([priority for priority, _ in flow.priority_weights])
    weights = np.array([weight for _, weight in flow.priority_weights], dtype=float)
    drawn = rng.choice(classes, size=flow.packet_count, p=weights / weights.sum())
    opcodes = {int(priority): policy.opcode_for_priority(int(priority)) for priority in classes}
    interval_us = flow.generation_interval_ms * 1000

    originations = []
    for k, priority in enumerate(drawn.tolist()):
        packet_id = k + 1
        opcode = opcodes[priority]
        originations.append(TrafficOrigination(
            time_us=k * interval_us,
            flow_index=flow_index,
            packet_id=packet_id,
            priority=priority,
            element_index=priority - 1,
            opcode=opcode,
            payload=build_payload(opcode, packet_id),
        ))
    return originations
