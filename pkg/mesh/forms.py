from django import forms
from django.core.exceptions import ValidationError

from .pdu_codec import PRIORITY_MAX, TTL_MAX, format_address, is_group, is_unicast
from .qos_policy import ADV_INTERVAL_RANGE_MS, N_REP_RANGE, TX_POWER_LEVELS_DBM, tx_power_choices_text


# =============================================================================
# CUSTOM FIELDS
# =============================================================================

class AddressListField(forms.Field):
    """A list of mesh addresses, all unicast or all group."""

    def __init__(self, *, kind, **kwargs):
        self.kind = kind
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Enter a list of addresses.", code='invalid')
        addresses = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, int):
                raise ValidationError(f"Address {item!r} is not an integer.", code='invalid')
            addresses.append(item)
        return addresses

    def validate(self, value):
        if self.required and not value:
            raise ValidationError(self.error_messages['required'], code='required')
        check = is_unicast if self.kind == 'unicast' else is_group
        for address in value:
            if not check(address):
                raise ValidationError(
                    f"{format_address(address)} is not a {self.kind} address.", code='invalid')
        if len(set(value)) != len(value):
            raise ValidationError("Addresses must not repeat.", code='duplicate')


class PriorityWeightsField(forms.Field):
    """Mapping of priority class to a non-negative draw weight."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if not isinstance(value, dict):
            raise ValidationError("Enter a mapping of priority class to weight.", code='invalid')
        weights = []
        for priority, weight in value.items():
            if isinstance(priority, bool) or not isinstance(priority, int):
                raise ValidationError(f"Priority {priority!r} is not an integer.", code='invalid')
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise ValidationError(f"Weight {weight!r} is not a number.", code='invalid')
            weights.append((priority, float(weight)))
        return tuple(sorted(weights))

    def validate(self, value):
        super().validate(value)
        if value is None:
            return
        for priority, weight in value:
            if not 1 <= priority <= PRIORITY_MAX:
                raise ValidationError(f"Priority {priority} outside 1..{PRIORITY_MAX}.")
            if weight < 0:
                raise ValidationError(f"Weight for priority {priority} is negative.")
        if not any(weight > 0 for _, weight in value):
            raise ValidationError("At least one weight must be positive.")


# =============================================================================
# SCENARIO SECTIONS
# =============================================================================

class ScenarioForm(forms.Form):
    start_epoch_ms = forms.IntegerField(min_value=0, required=False)
    group_address = forms.IntegerField(required=False)
    jitter_ms = forms.FloatField(min_value=0, required=False)
    delivery_timeout_ms = forms.IntegerField(min_value=1, required=False)

    def clean_group_address(self):
        address = self.cleaned_data.get('group_address')
        if address is not None and not is_group(address):
            raise ValidationError(f"{address:#06x} is not a group address.")
        return address


class RadioModelForm(forms.Form):
    path_loss_ref_db = forms.FloatField(required=False)
    path_loss_exp = forms.FloatField(required=False)
    sensitivity_dbm = forms.FloatField(required=False)
    capture_margin_db = forms.FloatField(min_value=0, required=False)
    scan_duty = forms.FloatField(min_value=0, max_value=1, required=False)
    airtime_us = forms.IntegerField(min_value=1, required=False)

    def clean_path_loss_exp(self):
        exponent = self.cleaned_data.get('path_loss_exp')
        if exponent is not None and exponent <= 0:
            raise ValidationError("Path-loss exponent must be positive.")
        return exponent


class PolicyForm(forms.Form):
    default_priority = forms.IntegerField(min_value=1, max_value=PRIORITY_MAX, required=False)


class TxParamsForm(forms.Form):
    priority = forms.IntegerField(min_value=1, max_value=PRIORITY_MAX)
    n_rep = forms.IntegerField(min_value=N_REP_RANGE[0], max_value=N_REP_RANGE[1])
    adv_interval_ms = forms.IntegerField(
        min_value=ADV_INTERVAL_RANGE_MS[0], max_value=ADV_INTERVAL_RANGE_MS[1])
    ttl = forms.IntegerField(min_value=0, max_value=TTL_MAX)
    tx_power_dbm = forms.TypedChoiceField(
        choices=[(level, f"{level} dBm") for level in TX_POWER_LEVELS_DBM],
        coerce=int,
        error_messages={
            'invalid_choice': f"%(value)s dBm is not a supported transmit power "
                              f"(choose one of {tx_power_choices_text()} dBm).",
        },
    )


class OpcodeForm(forms.Form):
    opcode = forms.IntegerField(min_value=0, max_value=0xFFFFFF)
    priority = forms.IntegerField(min_value=1, max_value=PRIORITY_MAX)


class NodeForm(forms.Form):
    id = forms.CharField(max_length=32)
    x = forms.FloatField()
    y = forms.FloatField()
    elements = AddressListField(kind='unicast')
    subscriptions = AddressListField(kind='group', required=False)
    relay = forms.NullBooleanField(required=False)


class TrafficFlowForm(forms.Form):
    source = forms.CharField(max_length=32)
    destination = forms.CharField(max_length=32)
    packet_count = forms.IntegerField(min_value=1)
    generation_interval_ms = forms.IntegerField(min_value=1)
    priority_weights = PriorityWeightsField(required=False)

    def clean(self):
        cleaned_data = super().clean()
        source = cleaned_data.get('source')
        if source and source == cleaned_data.get('destination'):
            self.add_error('destination', "Destination must differ from the source.")
        return cleaned_data
