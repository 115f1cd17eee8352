from django.contrib import admin

from .models import DeliveryRecord, SimulationRun
from .pdu_codec import format_address


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'scenario_source', 'seed', 'packet_count', 'record_count',
                    'delivered_count', 'created_at')
    list_filter = ('scenario_source',)
    search_fields = ('scenario_source',)
    readonly_fields = ('kpis', 'created_at')


@admin.register(DeliveryRecord)
class DeliveryRecordAdmin(admin.ModelAdmin):
    list_display = ('run', 'test_id', 'packet_id', 'sender', 'receiver', 'priority_class',
                    'delivered', 'number_of_hops', 'pdt_ms')
    list_filter = ('priority_class', 'delivered', 'test_id')
    list_select_related = ('run',)

    @admin.display(description='Sender')
    def sender(self, obj):
        return format_address(obj.sender_address)

    @admin.display(description='Receiver')
    def receiver(self, obj):
        return format_address(obj.receiver_address)
