from django.db import models, transaction

from .metrics import PacketRecord


class SimulationRunManager(models.Manager):
    def store(self, scenario_source, seed, records, kpis, packet_count=None):
        """Save a run and all of its packet records in one transaction."""
        with transaction.atomic():
            run = self.create(
                scenario_source=scenario_source,
                seed=seed,
                packet_count=packet_count,
                record_count=len(records),
                delivered_count=sum(record.delivered for record in records),
                kpis=kpis,
            )
            DeliveryRecord.objects.bulk_create(
                [DeliveryRecord.from_packet_record(run, record) for record in records],
                batch_size=1000,
            )
        return run


class SimulationRun(models.Model):
    scenario_source = models.CharField(max_length=255, db_index=True)
    seed = models.BigIntegerField()
    packet_count = models.PositiveIntegerField(null=True, blank=True)
    record_count = models.PositiveIntegerField(default=0)
    delivered_count = models.PositiveIntegerField(default=0)
    kpis = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    objects = SimulationRunManager()

    class Meta:
        ordering = ['-created_at', '-id']
        indexes = [
            models.Index(fields=['-created_at'], name='mesh_run_created_idx'),
            models.Index(fields=['scenario_source', 'seed'], name='mesh_run_source_seed_idx'),
        ]

    def __str__(self):
        return f"{self.scenario_source} seed {self.seed} ({self.record_count} packets)"

    @property
    def pdr(self):
        return self.delivered_count / self.record_count if self.record_count else 0.0

    def packet_records(self):
        return [row.to_packet_record() for row in self.records.order_by('test_id', 'packet_id')]


class DeliveryRecord(models.Model):
    run = models.ForeignKey(SimulationRun, on_delete=models.CASCADE, related_name='records')
    timestamp = models.BigIntegerField()
    test_id = models.PositiveIntegerField()
    packet_id = models.PositiveIntegerField()
    sender_address = models.PositiveIntegerField()
    receiver_address = models.PositiveIntegerField()
    ttl = models.PositiveSmallIntegerField()
    tx_power = models.SmallIntegerField()
    priority_class = models.PositiveSmallIntegerField(db_index=True)
    delivered = models.BooleanField()
    number_of_hops = models.PositiveSmallIntegerField(null=True, blank=True)
    pdt_ms = models.PositiveIntegerField(null=True, blank=True)

    class Meta:
        constraints = [
            models.UniqueConstraint(fields=['run', 'test_id', 'packet_id'], name='unique_packet_per_run'),
        ]
        indexes = [
            models.Index(fields=['run', 'test_id', 'priority_class'], name='mesh_record_run_test_idx'),
        ]

    def __str__(self):
        return f"run {self.run_id} test {self.test_id} packet {self.packet_id}"

    @classmethod
    def from_packet_record(cls, run, record):
        return cls(
            run=run,
            timestamp=record.timestamp,
            test_id=record.test_id,
            packet_id=record.packet_id,
            sender_address=record.sender_address,
            receiver_address=record.receiver_address,
            ttl=record.ttl,
            tx_power=record.tx_power,
            priority_class=record.priority_class,
            delivered=bool(record.delivered),
            number_of_hops=record.number_of_hops,
            pdt_ms=record.pdt_ms,
        )

    def to_packet_record(self):
        return PacketRecord(
            timestamp=self.timestamp,
            test_id=self.test_id,
            packet_id=self.packet_id,
            sender_address=self.sender_address,
            receiver_address=self.receiver_address,
            ttl=self.ttl,
            tx_power=self.tx_power,
            priority_class=self.priority_class,
            delivered=int(self.delivered),
            number_of_hops=self.number_of_hops,
            pdt_ms=self.pdt_ms,
        )
