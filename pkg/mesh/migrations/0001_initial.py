# Generated by Django 5.1.7

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario_source', models.CharField(db_index=True, max_length=255)),
                ('seed', models.BigIntegerField()),
                ('packet_count', models.PositiveIntegerField(blank=True, null=True)),
                ('record_count', models.PositiveIntegerField(default=0)),
                ('delivered_count', models.PositiveIntegerField(default=0)),
                ('kpis', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
                'indexes': [models.Index(fields=['-created_at'], name='mesh_run_created_idx'), models.Index(fields=['scenario_source', 'seed'], name='mesh_run_source_seed_idx')],
            },
        ),
        migrations.CreateModel(
            name='DeliveryRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('timestamp', models.BigIntegerField()),
                ('test_id', models.PositiveIntegerField()),
                ('packet_id', models.PositiveIntegerField()),
                ('sender_address', models.PositiveIntegerField()),
                ('receiver_address', models.PositiveIntegerField()),
                ('ttl', models.PositiveSmallIntegerField()),
                ('tx_power', models.SmallIntegerField()),
                ('priority_class', models.PositiveSmallIntegerField(db_index=True)),
                ('delivered', models.BooleanField()),
                ('number_of_hops', models.PositiveSmallIntegerField(blank=True, null=True)),
                ('pdt_ms', models.PositiveIntegerField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='mesh.simulationrun')),
            ],
            options={
                'indexes': [models.Index(fields=['run', 'test_id', 'priority_class'], name='mesh_record_run_test_idx')],
                'constraints': [models.UniqueConstraint(fields=('run', 'test_id', 'packet_id'), name='unique_packet_per_run')],
            },
        ),
    ]
