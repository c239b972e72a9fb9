# Generated by Django 5.2.4 on 2026-10-17 09:12

import django.db.models.deletion
import uuid
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('name', models.CharField(blank=True, help_text="Optional label, e.g. 'N sweep, skew 1.5'", max_length=120)),
                ('config_text', models.TextField(help_text='Canonical key = value echo of the config that produced the rows.')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('notes', models.TextField(blank=True)),
            ],
            options={
                'verbose_name': 'Experiment',
                'verbose_name_plural': 'Experiments',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ResultRecord',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('engine', models.CharField(choices=[('specmoe', 'Self-assisted speculative decoding'), ('ondemand', 'MoE-OnDemand'), ('overlap', 'MoE-Overlap (oracle)'), ('caching', 'MoE-Caching')], default='specmoe', max_length=12)),
                ('policy', models.CharField(help_text='Draft policy, or the engine name for baselines.', max_length=20)),
                ('batch', models.PositiveIntegerField()),
                ('gamma', models.PositiveIntegerField(help_text='Draft tokens per speculative step (0 for baselines).')),
                ('n_draft', models.PositiveIntegerField(help_text='Experts pinned per MoE layer.')),
                ('bandwidth', models.FloatField(help_text='Offload-tier to device bandwidth, bytes/s.')),
                ('seed', models.PositiveBigIntegerField()),
                ('tau', models.FloatField()),
                ('tokens_per_sec', models.FloatField(help_text='Modeled throughput under the cost model.')),
                ('bytes_total', models.PositiveBigIntegerField()),
                ('bytes_spec', models.PositiveBigIntegerField()),
                ('bytes_verify', models.PositiveBigIntegerField()),
                ('bytes_setup', models.PositiveBigIntegerField(default=0)),
                ('lam', models.FloatField(verbose_name='lambda')),
                ('s_eq1', models.FloatField()),
                ('s_eq2', models.FloatField()),
                ('c_ratio', models.FloatField(default=0.0)),
                ('compute_s', models.FloatField(default=0.0)),
                ('migration_s', models.FloatField(default=0.0)),
                ('wall_clock_s', models.FloatField(default=0.0, help_text='Real time the simulation itself took.')),
                ('steps', models.PositiveIntegerField(default=0)),
                ('tokens', models.PositiveIntegerField(default=0)),
                ('text_hash', models.CharField(blank=True, max_length=64)),
                ('experiment', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='results', to='harness.experiment')),
            ],
            options={
                'verbose_name': 'Result row',
                'verbose_name_plural': 'Result rows',
                'ordering': ['engine', 'policy', 'batch', 'gamma', 'n_draft', 'bandwidth', 'seed'],
            },
        ),
    ]
