# Generated by Django 5.2.7 on 2026-02-03 09:41

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True, db_index=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('name', models.CharField(max_length=120)),
                ('graph_name', models.CharField(default='g14', max_length=60)),
                ('graph_hash', models.CharField(db_index=True, max_length=64)),
                ('colors', models.PositiveSmallIntegerField(default=4)),
                ('preset', models.CharField(blank=True, max_length=40)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('shots', models.PositiveIntegerField(blank=True, help_text='Shots per circuit, if uniform', null=True)),
                ('provenance', models.CharField(choices=[('simulated', 'Simulated'), ('ingested', 'Ingested')], default='simulated', max_length=10)),
                ('has_corrected_report', models.BooleanField(default=False, help_text='Report carries a SPAM-corrected section; stored counts are raw.')),
                ('toolkit_version', models.CharField(max_length=20)),
                ('report', models.JSONField(blank=True, default=dict)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
                'indexes': [models.Index(fields=['graph_hash', 'provenance'], name='run_graph_provenance_idx')],
            },
        ),
        migrations.CreateModel(
            name='CircuitCounts',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('label', models.CharField(max_length=20)),
                ('kind', models.CharField(choices=[('vertex', 'Vertex'), ('edge', 'Edge')], max_length=6)),
                ('shots', models.PositiveIntegerField()),
                ('counts', models.JSONField(default=dict)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='games.experimentrun')),
            ],
            options={
                'ordering': ['run_id', 'id'],
                'constraints': [models.UniqueConstraint(fields=('run', 'label'), name='uniq_run_label'), models.CheckConstraint(condition=models.Q(('shots__gt', 0)), name='chk_positive_shots')],
            },
        ),
    ]
