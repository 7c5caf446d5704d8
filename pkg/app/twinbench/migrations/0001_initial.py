# Generated by Django 4.2.2 on 2026-10-17 09:12

from django.conf import settings
from django.db import migrations, models
import django.db.models.deletion
import uuid


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        migrations.swappable_dependency(settings.AUTH_USER_MODEL),
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('name', models.CharField(max_length=128)),
                ('config_text', models.TextField(blank=True)),
                ('output_dir', models.CharField(blank=True, max_length=512)),
                ('created', models.DateTimeField(auto_now_add=True)),
                ('owner', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='experiments', to=settings.AUTH_USER_MODEL)),
            ],
        ),
        migrations.CreateModel(
            name='ModelRun',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('model', models.CharField(max_length=256)),
                ('variant', models.CharField(max_length=128)),
                ('frame_count', models.PositiveIntegerField()),
                ('width', models.PositiveIntegerField()),
                ('height', models.PositiveIntegerField()),
                ('background', models.CharField(max_length=6)),
                ('vertex_noise_sigma', models.FloatField(default=0.0)),
                ('status', models.CharField(choices=[('ok', 'ok'), ('ground_truth_failed', 'ground_truth_failed'), ('reconstruction_failed', 'reconstruction_failed'), ('alignment_failed', 'alignment_failed'), ('scoring_failed', 'scoring_failed')], max_length=32)),
                ('error', models.TextField(blank=True)),
                ('global_ssim', models.FloatField(blank=True, null=True)),
                ('unweighted_ssim', models.FloatField(blank=True, null=True)),
                ('frames_used', models.PositiveIntegerField(default=0)),
                ('rough_rms', models.FloatField(blank=True, null=True)),
                ('icp_rms', models.FloatField(blank=True, null=True)),
                ('icp_iterations', models.PositiveIntegerField(default=0)),
                ('icp_failed', models.BooleanField(default=False)),
                ('dropped_poses', models.PositiveIntegerField(default=0)),
                ('timings', models.JSONField(default=dict)),
                ('timestamp', models.DateTimeField(auto_now_add=True)),
                ('experiment', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='twinbench.experiment')),
            ],
        ),
        migrations.CreateModel(
            name='FrameScore',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('frame_index', models.PositiveIntegerField()),
                ('weighted_ssim', models.FloatField(blank=True, null=True)),
                ('unweighted_ssim', models.FloatField(blank=True, null=True)),
                ('foreground_px', models.PositiveIntegerField(default=0)),
                ('failed', models.BooleanField(default=False)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='frames', to='twinbench.modelrun')),
            ],
            options={
                'ordering': ['frame_index'],
            },
        ),
    ]
