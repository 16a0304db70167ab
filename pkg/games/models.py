import re

from django.core.exceptions import ValidationError
from django.db import models

_BITS = re.compile(r"^[01]{4}$")


class TimeStampedModel(models.Model):
    created_at = models.DateTimeField(auto_now_add=True, db_index=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True


class ExperimentRun(TimeStampedModel):
    SIMULATED = "simulated"
    INGESTED = "ingested"

    PROVENANCE_CHOICES = [
        (SIMULATED, "Simulated"),
        (INGESTED, "Ingested"),
    ]

    name = models.CharField(max_length=120)
    graph_name = models.CharField(max_length=60, default="g14")
    graph_hash = models.CharField(max_length=64, db_index=True)
    colors = models.PositiveSmallIntegerField(default=4)
    preset = models.CharField(max_length=40, blank=True)
    seed = models.BigIntegerField(null=True, blank=True)
    shots = models.PositiveIntegerField(null=True, blank=True, help_text="Shots per circuit, if uniform")
    provenance = models.CharField(max_length=10, choices=PROVENANCE_CHOICES, default=SIMULATED)
    has_corrected_report = models.BooleanField(
        default=False, help_text="Report carries a SPAM-corrected section; stored counts are raw."
    )
    toolkit_version = models.CharField(max_length=20)
    report = models.JSONField(default=dict, blank=True)

    class Meta:
        ordering = ["-created_at", "-id"]
        indexes = [
            models.Index(fields=["graph_hash", "provenance"], name="run_graph_provenance_idx"),
        ]

    @property
    def omega(self):
        return self.report.get("winrate", {}).get("omega")

    def __str__(self):
        return f"{self.name}: {self.graph_name} ({self.get_provenance_display()})"


class CircuitCounts(models.Model):
    VERTEX = "vertex"
    EDGE = "edge"

    KIND_CHOICES = [
        (VERTEX, "Vertex"),
        (EDGE, "Edge"),
    ]

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name="records")
    label = models.CharField(max_length=20)
    kind = models.CharField(max_length=6, choices=KIND_CHOICES)
    shots = models.PositiveIntegerField()
    counts = models.JSONField(default=dict)

    class Meta:
        ordering = ["run_id", "id"]
        constraints = [
            models.UniqueConstraint(fields=["run", "label"], name="uniq_run_label"),
            models.CheckConstraint(condition=models.Q(shots__gt=0), name="chk_positive_shots"),
        ]

    def clean(self):
        bad = [bits for bits in self.counts if not _BITS.match(str(bits))]
        if bad:
            raise ValidationError(f"Malformed outcome strings: {', '.join(sorted(bad))}")
        total = sum(self.counts.values())
        if total != self.shots:
            raise ValidationError(f"Counts sum to {total}, expected {self.shots} shots.")

    def __str__(self):
        return f"[{self.run_id}] {self.label}: {self.shots} shots"
