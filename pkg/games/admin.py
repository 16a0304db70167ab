from django.contrib import admin

from .models import CircuitCounts, ExperimentRun


class CircuitCountsInline(admin.TabularInline):
    model = CircuitCounts
    extra = 0
    fields = ("label", "kind", "shots", "counts")


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("name", "graph_name", "preset", "provenance", "has_corrected_report", "created_at")
    list_filter = ("provenance", "preset", "has_corrected_report")
    search_fields = ("name", "graph_hash")
    inlines = [CircuitCountsInline]
