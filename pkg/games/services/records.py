import logging

from django.core.exceptions import ValidationError
from django.db import transaction

from games.exceptions import DataError
from games.models import CircuitCounts, ExperimentRun
from games.services.stats import CountsDataset, CountsRecord

logger = logging.getLogger(__name__)


@transaction.atomic
def save_dataset(dataset, graph, name, version, colors=4, preset="", seed=None, report=None,
                 has_corrected_report=False):
    """
    Stores a dataset as one ExperimentRun with a CircuitCounts row per
    circuit. Either everything is written or nothing.
    """
    if dataset.corrected:
        raise DataError("only raw counts are stored; SPAM correction is applied at analysis time")
    shots = set(dataset.shot_counts)
    run = ExperimentRun.objects.create(
        name=name,
        graph_name=graph.name or "graph",
        graph_hash=graph.digest,
        colors=colors,
        preset=preset or "",
        seed=seed,
        shots=shots.pop() if len(shots) == 1 else None,
        provenance=dataset.provenance,
        has_corrected_report=has_corrected_report,
        toolkit_version=version,
        report=report or {},
    )
    rows = []
    for record in dataset.records:
        row = CircuitCounts(run=run, label=record.label, kind=record.kind,
                            shots=record.shots, counts=dict(record.counts))
        try:
            row.full_clean(exclude=["run"])
        except ValidationError as exc:
            raise DataError(f"record {record.label}: {'; '.join(exc.messages)}") from exc
        rows.append(row)
    CircuitCounts.objects.bulk_create(rows)
    logger.info("stored run %s (%d circuits)", run.pk, len(rows))
    return run


def load_dataset(run):
    records = tuple(
        CountsRecord(label=row.label, kind=row.kind, shots=row.shots, counts=dict(row.counts))
        for row in run.records.all()
    )
    return CountsDataset(records=records, provenance=run.provenance)
