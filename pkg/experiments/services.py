"""
Run provenance: every run and sweep started from the command line leaves a database row.
"""
import logging
import math
from typing import Any, Dict, Optional

from django.db import transaction
from django.utils import timezone

from .config import RunConfig
from .models import SimulationRun, Sweep
from .runner import RunResult
from .sweep import SweepResult, SweepSpec


logger = logging.getLogger(__name__)


def _json_safe(kpis: Dict[str, Any]) -> Dict[str, Any]:
    """JSONField rejects NaN; empty averages become None."""
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in kpis.items()}


def start_run(run_config: RunConfig, sweep: Optional[Sweep] = None, label: Optional[Dict[str, Any]] = None) -> SimulationRun:
    return SimulationRun.objects.create(
        sweep=sweep,
        mode=run_config.mode.value,
        seed=run_config.seed,
        fleet_size=run_config.fleet_size,
        config_hash=run_config.config_hash(),
        config_text=run_config.to_ini(),
        out_dir=str(run_config.out),
        label=label or {},
    )


def finish_run(record: SimulationRun, result: RunResult) -> SimulationRun:
    record.status = 'done'
    record.served_pct = result.report.served_pct
    record.kpis = _json_safe(result.report.flat())
    record.out_dir = str(result.out)
    record.finished_at = timezone.now()
    record.save(update_fields=['status', 'served_pct', 'kpis', 'out_dir', 'finished_at'])
    return record


def fail_run(record: SimulationRun, error: Exception) -> SimulationRun:
    record.status = 'failed'
    record.error = f"{type(error).__name__}: {error}"
    record.finished_at = timezone.now()
    record.save(update_fields=['status', 'error', 'finished_at'])
    logger.error(f"Run {record.pk} failed: {record.error}")
    return record


def start_sweep(spec: SweepSpec) -> Sweep:
    return Sweep.objects.create(name=spec.name, size=spec.size)


def record_sweep_run(sweep: Sweep, run_config: RunConfig, label: Dict[str, Any], kpis: Dict[str, Any]) -> SimulationRun:
    record = start_run(run_config, sweep=sweep, label={k: v for k, v in label.items() if k != "error"})
    if "error" in kpis:
        record.status = 'failed'
        record.error = kpis["error"]
    else:
        record.status = 'done'
        record.served_pct = kpis.get("served_pct")
        record.kpis = _json_safe(kpis)
    record.finished_at = timezone.now()
    record.save()
    return record


@transaction.atomic
def finish_sweep(sweep: Sweep, result: SweepResult) -> Sweep:
    sweep.failures = len(result.failures)
    sweep.matrix_path = str(result.path or '')
    sweep.status = 'failed' if result.matrix.empty else 'done'
    sweep.finished_at = timezone.now()
    sweep.save()
    return sweep
