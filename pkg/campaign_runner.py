"""
Campaign Runner Module for Monte Carlo evaluation.
Distributes (sweep value x realization) tasks over worker processes, records
one row per scheme and aggregates paired means per (sweep value, scheme).
"""
import logging
import os
import threading
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from scenario import ConfigError, ScenarioConfig, draw_scenario
from scripts.campaign_status import reset_status, update_status
from services.baseline_service import SCHEME_NAMES, run_baseline
from services.pdd_service import STATUS_OK
from services.sdr_service import SdrBeamformerService
from utils.csv_schema import RUNS_COLUMNS, SUMMARY_COLUMNS, write_rows
from utils.units import db_to_linear

logger = logging.getLogger(__name__)

SWEEP_KEYS = ("sinr_target_db", "n_antennas")
DEFAULT_WORKERS = int(os.environ.get("MA_ISAC_WORKERS", "1"))


@dataclass
class CampaignSpec:
    """
    Monte Carlo campaign definition.

    Without a sweep key the base configuration is used once with sweep_value 0.
    """
    base: ScenarioConfig
    schemes: List[str]
    realizations: int
    out_dir: str
    sweep_key: Optional[str] = None
    sweep_values: List[float] = field(default_factory=list)

    def __post_init__(self):
        problems = []
        if self.realizations < 1:
            problems.append(f"realizations: must be >= 1, got {self.realizations}")
        unknown = [s for s in self.schemes if s not in SCHEME_NAMES]
        if unknown or not self.schemes:
            problems.append(f"schemes: unknown {unknown}, expected a subset of {SCHEME_NAMES}")
        if self.sweep_key is not None and self.sweep_key not in SWEEP_KEYS:
            problems.append(f"sweep: unknown axis '{self.sweep_key}', expected one of {SWEEP_KEYS}")
        if self.sweep_key is not None and not self.sweep_values:
            problems.append("sweep: no values given")
        if problems:
            raise ConfigError("Invalid campaign: " + "; ".join(problems))
        # every sweep value must produce a valid configuration
        for value in self.values():
            self.config_for(value)

    def values(self) -> List[float]:
        return list(self.sweep_values) if self.sweep_key is not None else [0.0]

    def config_for(self, value: float) -> ScenarioConfig:
        """Base configuration with the sweep axis set to one value."""
        try:
            if self.sweep_key == "sinr_target_db":
                return self.base.with_updates(sinr_targets=[float(db_to_linear(value))])
            if self.sweep_key == "n_antennas":
                return self.base.with_updates(num_antennas=int(value))
            return self.base
        except ValidationError as e:
            raise ConfigError(f"Invalid sweep value {self.sweep_key}={value}: {str(e)[:300]}") from e


@dataclass
class CampaignTask:
    sweep_index: int
    sweep_value: float
    realization: int
    config: ScenarioConfig
    schemes: Tuple[str, ...]


class CampaignJobManager:
    """Tracks running campaigns and their cancellation flags."""

    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._active = {}
        return cls._instance

    def is_campaign_running(self, campaign_id: str) -> bool:
        return bool(self._active.get(campaign_id, False))

    def start_campaign(self, campaign_id: str) -> bool:
        if self.is_campaign_running(campaign_id):
            logger.warning(f"Campaign {campaign_id} is already running")
            return False
        self._active[campaign_id] = True
        return True

    def stop_campaign(self, campaign_id: str) -> bool:
        """Signal a campaign to stop; pending tasks are cancelled."""
        if self.is_campaign_running(campaign_id):
            self._active[campaign_id] = False
            return True
        return False

    def finish_campaign(self, campaign_id: str):
        self._active.pop(campaign_id, None)


def _error_row(task: CampaignTask, scheme: str, message: str) -> Dict:
    return {
        "realization": task.realization,
        "scheme": scheme,
        "sweep_value": float(task.sweep_value),
        "gain_db": float("nan"),
        "min_sinr_slack_db": float("nan"),
        "violation": float("nan"),
        "outer_iters": 0,
        "inner_iters_total": 0,
        "wall_ms": 0.0,
        "status": f"error: {message[:200]}",
    }


def process_single_task(task: CampaignTask) -> List[Dict]:
    """
    Run every scheme on one realization at one sweep value.

    Never raises: failures land in the status column.
    """
    try:
        scenario = draw_scenario(task.config, task.realization)
        sdr = SdrBeamformerService.from_config(task.config)
    except Exception as e:
        return [_error_row(task, scheme, str(e)) for scheme in task.schemes]

    rows = []
    for scheme in task.schemes:
        try:
            result = run_baseline(scheme, scenario, sdr)
        except Exception as e:
            logger.warning(f"realization {task.realization} scheme {scheme}: {str(e)[:200]}")
            rows.append(_error_row(task, scheme, str(e)))
            continue
        rows.append({
            "realization": task.realization,
            "scheme": scheme,
            "sweep_value": float(task.sweep_value),
            "gain_db": float(result.gain_db),
            "min_sinr_slack_db": float(result.min_sinr_slack_db),
            "violation": float(result.violation),
            "outer_iters": int(result.outer_iters),
            "inner_iters_total": int(result.inner_iters_total),
            "wall_ms": float(result.wall_ms),
            "status": result.status,
        })
    return rows


def build_tasks(spec: CampaignSpec) -> List[CampaignTask]:
    tasks = []
    for sweep_index, value in enumerate(spec.values()):
        config = spec.config_for(value)
        for realization in range(spec.realizations):
            tasks.append(CampaignTask(sweep_index, float(value), realization, config, tuple(spec.schemes)))
    return tasks


def canonical_sort(rows: List[Dict], spec: CampaignSpec) -> List[Dict]:
    """Order rows by (sweep value index, realization, scheme order)."""
    sweep_order = {float(v): i for i, v in enumerate(spec.values())}
    scheme_order = {s: i for i, s in enumerate(spec.schemes)}
    return sorted(rows, key=lambda r: (sweep_order[float(r["sweep_value"])], int(r["realization"]),
                                       scheme_order[r["scheme"]]))


def summarize(rows: Sequence[Dict], spec: CampaignSpec) -> List[Dict]:
    """
    Paired aggregation per (sweep value, scheme).

    A realization is used only when every scheme reported 'ok' for it at that
    sweep value, so all schemes are averaged over the same channels.
    """
    summary = []
    for value in spec.values():
        at_value = [r for r in rows if float(r["sweep_value"]) == float(value)]
        by_realization: Dict[int, List[Dict]] = {}
        for row in at_value:
            by_realization.setdefault(int(row["realization"]), []).append(row)
        used = {r for r, group in by_realization.items() if all(row["status"] == STATUS_OK for row in group)}

        for scheme in spec.schemes:
            scheme_rows = [r for r in at_value if r["scheme"] == scheme]
            kept = [r for r in scheme_rows if int(r["realization"]) in used]
            gains = np.array([float(r["gain_db"]) for r in kept])
            slacks = np.array([float(r["min_sinr_slack_db"]) for r in kept])
            walls = np.array([float(r["wall_ms"]) for r in kept])
            summary.append({
                "sweep_value": float(value),
                "scheme": scheme,
                "mean_gain_db": float(np.mean(gains)) if kept else float("nan"),
                "std_gain_db": float(np.std(gains)) if kept else float("nan"),
                "n_used": len(kept),
                "n_total": len(scheme_rows),
                "mean_min_sinr_slack_db": float(np.mean(slacks)) if kept else float("nan"),
                "mean_wall_ms": float(np.mean(walls)) if kept else float("nan"),
            })
    return summary


def run_campaign(spec: CampaignSpec, workers: int = DEFAULT_WORKERS, campaign_id: Optional[str] = None,
                 progress_callback: Optional[Callable[[int, int], None]] = None) -> Tuple[List[Dict], List[Dict]]:
    """
    Execute a campaign and write runs.csv, summary.csv and campaign_status.json.

    Args:
        spec: Campaign definition
        workers: Worker processes; 1 runs inline
        campaign_id: Key for cancellation through CampaignJobManager (defaults to the output directory)
        progress_callback: Called with (tasks_done, tasks_total) after every task

    Returns:
        (runs rows, summary rows), both canonically ordered
    """
    campaign_id = campaign_id or os.path.abspath(spec.out_dir)
    manager = CampaignJobManager()
    if not manager.start_campaign(campaign_id):
        raise RuntimeError(f"Campaign {campaign_id} is already running")

    tasks = build_tasks(spec)
    total = len(tasks)
    reset_status(spec.out_dir, tasks_total=total)
    logger.info(f"Starting campaign: {total} tasks, schemes={spec.schemes}, workers={workers}")

    rows: List[Dict] = []
    done = 0
    failed = 0
    cancelled = False

    def record(task_rows: List[Dict]):
        nonlocal done, failed
        rows.extend(task_rows)
        done += 1
        failed += int(any(r["status"].startswith("error") for r in task_rows))
        update_status(spec.out_dir, tasks_done=done, failed=failed)
        logger.info(f"task {done}/{total} done")
        if progress_callback is not None:
            progress_callback(done, total)

    try:
        if workers <= 1:
            for task in tasks:
                if not manager.is_campaign_running(campaign_id):
                    cancelled = True
                    break
                record(process_single_task(task))
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(process_single_task, task) for task in tasks]
                for future in as_completed(futures):
                    record(future.result())
                    if not manager.is_campaign_running(campaign_id):
                        cancelled = True
                        for pending in futures:
                            pending.cancel()
                        break
    finally:
        manager.finish_campaign(campaign_id)

    rows = canonical_sort(rows, spec)
    summary = summarize(rows, spec)
    write_rows(os.path.join(spec.out_dir, "runs.csv"), RUNS_COLUMNS, rows)
    write_rows(os.path.join(spec.out_dir, "summary.csv"), SUMMARY_COLUMNS, summary)

    final_status = "cancelled" if cancelled or done < total else "completed"
    update_status(spec.out_dir, status=final_status, tasks_done=done, failed=failed)
    logger.info(f"Campaign {final_status}: {done - failed} tasks clean, {failed} with errors, "
                f"out of {done} processed")
    return rows, summary
