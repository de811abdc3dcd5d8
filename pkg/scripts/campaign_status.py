"""
Utility module to track and update Monte Carlo campaign progress.
The status lives in campaign_status.json inside the campaign output directory.
"""
import json
import logging
import os
from datetime import datetime
from typing import Dict, Optional

logger = logging.getLogger(__name__)

STATUS_FILENAME = "campaign_status.json"


def status_path(out_dir: str) -> str:
    return os.path.join(out_dir, STATUS_FILENAME)


def default_status() -> Dict:
    return {
        "status": "not_started",
        "tasks_done": 0,
        "tasks_total": 0,
        "failed": 0,
        "start_time": None,
        "last_update": None,
        "progress_percentage": 0,
        "estimated_remaining_minutes": None,
    }


def get_status(out_dir: str) -> Dict:
    """Current campaign status, or the default record when none was written."""
    path = status_path(out_dir)
    if not os.path.exists(path):
        return default_status()
    try:
        with open(path, "r", encoding="utf-8") as f:
            return {**default_status(), **json.load(f)}
    except (OSError, ValueError) as e:
        logger.warning(f"Could not read {path}: {str(e)}")
        return default_status()


def update_status(
    out_dir: str,
    status: Optional[str] = None,
    tasks_done: Optional[int] = None,
    tasks_total: Optional[int] = None,
    failed: Optional[int] = None,
    start_time: Optional[str] = None,
) -> Dict:
    """Merge the given fields into the status file and refresh the derived progress fields."""
    current = get_status(out_dir)
    if status is not None:
        current["status"] = status
    if tasks_done is not None:
        current["tasks_done"] = tasks_done
    if tasks_total is not None:
        current["tasks_total"] = tasks_total
    if failed is not None:
        current["failed"] = failed
    if start_time is not None:
        current["start_time"] = start_time

    now = datetime.now()
    current["last_update"] = now.isoformat()
    total = current["tasks_total"]
    done = current["tasks_done"]
    current["progress_percentage"] = round(100.0 * done / total, 2) if total else 0
    if current["start_time"] and 0 < done < total:
        elapsed = (now - datetime.fromisoformat(current["start_time"])).total_seconds() / 60.0
        current["estimated_remaining_minutes"] = round(elapsed / done * (total - done), 2)
    elif done >= total:
        current["estimated_remaining_minutes"] = 0

    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(status_path(out_dir), "w", encoding="utf-8") as f:
            json.dump(current, f, indent=2)
    except OSError as e:
        logger.error(f"Error updating status: {str(e)}")
    return current


def reset_status(out_dir: str, tasks_total: int = 0) -> Dict:
    """Start a fresh status record for a new campaign."""
    path = status_path(out_dir)
    if os.path.exists(path):
        os.remove(path)
    return update_status(out_dir, status="running", tasks_done=0, tasks_total=tasks_total, failed=0,
                         start_time=datetime.now().isoformat())
