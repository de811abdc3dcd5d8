"""
Utility script to print the progress of a Monte Carlo campaign.
"""
import sys

from scripts.campaign_status import get_status, status_path


def print_campaign_status(out_dir: str) -> int:
    """Print the status banner. Returns 1 when no status file exists, else 0."""
    status = get_status(out_dir)
    print("=" * 70)
    print("CAMPAIGN STATUS")
    print("=" * 70)
    if status["status"] == "not_started" and status["last_update"] is None:
        print(f"No campaign status found at {status_path(out_dir)}")
        print("=" * 70)
        return 1

    print(f"Status:            {status['status']}")
    print(f"Tasks:             {status['tasks_done']}/{status['tasks_total']} "
          f"({status['progress_percentage']}%)")
    print(f"Failed:            {status['failed']}")
    print(f"Started:           {status['start_time']}")
    print(f"Last update:       {status['last_update']}")
    remaining = status.get("estimated_remaining_minutes")
    if remaining is not None and status["status"] == "running":
        print(f"Est. remaining:    {remaining:.1f} min")
    print("=" * 70)
    return 0


if __name__ == "__main__":
    sys.exit(print_campaign_status(sys.argv[1] if len(sys.argv) > 1 else "."))
