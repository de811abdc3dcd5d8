"""
Single-series SVG plots of beampattern sweeps.
"""
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps reruns byte-identical
SVG_METADATA = {"Date": None, "Creator": None}


def save_beampattern_svg(path: str, theta_deg: Sequence[float], gain_db: Sequence[float],
                         title: str = "", target_deg: float = None):
    """Line plot of normalized gain (dB) over angle (deg)."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    try:
        ax.plot(theta_deg, gain_db, linewidth=1.2)
        if target_deg is not None:
            ax.axvline(target_deg, color="gray", linestyle="--", linewidth=0.8)
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("beampattern gain (dB over P_t)")
        ax.set_xlim(min(theta_deg), max(theta_deg))
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    finally:
        plt.close(fig)
