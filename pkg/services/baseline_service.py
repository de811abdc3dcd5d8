"""
Baseline Service.
Comparison schemes for the joint design: fixed compact and sparse arrays,
randomly placed movable antennas, and the analytic gain bound.
"""
import logging
import time
from enum import Enum
from typing import Optional

import numpy as np

from scenario import STREAM_RANDOM_POSITIONS, Scenario
from services.pdd_service import PddOptimizerService, PddResult, build_result, STATUS_INFEASIBLE, STATUS_OK
from services.sdr_service import InfeasibleSdpError, SdrBeamformerService
from utils.channel_metrics import synthesize_channels
from utils.geometry import compact_ula, initial_positions, sample_random
from utils.units import linear_to_db

logger = logging.getLogger(__name__)


class BaselineKind(str, Enum):
    FIXED_ULA = "fa"
    SPARSE_ULA = "sula"
    RANDOM_MA = "random"
    UPPER_BOUND = "bound"
    PDD_JAPB = "pdd"

    @classmethod
    def from_name(cls, name: str) -> "BaselineKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"Unknown scheme '{name}', expected one of {[k.value for k in cls]}")


SCHEME_NAMES = [kind.value for kind in BaselineKind]


def baseline_positions(kind: BaselineKind, scenario: Scenario) -> np.ndarray:
    """Fixed geometry used by the position-agnostic schemes."""
    cfg = scenario.config
    if kind == BaselineKind.FIXED_ULA:
        return compact_ula(cfg.num_antennas, cfg.wavelength, aperture=cfg.aperture, center=cfg.fa_center)
    if kind == BaselineKind.SPARSE_ULA:
        return initial_positions(cfg.num_antennas, cfg.aperture, cfg.wavelength, "uniform_spread")
    if kind == BaselineKind.RANDOM_MA:
        rng = scenario.rng(STREAM_RANDOM_POSITIONS)
        return sample_random(rng, cfg.num_antennas, cfg.aperture, cfg.wavelength)
    raise ValueError(f"Scheme '{kind.value}' has no fixed geometry")


def upper_bound_result(scenario: Scenario) -> PddResult:
    """Normalized gain N_t with no solve; no positions or beamformers are produced."""
    cfg = scenario.config
    return PddResult(
        scheme=BaselineKind.UPPER_BOUND.value,
        t=np.zeros(0),
        W_D=np.zeros((0, cfg.num_users), dtype=complex),
        sinr_db=np.zeros(0),
        gain_db=linear_to_db(float(cfg.num_antennas)),
        min_sinr_slack_db=float("nan"),
    )


def run_fixed_positions(kind: BaselineKind, scenario: Scenario,
                        sdr_service: Optional[SdrBeamformerService] = None) -> PddResult:
    """
    Fixed-position SDP at the baseline geometry.

    An infeasible SDP is recorded on the result rather than raised.
    """
    cfg = scenario.config
    sdr = sdr_service or SdrBeamformerService.from_config(cfg)
    start = time.perf_counter()
    t = baseline_positions(kind, scenario)
    h_all = synthesize_channels(scenario.paths, t, cfg.wavelength)
    try:
        beamformer = sdr.solve_fixed_position_sdp(t, h_all, cfg.sinr_targets_array, scenario.noise_power,
                                                  cfg.transmit_power, cfg.target_angle, cfg.wavelength)
        result = build_result(kind.value, scenario, t, beamformer.W_D, beamformer.certificate_ok)
        result.status = STATUS_OK if result.feasible else STATUS_INFEASIBLE
    except InfeasibleSdpError as e:
        logger.info(f"{kind.value} realization {scenario.realization_index}: {str(e)[:200]}")
        result = build_result(kind.value, scenario, t, np.zeros((cfg.num_antennas, cfg.num_users), dtype=complex))
        result.feasible = False
        result.status = STATUS_INFEASIBLE
        result.verdict = str(e)
    result.wall_ms = (time.perf_counter() - start) * 1000.0
    return result


def run_baseline(kind, scenario: Scenario, sdr_service: Optional[SdrBeamformerService] = None) -> PddResult:
    """
    Run one comparison scheme on one realization.

    Args:
        kind: BaselineKind or its CLI name
        scenario: Channel realization with its configuration
        sdr_service: Optional shared solver service

    Returns:
        PddResult-compatible record

    Raises:
        SolverError: Solver failure (infeasibility is recorded, not raised)
    """
    if not isinstance(kind, BaselineKind):
        kind = BaselineKind.from_name(str(kind))
    if kind == BaselineKind.UPPER_BOUND:
        return upper_bound_result(scenario)
    if kind == BaselineKind.PDD_JAPB:
        return PddOptimizerService(scenario.config, sdr_service).run_pdd(scenario)
    return run_fixed_positions(kind, scenario, sdr_service)
