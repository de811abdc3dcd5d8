"""
PDD Optimizer Service.
Joint antenna-position and beamforming design by penalty dual decomposition:
an inner block-coordinate loop (lifted SDP block, then position block) wrapped
in outer dual and penalty updates, followed by an exact fixed-position polish.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from scenario import STREAM_RESTARTS, Scenario
from services.position_service import PgdKnobs, run_pgd
from services.sdr_service import InfeasibleSdpError, SdrBeamformerService
from utils.channel_metrics import (
    al_objective_lifted,
    beampattern_gain,
    coupling_v_lifted,
    gain_db,
    sinr_all,
    steering_vector,
    synthesize_channels,
    violation,
)
from utils.geometry import initial_positions, sample_random
from utils.units import linear_to_db

logger = logging.getLogger(__name__)

# guards the relative-change test when F is close to zero
F_EPS = 1e-12
SINR_SLACK_TOL_DB = 0.01

STATUS_OK = "ok"
STATUS_INFEASIBLE = "infeasible"
VERDICT_INFEASIBLE = "infeasible at converged geometry"


@dataclass
class TraceRecord:
    outer: int
    inner: int
    F: float
    violation: float
    rho: float


@dataclass
class PddState:
    """Iterate of the double loop."""
    t: np.ndarray
    h_all: np.ndarray
    xi: np.ndarray
    rho: float
    lifted: Optional[np.ndarray] = None
    W_D: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    F: Optional[float] = None
    i: int = 0
    j: int = 0
    inner_iters_total: int = 0
    violation_history: List[float] = field(default_factory=list)
    f_history: List[float] = field(default_factory=list)
    rho_history: List[float] = field(default_factory=list)
    objective_history: List[float] = field(default_factory=list)
    beam_gain_history: List[float] = field(default_factory=list)
    trace: List[TraceRecord] = field(default_factory=list)


@dataclass
class PddResult:
    """Outcome of one scheme on one realization."""
    scheme: str
    t: np.ndarray
    W_D: np.ndarray
    sinr_db: np.ndarray
    gain_db: float
    violation: float = 0.0
    feasible: bool = True
    status: str = STATUS_OK
    verdict: str = ""
    outer_iters: int = 0
    inner_iters_total: int = 0
    wall_ms: float = 0.0
    certificate_ok: bool = True
    min_sinr_slack_db: float = float("inf")
    trace: List[TraceRecord] = field(default_factory=list)
    violation_history: List[float] = field(default_factory=list)
    f_history: List[float] = field(default_factory=list)
    rho_history: List[float] = field(default_factory=list)
    objective_history: List[float] = field(default_factory=list)
    beam_gain_history: List[float] = field(default_factory=list)


def sinr_slacks_db(h_all: np.ndarray, W_D: np.ndarray, sinr_targets: np.ndarray,
                   noise_power: float = 1.0) -> np.ndarray:
    """
    Per-user SINR slack in dB (achieved minus target).

    A user with zero SINR gets -inf ("no service"); otherwise a zero target
    gives +inf.
    """
    achieved = sinr_all(h_all, W_D, noise_power)
    slacks = np.empty(achieved.size)
    for k, (value, target) in enumerate(zip(achieved, sinr_targets)):
        if not value > 0:
            slacks[k] = -np.inf
        elif target <= 0:
            slacks[k] = np.inf
        else:
            slacks[k] = linear_to_db(value) - linear_to_db(target)
    return slacks


def build_result(scheme: str, scenario: Scenario, t: np.ndarray, W_D: np.ndarray,
                 certificate_ok: bool = True) -> PddResult:
    """Evaluate SINRs, gain and slack of a final design."""
    cfg = scenario.config
    h_all = synthesize_channels(scenario.paths, t, cfg.wavelength)
    slacks = sinr_slacks_db(h_all, W_D, cfg.sinr_targets_array, scenario.noise_power)
    gain = beampattern_gain(t, W_D, cfg.target_angle, cfg.wavelength)
    return PddResult(
        scheme=scheme,
        t=np.asarray(t, dtype=float),
        W_D=np.asarray(W_D, dtype=complex),
        sinr_db=np.atleast_1d(linear_to_db(sinr_all(h_all, W_D, scenario.noise_power))),
        gain_db=gain_db(gain, cfg.transmit_power),
        feasible=bool(np.all(slacks >= -SINR_SLACK_TOL_DB)),
        certificate_ok=certificate_ok,
        min_sinr_slack_db=float(np.min(slacks)),
    )


class PddOptimizerService:
    """Service running the PDD joint design for one scenario."""

    def __init__(self, config, sdr_service: Optional[SdrBeamformerService] = None):
        self.config = config
        self.sdr = sdr_service or SdrBeamformerService.from_config(config)
        self.knobs = PgdKnobs.from_config(config)

    def _objective(self, state: PddState, scenario: Scenario) -> float:
        cfg = scenario.config
        return al_objective_lifted(state.t, state.lifted, state.Q, state.xi, state.rho,
                                   cfg.target_angle, cfg.wavelength, state.h_all)

    def run_inner_bcd(self, state: PddState, scenario: Scenario) -> PddState:
        """
        Alternate the (W, Q) block and the position block at fixed (xi, rho).

        Stops when the relative change of F falls below delta_in or after
        max_inner passes. On the first outer iteration no previous F exists,
        so the test starts with the second pass.

        Raises:
            SolverError: Propagated from the SDP block
        """
        cfg = scenario.config
        previous = self._objective(state, scenario) if state.Q is not None else None

        i = 0
        while True:
            i += 1
            solution = self.sdr.solve_inner_sdp(
                state.t, state.xi, state.rho, state.h_all, cfg.sinr_targets_array,
                scenario.noise_power, cfg.transmit_power, cfg.target_angle, cfg.wavelength,
            )
            state.lifted, state.Q, state.W_D = solution.lifted, solution.Q, solution.W_D

            if cfg.optimize_positions:
                state.t, _ = run_pgd(state.t, state.lifted, state.Q, state.xi, state.rho, scenario.paths,
                                     cfg.target_angle, cfg.wavelength, cfg.aperture, self.knobs)
                state.h_all = synthesize_channels(scenario.paths, state.t, cfg.wavelength)

            current = self._objective(state, scenario)
            state.F = current
            state.i = i
            state.inner_iters_total += 1
            gap = violation(state.Q, coupling_v_lifted(state.lifted, state.h_all))
            state.trace.append(TraceRecord(state.j, i, current, gap, state.rho))
            logger.debug(f"outer {state.j} inner {i}: F={current:.9e} violation={gap:.3e}")

            if previous is not None and abs(current - previous) / max(abs(current), F_EPS) < cfg.delta_in:
                break
            if i >= cfg.max_inner:
                break
            previous = current
        return state

    def _run_from(self, scenario: Scenario, t0: np.ndarray) -> PddResult:
        cfg = scenario.config
        K = cfg.num_users
        state = PddState(
            t=np.array(t0, dtype=float),
            h_all=synthesize_channels(scenario.paths, t0, cfg.wavelength),
            xi=np.zeros((K, K)),
            rho=cfg.rho0,
        )

        for j in range(cfg.max_outer):
            state.j = j
            state.rho = cfg.rho0 * cfg.c0 ** j
            state = self.run_inner_bcd(state, scenario)

            V = coupling_v_lifted(state.lifted, state.h_all)
            gap = violation(state.Q, V)
            a = steering_vector(cfg.target_angle, state.t, cfg.wavelength)
            beam = float(np.real(a.conj() @ np.sum(state.lifted, axis=0) @ a))
            state.violation_history.append(gap)
            state.f_history.append(state.F)
            state.rho_history.append(state.rho)
            state.objective_history.append(-state.F)
            state.beam_gain_history.append(beam)
            logger.info(f"outer {j}: rho={state.rho:.3e} violation={gap:.3e} F={state.F:.6e}")

            if gap < cfg.delta_out:
                break
            state.xi = state.xi + (state.Q - V) / state.rho

        try:
            beamformer = self.sdr.solve_fixed_position_sdp(
                state.t, state.h_all, cfg.sinr_targets_array, scenario.noise_power,
                cfg.transmit_power, cfg.target_angle, cfg.wavelength,
            )
            result = build_result("pdd", scenario, state.t, beamformer.W_D, beamformer.certificate_ok)
            result.status = STATUS_OK if result.feasible else STATUS_INFEASIBLE
        except InfeasibleSdpError as e:
            logger.warning(f"polish SDP infeasible at converged geometry "
                           f"(final violation {state.violation_history[-1]:.3e}): {str(e)[:200]}")
            result = build_result("pdd", scenario, state.t, state.W_D)
            result.feasible = False
            result.status = STATUS_INFEASIBLE
            result.verdict = VERDICT_INFEASIBLE

        result.violation = state.violation_history[-1]
        result.outer_iters = len(state.violation_history)
        result.inner_iters_total = state.inner_iters_total
        result.trace = state.trace
        result.violation_history = state.violation_history
        result.f_history = state.f_history
        result.rho_history = state.rho_history
        result.objective_history = state.objective_history
        result.beam_gain_history = state.beam_gain_history
        return result

    def starting_points(self, scenario: Scenario) -> List[np.ndarray]:
        """Deterministic initial geometry plus one random draw per extra restart."""
        cfg = scenario.config
        starts = [initial_positions(cfg.num_antennas, cfg.aperture, cfg.wavelength,
                                    cfg.init_scheme, center=cfg.fa_center)]
        for r in range(1, cfg.restarts):
            rng = scenario.rng(STREAM_RESTARTS, r)
            starts.append(sample_random(rng, cfg.num_antennas, cfg.aperture, cfg.wavelength))
        return starts

    def run_pdd(self, scenario: Scenario) -> PddResult:
        """
        Run the joint design, keeping the best restart.

        Feasible results beat infeasible ones; ties are broken by gain.

        Raises:
            SolverError: Inner SDP failure
        """
        start = time.perf_counter()
        best = None
        for index, t0 in enumerate(self.starting_points(scenario)):
            result = self._run_from(scenario, t0)
            logger.info(f"start {index}: gain={result.gain_db:.3f} dB status={result.status} "
                        f"outer={result.outer_iters}")
            if best is None or (result.feasible, result.gain_db) > (best.feasible, best.gain_db):
                best = result
        best.wall_ms = (time.perf_counter() - start) * 1000.0
        return best

    def audit_feasibility(self, result: PddResult, scenario: Scenario) -> List[float]:
        """Per-user SINR slack (dB) of a result, recomputed from its positions and beamformers."""
        cfg = scenario.config
        h_all = synthesize_channels(scenario.paths, result.t, cfg.wavelength)
        return sinr_slacks_db(h_all, result.W_D, cfg.sinr_targets_array, scenario.noise_power).tolist()
