"""
Position Optimizer Service.
Moves the antennas for fixed beamformers by projected gradient descent with a
backtracking line search.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.channel_metrics import (
    coupling_v_lifted,
    objective_at_positions,
    phase_rate,
    steering_matrix,
    steering_vector,
)
from utils.geometry import project

logger = logging.getLogger(__name__)

GRADIENT_EPS = 1e-12


@dataclass
class PgdKnobs:
    """Line-search and stopping parameters of the position update."""
    step0: Optional[float] = None
    shrink: float = 0.5
    max_backtracks: int = 30
    max_iters: int = 200
    armijo_c: float = 1.0
    move_tol_lambda: float = 1e-6

    @classmethod
    def from_config(cls, config) -> "PgdKnobs":
        return cls(
            step0=config.pgd_step0,
            shrink=config.pgd_shrink,
            max_backtracks=config.pgd_max_backtracks,
            max_iters=config.pgd_max_iters,
            armijo_c=config.pgd_armijo_c,
        )


@dataclass
class PgdTrace:
    iterations: int = 0
    values: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    grad_sq: List[float] = field(default_factory=list)
    termination: str = ""


def gradient_t(t, W_lifted: np.ndarray, Q: np.ndarray, xi: np.ndarray, rho: float,
               paths: Sequence, theta_s: float, wavelength: float) -> np.ndarray:
    """
    Analytic gradient of the augmented-Lagrangian objective F with respect to t.

    F(t) = -a(t)^H R a(t) + 1/(2 rho) sum_{k,i} (B_ki(t) - A_ki)^2 with
    R = sum_k W_k, B_ki = h_k^H W_i h_k and A = Q + rho xi.

    Args:
        t: Antenna positions (m)
        W_lifted: Lifted beamformers, shape (K, N_t, N_t)
        Q: Auxiliary coupling matrix (K x K)
        xi: Dual variables (K x K)
        rho: Penalty parameter
        paths: Per-user PathSet sequence (noise-normalized)
        theta_s: Sensing angle (rad)
        wavelength: lambda (m)

    Returns:
        dF/dt, length N_t
    """
    t = np.asarray(t, dtype=float)
    lifted = np.asarray(W_lifted, dtype=complex)

    # beam term: d(-a^H R a)/dt_p = 2 c_s Im(conj(a_p) (R a)_p)
    c_s = phase_rate(theta_s, wavelength)
    a = steering_vector(theta_s, t, wavelength)
    R = np.sum(lifted, axis=0)
    grad = 2.0 * c_s * np.imag(a.conj() * (R @ a))

    # penalty term through the channels; each steering matrix is built once
    h_rows, dh_rows = [], []
    for user_paths in paths:
        G = steering_matrix(user_paths.angles, t, wavelength)
        rates = phase_rate(user_paths.angles, wavelength)
        h_rows.append(user_paths.gains @ G)
        dh_rows.append((user_paths.gains * (-1j * rates)) @ G)
    h_all = np.vstack(h_rows)
    dh_all = np.vstack(dh_rows)

    B = coupling_v_lifted(lifted, h_all)
    A = np.asarray(Q, dtype=float) + rho * np.asarray(xi, dtype=float)
    weights = (B - A) / rho

    # WH[i, k, :] = W_i h_k
    WH = np.einsum("inm,km->ikn", lifted, h_all)
    dB = 2.0 * np.real(dh_all.conj()[None, :, :] * WH)
    grad += np.einsum("ki,ikn->n", weights, dB)
    return grad


def run_pgd(t0, W_lifted: np.ndarray, Q: np.ndarray, xi: np.ndarray, rho: float, paths: Sequence,
            theta_s: float, wavelength: float, aperture: float,
            knobs: Optional[PgdKnobs] = None) -> Tuple[np.ndarray, PgdTrace]:
    """
    Projected gradient descent on F(t) with backtracking.

    A trial step t' = project(t - gamma * g) is accepted when
    F(t') <= F(t) - c * gamma * ||g||^2. When no trial among the
    1 + max_backtracks candidates passes, the iteration stops at t.

    Returns:
        (positions, trace); positions are feasible and F(positions) <= F(t0)
    """
    knobs = knobs or PgdKnobs()
    t = np.array(t0, dtype=float)

    def objective(x):
        return objective_at_positions(x, W_lifted, Q, xi, rho, paths, theta_s, wavelength)

    value = objective(t)
    trace = PgdTrace(values=[value])
    move_tol = knobs.move_tol_lambda * wavelength

    for iteration in range(1, knobs.max_iters + 1):
        trace.iterations = iteration
        grad = gradient_t(t, W_lifted, Q, xi, rho, paths, theta_s, wavelength)
        grad_sq = float(grad @ grad)
        if grad_sq == 0.0:
            trace.termination = "zero gradient"
            break

        step = knobs.step0 if knobs.step0 is not None else 0.1 * wavelength / (np.sqrt(grad_sq) + GRADIENT_EPS)
        accepted = None
        for _ in range(knobs.max_backtracks + 1):
            candidate = project(t - step * grad, aperture, wavelength)
            candidate_value = objective(candidate)
            if candidate_value <= value - knobs.armijo_c * step * grad_sq:
                accepted = (candidate, candidate_value)
                break
            step *= knobs.shrink

        if accepted is None:
            trace.termination = "line search exhausted"
            break

        candidate, candidate_value = accepted
        move = float(np.max(np.abs(candidate - t)))
        t, value = candidate, candidate_value
        trace.values.append(value)
        trace.steps.append(step)
        trace.grad_sq.append(grad_sq)
        if move < move_tol:
            trace.termination = "small move"
            break
    else:
        trace.termination = "max iterations"

    logger.debug(f"PGD stopped after {trace.iterations} iterations: {trace.termination} (F={value:.6e})")
    return t, trace
