"""
Channel synthesis and performance metrics for a movable-antenna ISAC transmitter.

Channels are rebuilt from stored path parameters whenever the antenna
positions move. Power quantities are in noise-normalized units once the
scenario has been normalized (sigma^2 = 1).
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from utils.units import linear_to_db


@dataclass
class Beamformer:
    """Beamforming matrix W_D (N_t x K, columns w_k) plus optional lifted matrices W_k."""
    W_D: np.ndarray
    lifted: Optional[np.ndarray] = None
    rank_ratios: List[float] = field(default_factory=list)
    certificate_ok: bool = True
    status: str = "optimal"

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.W_D) ** 2))


def phase_rate(theta, wavelength: float):
    """Spatial phase rate 2*pi*sin(theta)/lambda (rad per meter)."""
    return 2.0 * np.pi * np.sin(theta) / wavelength


def steering_vector(theta: float, t, wavelength: float) -> np.ndarray:
    """Entry p is exp(-j * 2*pi * sin(theta) * t_p / lambda)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * phase_rate(theta, wavelength) * t)


def steering_matrix(thetas, t, wavelength: float) -> np.ndarray:
    """Stacked steering vectors, shape (len(thetas), N_t)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * np.outer(phase_rate(thetas, wavelength), t))


def synthesize_channel(paths, t, wavelength: float) -> np.ndarray:
    """h_k = sum_l sigma_{k,l} g(theta_{k,l}, t)."""
    return np.asarray(paths.gains) @ steering_matrix(paths.angles, t, wavelength)


def synthesize_channels(path_sets: Sequence, t, wavelength: float) -> np.ndarray:
    """All user channels at positions t, shape (K, N_t); row k is h_k."""
    return np.vstack([synthesize_channel(paths, t, wavelength) for paths in path_sets])


def lift(W_D: np.ndarray) -> np.ndarray:
    """W_k = w_k w_k^H, shape (K, N_t, N_t)."""
    W_D = np.asarray(W_D, dtype=complex)
    return np.einsum("nk,mk->knm", W_D, W_D.conj())


def coupling_v(W_D: np.ndarray, h_all: np.ndarray) -> np.ndarray:
    """V_{ki} = |h_k^H w_i|^2."""
    return np.abs(np.asarray(h_all).conj() @ np.asarray(W_D)) ** 2


def coupling_v_lifted(lifted: np.ndarray, h_all: np.ndarray) -> np.ndarray:
    """V_{ki} = tr(H_k W_i) = h_k^H W_i h_k with H_k = h_k h_k^H."""
    h_all = np.asarray(h_all)
    return np.real(np.einsum("kn,inm,km->ki", h_all.conj(), lifted, h_all))


def sinr(h_all: np.ndarray, W_D: np.ndarray, noise_power: float, k: int) -> float:
    """
    SINR of user k: |h_k^H w_k|^2 / (sum_{i != k} |h_k^H w_i|^2 + sigma^2).

    Interference is measured on user k's own channel.
    """
    powers = np.abs(np.asarray(h_all)[k].conj() @ np.asarray(W_D)) ** 2
    signal = powers[k]
    interference = np.sum(powers) - signal
    return float(signal / (interference + noise_power))


def sinr_all(h_all: np.ndarray, W_D: np.ndarray, noise_power: float) -> np.ndarray:
    return sinr_from_v(coupling_v(W_D, h_all), noise_power)


def sinr_from_v(V: np.ndarray, noise_power: float) -> np.ndarray:
    signal = np.diag(V)
    return signal / (V.sum(axis=1) - signal + noise_power)


def beampattern_gain(t, W_D: np.ndarray, theta: float, wavelength: float) -> float:
    """||a(theta, t)^H W_D||^2 under the orthogonal-streams approximation."""
    a = steering_vector(theta, t, wavelength)
    return float(np.sum(np.abs(a.conj() @ np.asarray(W_D)) ** 2))


def beampattern_sweep(t, W_D: np.ndarray, wavelength: float, theta_grid) -> np.ndarray:
    """Beampattern gain at every angle of the grid (radians)."""
    A = steering_matrix(theta_grid, t, wavelength)
    return np.sum(np.abs(A.conj() @ np.asarray(W_D)) ** 2, axis=1)


def gain_db(gain: float, transmit_power: float) -> float:
    """Gain reported in dB over P_t; the upper bound is 10*log10(N_t)."""
    if transmit_power <= 0:
        return float("-inf")
    return linear_to_db(gain / transmit_power)


def _beam_term(t, lifted: np.ndarray, theta_s: float, wavelength: float) -> float:
    a = steering_vector(theta_s, t, wavelength)
    R = np.sum(lifted, axis=0)
    return float(np.real(a.conj() @ R @ a))


def al_objective_lifted(t, lifted: np.ndarray, Q: np.ndarray, xi: np.ndarray, rho: float,
                        theta_s: float, wavelength: float, h_all: np.ndarray) -> float:
    """F = -a^H (sum_k W_k) a + 1/(2 rho) ||Q - V + rho xi||_F^2 on lifted matrices."""
    V = coupling_v_lifted(lifted, h_all)
    residual = Q - V + rho * xi
    return -_beam_term(t, lifted, theta_s, wavelength) + float(np.sum(residual ** 2)) / (2.0 * rho)


def al_objective(t, W_D: np.ndarray, Q: np.ndarray, xi: np.ndarray, rho: float,
                 theta_s: float, wavelength: float, h_all: np.ndarray) -> float:
    """Augmented-Lagrangian objective F (minimization sense) for a beamforming matrix."""
    V = coupling_v(W_D, h_all)
    residual = Q - V + rho * xi
    return -beampattern_gain(t, W_D, theta_s, wavelength) + float(np.sum(residual ** 2)) / (2.0 * rho)


def objective_at_positions(t, lifted: np.ndarray, Q: np.ndarray, xi: np.ndarray, rho: float,
                           path_sets: Sequence, theta_s: float, wavelength: float) -> float:
    """F as a function of t alone: channels are re-synthesized at t."""
    h_all = synthesize_channels(path_sets, t, wavelength)
    return al_objective_lifted(t, lifted, Q, xi, rho, theta_s, wavelength, h_all)


def violation(Q: np.ndarray, V: np.ndarray) -> float:
    """||Q - V||_inf as the largest entrywise deviation."""
    return float(np.max(np.abs(np.asarray(Q) - np.asarray(V))))
