"""
Antenna position geometry for a linear movable-antenna array.
Feasible set: 0 <= t_p <= L and t_{p+1} - t_p >= lambda/2.
"""
from typing import Optional

import numpy as np

FEASIBILITY_TOL = 1e-9

POSITION_SCHEMES = ("uniform_spread", "ula_compact")


def _check_geometry(num_antennas: int, aperture: float, wavelength: float):
    if num_antennas < 1:
        raise ValueError(f"num_antennas must be >= 1, got {num_antennas}")
    if aperture < (num_antennas - 1) * wavelength / 2 - FEASIBILITY_TOL:
        raise ValueError(
            f"spacing constraint infeasible: aperture {aperture} m < "
            f"(N_t-1)*lambda/2 = {(num_antennas - 1) * wavelength / 2} m"
        )


def is_feasible(t, aperture: float, wavelength: float, tol: float = FEASIBILITY_TOL) -> bool:
    """Check the aperture and minimum-spacing constraints within an absolute tolerance."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 1 or not np.all(np.isfinite(t)):
        return False
    if np.any(t < -tol) or np.any(t > aperture + tol):
        return False
    if t.size > 1 and np.any(np.diff(t) < wavelength / 2 - tol):
        return False
    return True


def project(t, aperture: float, wavelength: float) -> np.ndarray:
    """
    Restore feasibility with a left-to-right clamp.

    Entry p is clamped to [t_{p-1} + lambda/2, L - (N_t - p) * lambda/2]
    using the already-clamped t_{p-1}; the first entry has lower bound 0.
    The upper bound is the tightest one that still leaves room for the
    remaining elements, so feasible inputs are returned unchanged.

    Args:
        t: Candidate positions in meters (any order)
        aperture: Aperture length L in meters
        wavelength: Wavelength in meters

    Returns:
        Feasible positions (new array)
    """
    t = np.array(t, dtype=float)
    n = t.size
    half = wavelength / 2
    for p in range(n):
        upper = aperture - (n - 1 - p) * half
        lower = 0.0 if p == 0 else t[p - 1] + half
        t[p] = max(lower, min(upper, t[p]))
    return t


def initial_positions(num_antennas: int, aperture: float, wavelength: float,
                      scheme: str = "uniform_spread", center: bool = False) -> np.ndarray:
    """
    Deterministic starting geometry.

    Args:
        num_antennas: N_t
        aperture: L in meters
        wavelength: lambda in meters
        scheme: 'uniform_spread' (spread over [0, L]) or 'ula_compact' (lambda/2 ULA)
        center: For 'ula_compact', center the ULA in the aperture instead of anchoring at 0

    Returns:
        Feasible positions

    Raises:
        ValueError: Infeasible geometry or unknown scheme
    """
    _check_geometry(num_antennas, aperture, wavelength)
    p = np.arange(num_antennas, dtype=float)
    if scheme == "uniform_spread":
        if num_antennas == 1:
            return np.array([aperture / 2])
        t = p * aperture / (num_antennas - 1)
    elif scheme == "ula_compact":
        t = p * wavelength / 2
        if center:
            t = t + (aperture - (num_antennas - 1) * wavelength / 2) / 2
    else:
        raise ValueError(f"Unknown position scheme '{scheme}', expected one of {POSITION_SCHEMES}")
    return t


def sample_random(rng: np.random.Generator, num_antennas: int, aperture: float,
                  wavelength: float) -> np.ndarray:
    """
    Draw positions uniformly over the feasible polytope.

    Sorted uniforms scaled to the free length L - (N_t-1)*lambda/2 are
    shifted by the mandatory lambda/2 gaps; the map is a volume-preserving
    bijection, so the result is uniform on the feasible set.
    """
    _check_geometry(num_antennas, aperture, wavelength)
    free = max(aperture - (num_antennas - 1) * wavelength / 2, 0.0)
    slack = np.sort(rng.uniform(0.0, 1.0, num_antennas)) * free
    t = slack + np.arange(num_antennas) * wavelength / 2
    # floating round-off at the upper edge
    t = np.minimum(t, aperture)
    assert is_feasible(t, aperture, wavelength), "sampled positions left the feasible set"
    return t


def compact_ula(num_antennas: int, wavelength: float, aperture: Optional[float] = None,
                center: bool = False) -> np.ndarray:
    """lambda/2-spaced ULA; anchored at 0 unless centered in the given aperture."""
    if aperture is None:
        aperture = (num_antennas - 1) * wavelength / 2
    return initial_positions(num_antennas, aperture, wavelength, "ula_compact", center=center)
