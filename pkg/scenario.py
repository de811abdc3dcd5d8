"""
Scenario configuration and random scenario generation.

Configuration files are flat key=value files. Logarithmic quantities
(dB / dBm) are converted to linear units on ingestion.
"""
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from utils.geometry import POSITION_SCHEMES
from utils.units import db_to_linear, dbm_to_watts

load_dotenv()

# RNG stream identifiers within one realization
STREAM_CHANNEL = 0
STREAM_RANDOM_POSITIONS = 1
STREAM_RESTARTS = 2

DEFAULT_SDP_SOLVER = os.environ.get("MA_ISAC_SDP_SOLVER", "CLARABEL")


class ConfigError(ValueError):
    """Configuration could not be parsed or violates an invariant."""


class ScenarioConfig(BaseModel):
    """All physical and algorithmic parameters, in linear SI units."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    num_users: int = 4
    num_antennas: int = 8
    wavelength: float = 0.1
    aperture: float = 1.5
    transmit_power: float = 1.0
    noise_power: float = 1e-11
    sinr_targets: Tuple[float, ...] = ()
    target_angle: float = 0.0
    paths_per_user: int = 12
    pathloss_ref: float = 1e-4
    pathloss_exp: float = 2.8
    dist_min: float = 50.0
    dist_max: float = 150.0

    # penalty dual decomposition
    rho0: float = 1.0
    c0: float = 0.6
    max_outer: int = 30
    max_inner: int = 15
    delta_in: float = 1e-5
    delta_out: float = 1e-5

    # projected gradient descent
    pgd_step0: Optional[float] = None
    pgd_shrink: float = 0.5
    pgd_max_backtracks: int = 30
    pgd_max_iters: int = 200
    pgd_armijo_c: float = 1.0

    # conic solves
    sdp_tol: float = 1e-8
    sdp_solver: str = DEFAULT_SDP_SOLVER
    rank_one_tol: float = 1e-6

    init_scheme: str = "uniform_spread"
    fa_center: bool = False
    optimize_positions: bool = True
    restarts: int = 1
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _broadcast_sinr(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            k = int(data.get("num_users", 4))
            targets = data.get("sinr_targets", None)
            if targets is None or (not isinstance(targets, (int, float)) and len(targets) == 0):
                targets = [10.0]
            if isinstance(targets, (int, float)):
                targets = [float(targets)]
            targets = [float(x) for x in targets]
            if len(targets) == 1:
                targets = targets * k
            data["sinr_targets"] = tuple(targets)
        return data

    @field_validator("num_users", "num_antennas", "paths_per_user", "max_outer", "max_inner",
                     "pgd_max_iters", "restarts")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be a positive integer")
        return value

    @field_validator("wavelength", "aperture", "transmit_power", "noise_power", "pathloss_ref",
                     "rho0", "sdp_tol", "rank_one_tol", "delta_in", "delta_out", "dist_min")
    @classmethod
    def _positive_float(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be > 0")
        return value

    @field_validator("init_scheme")
    @classmethod
    def _known_scheme(cls, value: str) -> str:
        if value not in POSITION_SCHEMES:
            raise ValueError(f"must be one of {POSITION_SCHEMES}")
        return value

    @model_validator(mode="after")
    def _check_invariants(self) -> "ScenarioConfig":
        problems = []
        if self.num_antennas < self.num_users:
            problems.append(f"n_antennas: N_t={self.num_antennas} must be >= K={self.num_users}")
        if self.aperture < (self.num_antennas - 1) * self.wavelength / 2 - 1e-12:
            problems.append(
                f"aperture_lambda: spacing constraint infeasible, L={self.aperture} m < "
                f"(N_t-1)*lambda/2={(self.num_antennas - 1) * self.wavelength / 2} m"
            )
        if len(self.sinr_targets) != self.num_users:
            problems.append(f"sinr_target_db: expected 1 or {self.num_users} values, got {len(self.sinr_targets)}")
        if any(not (g >= 0) or math.isinf(g) for g in self.sinr_targets):
            problems.append("sinr_target_db: linear targets must be finite and >= 0")
        if not 0 < self.c0 < 1:
            problems.append(f"c0: must satisfy 0 < c0 < 1, got {self.c0}")
        if self.dist_max < self.dist_min:
            problems.append("dist_max_m: must be >= dist_min_m")
        if not 0 < self.pgd_shrink < 1:
            problems.append("pgd_shrink: must satisfy 0 < shrink < 1")
        if self.pgd_max_backtracks < 0:
            problems.append("pgd_max_backtracks: must be >= 0")
        if self.pgd_step0 is not None and not self.pgd_step0 > 0:
            problems.append("pgd_step0: must be > 0")
        if not self.pgd_armijo_c > 0:
            problems.append("pgd_armijo_c: must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed: must be a 64-bit unsigned integer")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def sinr_targets_array(self) -> np.ndarray:
        return np.asarray(self.sinr_targets, dtype=float)

    def with_updates(self, **updates) -> "ScenarioConfig":
        """Re-validated copy with some fields replaced."""
        data = self.model_dump()
        if "num_users" in updates and "sinr_targets" not in updates:
            # keep a scalar target when K changes
            data["sinr_targets"] = [self.sinr_targets[0]]
        data.update(updates)
        return ScenarioConfig(**data)


# config key -> (field name, converter)
def _parse_sinr_db(raw: str) -> List[float]:
    text = str(raw).strip().strip("[]")
    values = [float(part) for part in text.replace(";", ",").split(",") if part.strip()]
    return [float(db_to_linear(v)) for v in values]


def _parse_bool(raw: str) -> bool:
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


CONFIG_KEYS = {
    "k_users": ("num_users", int),
    "n_antennas": ("num_antennas", int),
    "wavelength_m": ("wavelength", float),
    "aperture_lambda": ("aperture", None),
    "tx_power_dbm": ("transmit_power", lambda v: float(dbm_to_watts(float(v)))),
    "noise_dbm": ("noise_power", lambda v: float(dbm_to_watts(float(v)))),
    "sinr_target_db": ("sinr_targets", _parse_sinr_db),
    "target_angle_deg": ("target_angle", lambda v: math.radians(float(v))),
    "paths_per_user": ("paths_per_user", int),
    "pathloss_ref_db": ("pathloss_ref", lambda v: float(db_to_linear(float(v)))),
    "pathloss_exp": ("pathloss_exp", float),
    "dist_min_m": ("dist_min", float),
    "dist_max_m": ("dist_max", float),
    "rho0": ("rho0", float),
    "c0": ("c0", float),
    "max_outer": ("max_outer", int),
    "max_inner": ("max_inner", int),
    "delta_in": ("delta_in", float),
    "delta_out": ("delta_out", float),
    "pgd_step0": ("pgd_step0", float),
    "pgd_shrink": ("pgd_shrink", float),
    "pgd_max_backtracks": ("pgd_max_backtracks", int),
    "pgd_max_iters": ("pgd_max_iters", int),
    "pgd_armijo_c": ("pgd_armijo_c", float),
    "sdp_tol": ("sdp_tol", float),
    "sdp_solver": ("sdp_solver", lambda v: str(v).strip().upper()),
    "rank_one_tol": ("rank_one_tol", float),
    "init_scheme": ("init_scheme", lambda v: str(v).strip()),
    "fa_center": ("fa_center", _parse_bool),
    "optimize_positions": ("optimize_positions", _parse_bool),
    "restarts": ("restarts", int),
    "seed": ("seed", int),
}

FIELD_TO_KEY = {field_name: key for key, (field_name, _) in CONFIG_KEYS.items()}


def config_from_mapping(raw: Mapping[str, Any]) -> ScenarioConfig:
    """
    Build a validated ScenarioConfig from config-file keys.

    Args:
        raw: Mapping of config key -> raw value (strings or numbers)

    Returns:
        ScenarioConfig in linear units

    Raises:
        ConfigError: Listing every unknown key, unparsable value and violated invariant
    """
    errors = []
    data: Dict[str, Any] = {}
    for key, value in raw.items():
        key = key.strip()
        if key not in CONFIG_KEYS:
            errors.append(f"{key}: unknown config key")
            continue
        if value is None:
            errors.append(f"{key}: malformed line (expected key=value)")
            continue
        field_name, convert = CONFIG_KEYS[key]
        if key == "aperture_lambda":
            continue
        try:
            data[field_name] = convert(value)
        except (TypeError, ValueError) as e:
            errors.append(f"{key}: cannot parse {value!r} ({e})")

    if "aperture_lambda" in raw and raw["aperture_lambda"] is not None:
        try:
            data["aperture"] = float(raw["aperture_lambda"]) * data.get("wavelength", ScenarioConfig.model_fields["wavelength"].default)
        except (TypeError, ValueError) as e:
            errors.append(f"aperture_lambda: cannot parse {raw['aperture_lambda']!r} ({e})")
    elif "aperture" not in data:
        data["aperture"] = 15.0 * data.get("wavelength", ScenarioConfig.model_fields["wavelength"].default)

    if errors:
        raise ConfigError("Invalid configuration: " + "; ".join(errors))

    try:
        return ScenarioConfig(**data)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            loc = ".".join(str(part) for part in err.get("loc", ()))
            key = FIELD_TO_KEY.get(loc, loc)
            msg = err.get("msg", "")
            messages.append(f"{key}: {msg}" if key else msg)
        raise ConfigError("Invalid configuration: " + "; ".join(messages)) from e


def load_config(path: str) -> ScenarioConfig:
    """
    Load and validate a key=value configuration file.

    Args:
        path: Path to the config file

    Returns:
        ScenarioConfig with all dB/dBm fields converted to linear units

    Raises:
        ConfigError: Missing file, parse failure or invariant violation
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = dotenv_values(path)
    except Exception as e:
        raise ConfigError(f"Could not parse config file {path}: {str(e)}")
    return config_from_mapping(raw)


@dataclass(frozen=True)
class PathSet:
    """Multipath parameters of one user: complex gains, AoDs (rad) and distance (m)."""
    gains: np.ndarray
    angles: np.ndarray
    distance: float

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=complex)
        angles = np.asarray(self.angles, dtype=float)
        if gains.ndim != 1 or gains.size == 0 or gains.shape != angles.shape:
            raise ValueError("PathSet needs equal-length, non-empty gains and angles")
        if np.any(np.abs(angles) >= np.pi / 2):
            raise ValueError("path angles must lie in (-pi/2, pi/2)")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "angles", angles)

    @property
    def num_paths(self) -> int:
        return self.gains.size


@dataclass(frozen=True)
class Scenario:
    """One channel realization: config, raw and noise-normalized path sets."""
    config: ScenarioConfig
    realization_index: int
    raw_paths: Tuple[PathSet, ...]
    paths: Tuple[PathSet, ...]

    noise_power: float = 1.0

    def rng(self, stream: int, substream: int = 0) -> np.random.Generator:
        return realization_rng(self.config.seed, self.realization_index, stream, substream)

    def with_config(self, config: ScenarioConfig) -> "Scenario":
        """Same channels under a different (compatible) configuration."""
        return Scenario(config, self.realization_index, self.raw_paths,
                        normalize_by_noise(self.raw_paths[:config.num_users], config.noise_power))


def realization_rng(master_seed: int, realization_index: int, stream: int,
                    substream: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by (seed, realization, stream) so execution order never matters."""
    seq = np.random.SeedSequence(entropy=int(master_seed),
                                 spawn_key=(int(realization_index), int(stream), int(substream)))
    return np.random.default_rng(seq)


def draw_paths(config: ScenarioConfig, realization_index: int) -> Tuple[PathSet, ...]:
    """
    Draw user distances, AoDs and complex path gains for one realization.

    Per-path gains are CN(0, sigma0 * d_k^-alpha / L_k).
    """
    rng = realization_rng(config.seed, realization_index, STREAM_CHANNEL)
    lk = config.paths_per_user
    low = np.nextafter(-np.pi / 2, 0.0)
    path_sets = []
    for _ in range(config.num_users):
        distance = float(rng.uniform(config.dist_min, config.dist_max))
        angles = rng.uniform(low, np.pi / 2, lk)
        variance = config.pathloss_ref * distance ** (-config.pathloss_exp) / lk
        gains = np.sqrt(variance / 2) * (rng.standard_normal(lk) + 1j * rng.standard_normal(lk))
        path_sets.append(PathSet(gains=gains, angles=angles, distance=distance))
    return tuple(path_sets)


def normalize_by_noise(path_sets: Sequence[PathSet], noise_power: float) -> Tuple[PathSet, ...]:
    """Scale every gain by 1/sigma_c so downstream code works with unit noise power."""
    if noise_power <= 0:
        raise ValueError("noise_power must be > 0")
    scale = 1.0 / np.sqrt(noise_power)
    return tuple(PathSet(gains=p.gains * scale, angles=p.angles, distance=p.distance) for p in path_sets)


def draw_scenario(config: ScenarioConfig, realization_index: int) -> Scenario:
    """Deterministic in (config.seed, realization_index)."""
    raw = draw_paths(config, realization_index)
    return Scenario(config, realization_index, raw, normalize_by_noise(raw, config.noise_power))
