"""
Unit conversions between logarithmic and linear power scales.
"""
import numpy as np


def db_to_linear(value_db):
    """Convert a dB ratio (scalar or array) to a linear ratio."""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value, floor: float = 0.0):
    """
    Convert a linear ratio to dB.

    Args:
        value: Linear ratio (scalar or array)
        floor: Values at or below this are reported as -inf

    Returns:
        dB value(s); zero power maps to -inf rather than raising a warning
    """
    value = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.where(value > floor, value, 0.0))
    return out if out.ndim else float(out)


def dbm_to_watts(value_dbm):
    """30 dBm -> 1 W."""
    return np.power(10.0, (np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(value_w):
    return linear_to_db(value_w) + 30.0
