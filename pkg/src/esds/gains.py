"""Smooth scalar gains that gate the energy tank and the learned field.

All functions here are pure maps of their arguments. The caller computes the
current storage cap ``radial_gate(||x||) * s_bar`` and passes it in, which
keeps these reusable in both the integrator and the Lyapunov audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GainParams:
    """Parameters shared by the gate and gain functions.

    sharpness   steepness of the radial gate, units 1/length^2
    power_band  smoothing half-width around zero power, power units
    lo_frac     lower tank band, as a fraction of the current cap
    hi_frac     upper tank band, as a fraction of the current cap
    charge_max  strict upper bound < 1 on the charge gain
    """

    sharpness: float = 0.1
    power_band: float = 0.01
    lo_frac: float = 0.1
    hi_frac: float = 0.9
    charge_max: float = 0.99

    def __post_init__(self) -> None:
        if self.sharpness <= 0:
            raise ValueError(f"sharpness must be > 0, got {self.sharpness}")
        if self.power_band <= 0:
            raise ValueError(f"power_band must be > 0, got {self.power_band}")
        if not 0 < self.lo_frac < self.hi_frac < 1:
            raise ValueError(
                f"need 0 < lo_frac < hi_frac < 1, got {self.lo_frac}, {self.hi_frac}"
            )
        if not 0 < self.charge_max < 1:
            raise ValueError(f"charge_max must be in (0, 1), got {self.charge_max}")


def smooth_step(x: float, lo: float, hi: float) -> float:
    """Sinusoidal step: 0 below lo, 1 above hi, C1 in between."""
    if lo >= hi:
        raise ValueError(f"smooth_step needs lo < hi, got lo={lo}, hi={hi}")
    if x >= hi:
        return 1.0
    if x <= lo:
        return 0.0
    return 0.5 * (1.0 + math.sin(math.pi * ((x - lo) / (hi - lo) - 0.5)))


def smooth_step_down(x: float, lo: float, hi: float) -> float:
    """Complement of smooth_step: 1 below lo, 0 above hi."""
    return 1.0 - smooth_step(x, lo, hi)


def radial_gate(r: float, sharpness: float = 0.1) -> float:
    """Gate 1 - exp(-sharpness * r^2): zero at the goal, saturating to 1."""
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    # expm1 keeps the gate positive (~sharpness * r^2) for tiny nonzero r
    return -math.expm1(-sharpness * r * r)


def gate_reciprocal(r: float, sharpness: float = 0.1) -> float:
    """Reciprocal of the radial gate, defined as 1 at r = 0.

    The r = 0 branch keeps the training transform free of divisions by zero;
    velocities vanish at the goal, so the choice there is immaterial.
    """
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    if r == 0.0:
        return 1.0
    return 1.0 / radial_gate(r, sharpness)


def gate_rate(x: np.ndarray, xdot: np.ndarray, sharpness: float = 0.1) -> float:
    """Time derivative of radial_gate(||x||) along a velocity xdot."""
    x = np.asarray(x, dtype=float)
    sq = float(np.dot(x, x))
    return 2.0 * sharpness * math.exp(-sharpness * sq) * float(np.dot(x, xdot))


def field_power(x: np.ndarray, f_val: np.ndarray, sharpness: float = 0.1) -> float:
    """Power the gated field injects: radial_gate(||x||) * x . f_val.

    Positive values extract energy from the tank, negative values recharge it.
    """
    x = np.asarray(x, dtype=float)
    f_val = np.asarray(f_val, dtype=float)
    if x.shape != f_val.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {f_val.shape}")
    return radial_gate(math.sqrt(float(np.dot(x, x))), sharpness) * float(
        np.dot(x, f_val)
    )


def charge_gain(s: float, cap: float, params: GainParams) -> float:
    """Gain on the ||x||^2 recharge term.

    Equals 0 at an empty or full tank and ramps to charge_max inside the
    (lo_frac, hi_frac) band of the cap. Always 0 for s >= cap, and held
    strictly below 1 so the quadratic drain always dominates the recharge.
    """
    if cap <= 0.0:
        return 0.0
    up = smooth_step(s, 0.0, params.lo_frac * cap)
    down = smooth_step_down(s, params.hi_frac * cap, cap)
    return min(params.charge_max, up * down)


def exchange_gain(z: float, s: float, cap: float, params: GainParams) -> float:
    """Gain on the energy exchange -z between field and tank.

    Vanishes when recharging a full tank (s >= cap, z <= -power_band) and
    when extracting from an empty one (s = 0, z >= 0); 1 in mid-band. The two
    suppression terms act on disjoint storage bands, so the result stays in
    [0, 1]. At cap = 0 both conditions bind at once and the gain is 0.
    """
    if cap <= 0.0:
        return 0.0
    empty_block = smooth_step(z, -params.power_band, 0.0) * smooth_step_down(
        s, 0.0, params.lo_frac * cap
    )
    full_block = smooth_step(s, params.hi_frac * cap, cap) * smooth_step_down(
        z, 0.0, params.power_band
    )
    return 1.0 - empty_block - full_block


def field_gain(z: float, s: float, cap: float, params: GainParams) -> float:
    """Gain multiplying the learned field in the stabilized dynamics.

    Fades the field out when energy is being extracted (z > 0) from a
    near-empty tank, and is 1 whenever z <= 0 or the storage is above the
    lower band. At cap = 0 the lower band degenerates to the point s = 0.
    """
    if cap <= 0.0:
        low = 1.0 if s <= 0.0 else 0.0
    else:
        low = smooth_step_down(s, 0.0, params.lo_frac * cap)
    return 1.0 - smooth_step(z, 0.0, params.power_band) * low
