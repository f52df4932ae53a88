"""Reproduction-accuracy metrics for learned motions.

The swept error area sums, sample by sample, the quadrilateral areas
between a demonstrated curve and its reproduction (resampled to the same
number of points at equal arc-length spacing). The velocity RMSE compares
demonstrated velocities against the generator's velocity evaluated along
the demonstrated states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import StabilizedDS, init_tank, stabilized_velocity, tank_step
from .gains import radial_gate
from .training import Demonstration, _sample_dts


@dataclass(frozen=True)
class MetricsReport:
    """Per-motion benchmark outcome."""

    motion: str
    sea: float
    vrmse: float
    per_demo_sea: tuple[float, ...]
    per_demo_vrmse: tuple[float, ...]
    converged: tuple[bool, ...]
    training_time: float
    k_selected: int | None
    storage_cap: float
    audit: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "motion": self.motion,
            "sea": self.sea,
            "vrmse": self.vrmse,
            "per_demo_sea": list(self.per_demo_sea),
            "per_demo_vrmse": list(self.per_demo_vrmse),
            "converged": list(self.converged),
            "k_selected": self.k_selected,
            "storage_cap": self.storage_cap,
            "audit": dict(self.audit),
        }
        if include_timing:
            out["training_time"] = self.training_time
        return out


def resample_equidistant(states, count: int) -> np.ndarray:
    """Resample a polyline to ``count`` points at equal arc-length spacing.

    Endpoints are preserved; a zero-length path yields ``count`` copies of
    the single location.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("cannot resample an empty path")
    if count < 2:
        raise ValueError(f"resample target must be >= 2, got {count}")
    if states.shape[0] == 1:
        return np.tile(states[0], (count, 1))
    seg = np.linalg.norm(np.diff(states, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total == 0.0:
        return np.tile(states[0], (count, 1))
    targets = np.linspace(0.0, total, count)
    out = np.empty((count, states.shape[1]))
    for j in range(states.shape[1]):
        out[:, j] = np.interp(targets, arc, states[:, j])
    return out


def tetragon_area(e0, e1, d0, d1) -> float:
    """Area of the quadrilateral spanned by matched curve samples.

    Arguments are consecutive points (e0, e1) on the reproduced curve and
    (d0, d1) on the demonstrated one. The fixed traversal e0-e1-d1-d0 pairs
    the curves without crossing when they run locally parallel; the shoelace
    area is taken absolutely so degenerate quads cannot go negative.
    """
    pts = np.array([e0, e1, d1, d0], dtype=float)
    if pts.shape != (4, 2):
        raise ValueError("tetragon_area is defined for 2-D points")
    x, y = pts[:, 0], pts[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    return 0.5 * abs(float(cross.sum()))


def per_demo_swept_error_area(demo_paths, rollout_paths) -> np.ndarray:
    """Swept error area of each (demonstration, reproduction) pair."""
    demo_paths = list(demo_paths)
    rollout_paths = list(rollout_paths)
    if len(demo_paths) != len(rollout_paths):
        raise ValueError("need one reproduction per demonstration")
    areas = np.empty(len(demo_paths))
    for i, (demo, roll) in enumerate(zip(demo_paths, rollout_paths)):
        demo = np.asarray(demo, dtype=float)
        roll = np.asarray(roll, dtype=float)
        if demo.shape != roll.shape:
            raise ValueError(
                f"pair {i}: demo {demo.shape} vs reproduction {roll.shape}; "
                "resample the reproduction first"
            )
        areas[i] = sum(
            tetragon_area(roll[t], roll[t + 1], demo[t], demo[t + 1])
            for t in range(len(demo) - 1)
        )
    return areas


def swept_error_area(demo_paths, rollout_paths) -> float:
    """Total swept error area over all demonstrations."""
    return float(per_demo_swept_error_area(demo_paths, rollout_paths).sum())


def per_demo_velocity_rmse(demos, ds: StabilizedDS,
                           tank_active: bool = True) -> np.ndarray:
    """Velocity RMSE of the generator along each demonstration.

    The tank starts at its state-dependent initial level and is evolved
    along the demonstrated states using the demonstration's own timestamps
    and velocities. With ``tank_active=False`` the raw superposition
    (gain fixed at 1, no tank) is evaluated instead.
    """
    demos = list(demos)
    out = np.empty(len(demos))
    for i, demo in enumerate(demos):
        if demo.velocities is None:
            raise ValueError("demonstration is missing velocities")
        pos = demo.positions
        if tank_active:
            y0 = pos[0] - ds.goal
            tank = init_tank(y0, ds.capacity, ds.params)
            dts = _sample_dts(demo.times)
            err = 0.0
            for t in range(len(pos)):
                xdot, z, _ = stabilized_velocity(ds, pos[t], tank)
                err += float(np.sum((demo.velocities[t] - xdot) ** 2))
                if t < len(pos) - 1:
                    tank = tank_step(tank, pos[t] - ds.goal,
                                     demo.velocities[t], z, dts[t], ds.params)
            out[i] = np.sqrt(err / len(pos))
        else:
            ys = pos - ds.goal
            f_vals = np.atleast_2d(ds.model.predict(ys))
            gates = np.array(
                [radial_gate(float(np.linalg.norm(y)), ds.params.sharpness)
                 for y in ys]
            )
            pred = -ys + gates[:, None] * f_vals
            err = np.sum((demo.velocities - pred) ** 2, axis=1)
            out[i] = np.sqrt(float(err.mean()))
    return out


def velocity_rmse(demos, ds: StabilizedDS, tank_active: bool = True) -> float:
    """Sum of per-demonstration velocity RMSE values."""
    return float(per_demo_velocity_rmse(demos, ds, tank_active).sum())
