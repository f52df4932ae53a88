"""Synthetic 2-D demonstration corpora (desk-scale stand-ins for recordings).

Each motion is an exact trajectory of a goal-convergent reference system:
a contraction toward the origin plus a gated swirl field that bends the
path into the requested shape. Velocities are stored analytically, so the
training transform reconstructs them exactly and no samples sit awkwardly
close to the goal. Optional seeded position noise is smooth and vanishes
at both endpoints.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .gains import radial_gate
from .training import Demonstration, save_motion_corpus

SHAPES = ("line", "scurve", "arc")

_STARTS = {
    "line": (40.0, 30.0),
    "scurve": (45.0, 25.0),
    "arc": (40.0, 40.0),
}


def _swirl_rate(shape: str, r: float, scale: float) -> float:
    """Rotation rate of the reference field at radius r."""
    if shape == "line":
        return 0.0
    if shape == "scurve":
        return 1.5 * np.sin(2.0 * np.pi * r / scale)
    if shape == "arc":
        return 0.8
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def _reference_field(shape: str, x: np.ndarray, scale: float,
                     sharpness: float) -> np.ndarray:
    """Velocity of the reference system at state x."""
    r = float(np.linalg.norm(x))
    rot = _swirl_rate(shape, r, scale)
    swirl = rot * np.array([-x[1], x[0]])
    return -x + radial_gate(r, sharpness) * swirl


def make_demonstrations(shape: str, n_demos: int = 3, samples: int = 150,
                        noise: float = 0.0, seed: int = 0,
                        duration: float = 6.0, goal=(0.0, 0.0),
                        sharpness: float = 0.1) -> list[Demonstration]:
    """Generate goal-terminating demonstrations of one motion shape.

    All demonstrations share the shape's fixed start; the final sample sits
    exactly on the goal with zero velocity. ``noise`` perturbs interior
    positions only.
    """
    if samples < 10:
        raise ValueError(f"need at least 10 samples, got {samples}")
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
    rng = np.random.default_rng(seed)
    goal = np.asarray(goal, dtype=float)
    start = np.array(_STARTS[shape])
    scale = float(np.linalg.norm(start))

    # dense solve, then pick samples at roughly equal arc spacing so the
    # sampling matches how guided motions are usually recorded; the
    # exponential landing would otherwise hog most of the time grid
    fine_t = np.linspace(0.0, duration, samples * 30)
    sol = solve_ivp(
        lambda _, x: _reference_field(shape, x, scale, sharpness),
        (0.0, duration), start, t_eval=fine_t, rtol=1e-10, atol=1e-12,
    )
    fine_pos = sol.y.T
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(fine_pos, axis=0), axis=1))]
    )
    targets = np.linspace(0.0, arc[-1], samples)
    idx = np.searchsorted(arc, targets)
    idx[-1] = len(fine_t) - 1
    for i in range(1, samples):  # keep timestamps strictly increasing
        idx[i] = max(idx[i], idx[i - 1] + 1)
    t = fine_t[idx]
    pos = fine_pos[idx].copy()
    vel = np.array([_reference_field(shape, x, scale, sharpness) for x in pos])
    pos[-1] = 0.0  # exact terminal sample at the goal, at rest
    vel[-1] = 0.0

    demos = []
    for _ in range(n_demos):
        p = pos.copy()
        if noise > 0:
            u = targets / arc[-1]
            for dim in range(2):
                coeffs = rng.normal(scale=noise, size=3)
                for j, c in enumerate(coeffs, start=1):
                    p[:, dim] += (c / j) * np.sin(j * np.pi * u)
            p[0], p[-1] = pos[0], pos[-1]  # keep endpoints exact
        else:
            rng.normal(size=6)  # advance the stream identically
        demos.append(Demonstration(times=t, positions=p + goal,
                                   velocities=vel.copy()))
    return demos


def gen_synthetic(directory, shape: str, n_demos: int = 3, samples: int = 150,
                  noise: float = 0.0, seed: int = 0, duration: float = 6.0,
                  goal=(0.0, 0.0), name: str | None = None):
    """Write a synthetic motion corpus (CSV files + manifest) to disk."""
    demos = make_demonstrations(shape, n_demos=n_demos, samples=samples,
                                noise=noise, seed=seed, duration=duration,
                                goal=goal)
    return save_motion_corpus(directory, name or shape, demos, goal=goal)
