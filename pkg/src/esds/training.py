"""Demonstration ingestion, preprocessing, and training-data construction.

A demonstration is a timestamped sequence of positions (velocities optional
on ingest) of one guided motion. Preprocessing translates coordinates so the
attractor sits at the origin, fills in velocities by finite differences, and
downsamples to a fixed number of points. The transform in
:func:`build_training_pairs` turns demonstrations into supervised pairs for
the field regressors, and :func:`estimate_storage_cap` integrates the
worst-case extracted power to size the energy tank.

On disk a motion is a directory of per-demonstration CSV files
(``t,x1..xn[,v1..vn]``) plus a ``corpus.json`` manifest
``{"name", "dim", "goal", "files"}``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .gains import GainParams, gate_reciprocal, radial_gate
from .regression import TrainingSet

# final translated sample may sit this fraction of the arc length away from
# the origin before we warn that the motion does not end at the goal
GOAL_TOL_FRAC = 0.02


@dataclass(frozen=True)
class Demonstration:
    """One recorded motion: timestamps, positions, optional velocities.

    ``goal`` records the attractor that was subtracted from the raw
    positions; it stays ``None`` until :func:`translate_to_goal` runs.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None = None
    goal: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if self.velocities is not None:
            vel = np.atleast_2d(np.asarray(self.velocities, dtype=float))
            object.__setattr__(self, "velocities", vel)
        if self.goal is not None:
            object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))
        if times.ndim != 1 or len(times) != len(positions):
            raise ValueError("times and positions must have equal length")
        if len(times) < 2:
            raise ValueError("a demonstration needs at least 2 samples")
        if not np.all(np.diff(times) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.isfinite(positions).all():
            raise ValueError("positions contain non-finite entries")
        if self.velocities is not None and self.velocities.shape != positions.shape:
            raise ValueError("velocities must match positions in shape")

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return len(self.times)


def translate_to_goal(demo: Demonstration, goal: np.ndarray) -> Demonstration:
    """Shift positions so the attractor ``goal`` maps to the origin."""
    goal = np.asarray(goal, dtype=float)
    if not np.isfinite(goal).all():
        raise ValueError("goal must be finite")
    positions = demo.positions - goal
    seg = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    arc = float(seg.sum())
    tail = float(np.linalg.norm(positions[-1]))
    if arc > 0 and tail > GOAL_TOL_FRAC * arc:
        warnings.warn(
            f"final sample is {tail:.3g} from the goal "
            f"({tail / arc:.1%} of the arc length)",
            stacklevel=2,
        )
    return replace(demo, positions=positions, goal=goal)


def finite_diff_velocities(demo: Demonstration) -> Demonstration:
    """Fill in velocities by finite differences on the actual timestamps.

    Interior samples use the second-order central stencil, endpoints the
    one-sided one. A demonstration that already carries velocities is
    returned unchanged.
    """
    if demo.velocities is not None:
        return demo
    if len(demo) < 3:
        raise ValueError("need at least 3 samples to differentiate positions")
    vel = np.gradient(demo.positions, demo.times, axis=0)
    return replace(demo, velocities=vel)


def downsample(demo: Demonstration, count: int) -> Demonstration:
    """Keep ``count`` samples at equispaced indices, endpoints included."""
    if count < 2:
        raise ValueError(f"downsample target must be >= 2, got {count}")
    if count > len(demo):
        raise ValueError(f"cannot downsample {len(demo)} samples to {count}")
    idx = np.round(np.linspace(0, len(demo) - 1, count)).astype(int)
    vel = demo.velocities[idx] if demo.velocities is not None else None
    return replace(
        demo, times=demo.times[idx], positions=demo.positions[idx], velocities=vel
    )


def preprocess(
    demo: Demonstration,
    goal: np.ndarray | None = None,
    downsample_to: int | None = None,
) -> Demonstration:
    """Translate (once), differentiate if needed, then downsample.

    Idempotent: a demonstration that already carries its goal is not
    translated again, and downsampling to the current length is a no-op.
    """
    if demo.goal is None:
        demo = translate_to_goal(demo, goal if goal is not None else np.zeros(demo.dim))
    demo = finite_diff_velocities(demo)
    if downsample_to is not None and downsample_to < len(demo):
        demo = downsample(demo, downsample_to)
    return demo


def build_training_pairs(demos, params: GainParams) -> TrainingSet:
    """Convert demonstrations into supervised (state, field value) pairs.

    Each sample contributes the pair ``x -> (xdot + x) / gate(||x||)``; the
    reciprocal gate is 1 at the origin, where the numerator vanishes for
    goal-terminating motions.
    """
    demos = list(demos)
    if not demos:
        raise ValueError("no demonstrations given")
    inputs, targets = [], []
    for demo in demos:
        if demo.velocities is None:
            raise ValueError("demonstration is missing velocities; preprocess first")
        for x, v in zip(demo.positions, demo.velocities):
            recip = gate_reciprocal(float(np.linalg.norm(x)), params.sharpness)
            inputs.append(x)
            targets.append(recip * (v + x))
    return TrainingSet(np.array(inputs), np.array(targets))


def _sample_dts(times: np.ndarray) -> np.ndarray:
    """Per-sample integration weights: the following gap, repeated at the end."""
    gaps = np.diff(times)
    return np.append(gaps, gaps[-1])


def estimate_storage_cap(demos, model, params: GainParams) -> float:
    """Size the tank from the worst-case energy the field extracts.

    For every demonstration the positive part of the extracted power is
    integrated over time; the largest total across demonstrations is the
    cap. A field that only dissipates along the data yields 0.
    """
    demos = list(demos)
    if not demos:
        raise ValueError("no demonstrations given")
    worst = 0.0
    for demo in demos:
        pos = demo.positions
        f_vals = np.atleast_2d(model.predict(pos))
        gate = 1.0 - np.exp(-params.sharpness * np.sum(pos * pos, axis=1))
        power = gate * np.sum(pos * f_vals, axis=1)
        depleted = float(np.sum(np.maximum(power, 0.0) * _sample_dts(demo.times)))
        worst = max(worst, depleted)
    return worst


# --- on-disk corpus format ------------------------------------------------


@dataclass(frozen=True)
class MotionCorpus:
    """One motion's demonstrations plus manifest metadata (raw coordinates)."""

    name: str
    dim: int
    goal: np.ndarray
    demos: tuple[Demonstration, ...]


def save_demonstration_csv(demo: Demonstration, path) -> None:
    n = demo.dim
    cols = ["t"] + [f"x{i + 1}" for i in range(n)]
    data = [demo.times[:, None], demo.positions]
    if demo.velocities is not None:
        cols += [f"v{i + 1}" for i in range(n)]
        data.append(demo.velocities)
    body = np.hstack(data)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in body:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_demonstration_csv(path) -> Demonstration:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t":
        raise ValueError(f"{path}: expected header starting with 't'")
    n = sum(1 for c in header if c.startswith("x"))
    n_vel = sum(1 for c in header if c.startswith("v"))
    if n == 0 or len(header) != 1 + n + n_vel or n_vel not in (0, n):
        raise ValueError(f"{path}: malformed header {header}")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if body.shape[1] != len(header):
        raise ValueError(f"{path}: row width does not match header")
    vel = body[:, 1 + n : 1 + 2 * n] if n_vel else None
    return Demonstration(times=body[:, 0], positions=body[:, 1 : 1 + n],
                         velocities=vel)


def save_motion_corpus(directory, name: str, demos, goal) -> Path:
    """Write demonstrations and the corpus.json manifest into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, demo in enumerate(demos):
        fname = f"demo_{i:02d}.csv"
        save_demonstration_csv(demo, directory / fname)
        files.append(fname)
    manifest = {
        "name": name,
        "dim": int(demos[0].dim),
        "goal": [float(g) for g in np.asarray(goal, dtype=float)],
        "files": files,
    }
    (directory / "corpus.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return directory


def load_motion_corpus(directory) -> MotionCorpus:
    directory = Path(directory)
    manifest = json.loads((directory / "corpus.json").read_text(encoding="utf-8"))
    demos = tuple(
        load_demonstration_csv(directory / fname) for fname in manifest["files"]
    )
    goal = np.asarray(manifest["goal"], dtype=float)
    dim = int(manifest["dim"])
    for demo in demos:
        if demo.dim != dim:
            raise ValueError(
                f"{directory}: demo dimension {demo.dim} != manifest dim {dim}"
            )
    return MotionCorpus(name=manifest["name"], dim=dim, goal=goal, demos=demos)


def discover_motions(root) -> list[Path]:
    """Motion directories under ``root``: itself, or sorted subdirectories."""
    root = Path(root)
    if (root / "corpus.json").exists():
        return [root]
    found = sorted(p.parent for p in root.glob("*/corpus.json"))
    if not found:
        raise FileNotFoundError(f"no corpus.json found under {root}")
    return found
