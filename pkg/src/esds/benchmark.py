"""Benchmark orchestration: the per-motion protocol and corpus-level runs.

For one motion: preprocess the demonstrations (translate to the goal,
velocities, downsample), fit the backend for every candidate mixture size,
size the tank from the data, reproduce each demonstration from its start
point, and keep the candidate with the smallest swept error area. Corpus
runs repeat this per motion (optionally in parallel), aggregate, and write
``report.json`` / ``report.csv`` plus per-motion artifacts.

Wall-clock training times are reported in ``report.csv`` and
``timings.json`` only; ``report.json`` stays byte-identical across repeated
runs of the same seeded configuration.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dynamics import StabilizedDS, integrate, lyapunov_audit, rollout_to_csv
from .gains import GainParams
from .metrics import (
    MetricsReport,
    per_demo_swept_error_area,
    per_demo_velocity_rmse,
    resample_equidistant,
)
from .regression import make_backend, save_model
from .training import (
    build_training_pairs,
    discover_motions,
    estimate_storage_cap,
    load_motion_corpus,
    preprocess,
)


@dataclass(frozen=True)
class RunConfig:
    """Settings for benchmark runs; mirrors the CLI flags."""

    corpus: str = "."
    out_dir: str | None = None
    backend: str = "gmr"
    k_candidates: tuple[int, ...] = (4, 5, 6, 7)
    demos_used: int = 3
    downsample_t: int = 100
    dt: float = 0.01
    conv_tol: float = 1e-3
    max_steps: int = 100_000
    storage_cap: float | None = None  # None: estimate from training data
    storage_scale: float = 1.0
    n_centers: int = 25
    seed: int = 0
    jobs: int = 1
    write_rollouts: bool = True
    write_plots: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_candidates", tuple(self.k_candidates))
        if not self.k_candidates:
            raise ValueError("k_candidates must not be empty")
        if self.demos_used < 1:
            raise ValueError("demos_used must be >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class MotionFailure:
    motion: str
    error: str


def _fit_candidate(config: RunConfig, pairs, k: int | None):
    """Fit one backend candidate, returning (model, wall-clock seconds)."""
    hyper = {}
    if config.backend == "gmr":
        hyper["n_components"] = k
    elif config.backend == "rbf":
        hyper["n_centers"] = config.n_centers
    model = make_backend(config.backend, seed=config.seed, **hyper)
    start = time.perf_counter()
    model.fit(pairs)
    return model, time.perf_counter() - start


def _reproductions(config: RunConfig, ds: StabilizedDS, demos):
    rollouts = [
        integrate(ds, demo.positions[0], dt=config.dt,
                  max_steps=config.max_steps, conv_tol=config.conv_tol)
        for demo in demos
    ]
    paths = [
        resample_equidistant(roll.states, len(demo.positions))
        for roll, demo in zip(rollouts, demos)
    ]
    return rollouts, paths


def run_motion(config: RunConfig, motion_dir) -> tuple[MetricsReport, dict]:
    """Benchmark one motion; returns the report and in-memory artifacts.

    The artifacts dict carries the winning model, its stabilized system,
    the preprocessed demonstrations, and the final rollouts, for callers
    that want to write files or plots.
    """
    corpus = load_motion_corpus(motion_dir)
    if not corpus.demos:
        raise ValueError(f"{corpus.name}: corpus has no demonstrations")
    demos = [
        preprocess(d, corpus.goal, config.downsample_t)
        for d in corpus.demos[: config.demos_used]
    ]
    params = GainParams()
    pairs = build_training_pairs(demos, params)

    candidates = config.k_candidates if config.backend == "gmr" else (None,)
    best = None
    for k in candidates:
        model, fit_time = _fit_candidate(config, pairs, k)
        if config.storage_cap is not None:
            cap = float(config.storage_cap)
        else:
            cap = estimate_storage_cap(demos, model, params)
        cap *= config.storage_scale
        ds = StabilizedDS(model=model, capacity=cap, params=params,
                          goal=np.zeros(pairs.dim), dim=pairs.dim)
        rollouts, paths = _reproductions(config, ds, demos)
        sea = per_demo_swept_error_area(
            [d.positions for d in demos], paths
        )
        if best is None or sea.sum() < best["sea"].sum():
            best = {"k": k, "model": model, "fit_time": fit_time, "cap": cap,
                    "ds": ds, "rollouts": rollouts, "sea": sea}

    vrmse = per_demo_velocity_rmse(demos, best["ds"])
    audits = [lyapunov_audit(r, best["ds"]) for r in best["rollouts"]]
    report = MetricsReport(
        motion=corpus.name,
        sea=float(best["sea"].sum()),
        vrmse=float(vrmse.sum()),
        per_demo_sea=tuple(float(v) for v in best["sea"]),
        per_demo_vrmse=tuple(float(v) for v in vrmse),
        converged=tuple(bool(r.converged) for r in best["rollouts"]),
        training_time=best["fit_time"],
        k_selected=best["k"],
        storage_cap=best["cap"],
        audit={
            "max_energy_jump": max(a.max_energy_jump for a in audits),
            "max_tank_violation": max(a.max_tank_violation for a in audits),
            "max_rate_gap": max(a.max_rate_gap for a in audits),
            "positive_rate_fraction": max(
                a.positive_rate_fraction for a in audits
            ),
        },
    )
    artifacts = {"model": best["model"], "ds": best["ds"], "demos": demos,
                 "rollouts": best["rollouts"]}
    return report, artifacts


def _write_motion_artifacts(config: RunConfig, report: MetricsReport,
                            artifacts: dict) -> None:
    if config.out_dir is None:
        return
    out = Path(config.out_dir)
    name = report.motion
    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    save_model(artifacts["model"], models_dir / f"{name}.json")
    if config.write_rollouts:
        roll_dir = out / "rollouts"
        roll_dir.mkdir(parents=True, exist_ok=True)
        for i, roll in enumerate(artifacts["rollouts"]):
            rollout_to_csv(roll, roll_dir / f"{name}_{i:02d}.csv")
    if config.write_plots:
        from .plotting import plot_motion_svg  # deferred: optional artifact

        plots_dir = out / "plots"
        plots_dir.mkdir(parents=True, exist_ok=True)
        plot_motion_svg(
            artifacts["demos"], artifacts["rollouts"], artifacts["ds"],
            plots_dir / f"{name}.svg",
        )


def _process_motion(config: RunConfig, motion_dir: str):
    """Worker wrapper: one motion's failure never aborts the corpus run."""
    try:
        report, artifacts = run_motion(config, motion_dir)
        _write_motion_artifacts(config, report, artifacts)
        return report
    except Exception as exc:  # noqa: BLE001 - isolation is the contract
        return MotionFailure(motion=Path(motion_dir).name,
                             error=f"{type(exc).__name__}: {exc}")


def _aggregate(values) -> dict:
    values = list(values)
    return {
        "mean": float(np.mean(values)),
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }


def run_corpus(config: RunConfig) -> dict:
    """Run every motion under the corpus root and write the reports."""
    motion_dirs = [str(p) for p in discover_motions(config.corpus)]
    if config.jobs > 1 and len(motion_dirs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_process_motion,
                                    [config] * len(motion_dirs), motion_dirs))
    else:
        results = [_process_motion(config, d) for d in motion_dirs]

    reports = sorted(
        (r for r in results if isinstance(r, MetricsReport)),
        key=lambda r: r.motion,
    )
    failures = sorted(
        (r for r in results if isinstance(r, MotionFailure)),
        key=lambda r: r.motion,
    )

    summary = {
        "config": _deterministic_config(config),
        "motions": [r.to_dict(include_timing=False) for r in reports],
        "failures": [{"motion": f.motion, "error": f.error} for f in failures],
    }
    if reports:
        summary["aggregate"] = {
            "sea": _aggregate(r.sea for r in reports),
            "vrmse": _aggregate(r.vrmse for r in reports),
        }
    timings = {r.motion: r.training_time for r in reports}

    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_bytes(_stable_json(summary))
        (out / "timings.json").write_text(
            json.dumps(
                {
                    "per_motion": timings,
                    "aggregate": _aggregate(timings.values()) if timings else {},
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
        _write_report_csv(out / "report.csv", reports)
    return summary


def _deterministic_config(config: RunConfig) -> dict:
    """Semantic fields only: execution details (output paths, worker count,
    artifact toggles) do not influence the results and are left out so
    equivalent runs serialize identically."""
    data = config.to_dict()
    data["k_candidates"] = list(config.k_candidates)
    for key in ("out_dir", "jobs", "write_rollouts", "write_plots"):
        data.pop(key)
    return data


def _stable_json(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write_report_csv(path, reports) -> None:
    """Per-motion rows plus mean/min/max summary rows."""
    lines = ["motion,sea_mm2,vrmse_mm_s,train_time_s,k_selected,converged,s_bar"]
    for r in reports:
        lines.append(
            f"{r.motion},{r.sea:.6g},{r.vrmse:.6g},{r.training_time:.6g},"
            f"{'' if r.k_selected is None else r.k_selected},"
            f"{all(r.converged)},{r.storage_cap:.6g}"
        )
    if reports:
        for stat, fn in (("mean", np.mean), ("min", np.min), ("max", np.max)):
            sea = fn([r.sea for r in reports])
            vr = fn([r.vrmse for r in reports])
            tt = fn([r.training_time for r in reports])
            lines.append(f"{stat},{sea:.6g},{vr:.6g},{tt:.6g},,,")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sweep_storage(config: RunConfig, motion_dir, cap_values) -> dict:
    """Reproduction accuracy of one motion across tank sizes.

    The backend is trained once (candidate selection uses the estimated
    cap); each requested cap value then only re-integrates the rollouts.
    """
    cap_values = [float(v) for v in cap_values]
    if not cap_values:
        raise ValueError("cap_values must not be empty")
    if any(v < 0 for v in cap_values):
        raise ValueError("cap values must be >= 0")
    base = replace(config, storage_cap=None, storage_scale=1.0)
    report, artifacts = run_motion(base, motion_dir)
    demos = artifacts["demos"]
    model = artifacts["model"]
    params = artifacts["ds"].params
    estimate = estimate_storage_cap(demos, model, params)

    rows = []
    for cap in cap_values:
        ds = replace(artifacts["ds"], capacity=cap)
        rollouts, paths = _reproductions(config, ds, demos)
        sea = per_demo_swept_error_area([d.positions for d in demos], paths)
        rows.append(
            {
                "storage_cap": cap,
                "sea": float(sea.sum()),
                "converged": all(r.converged for r in rollouts),
                "min_tank_cap_ratio": float(
                    min(_min_tank_ratio(r, ds) for r in rollouts)
                ),
            }
        )
    result = {
        "motion": report.motion,
        "k_selected": report.k_selected,
        "estimated_cap": estimate,
        "rows": rows,
    }
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_bytes(_stable_json(result))
        lines = ["s_bar,sea_mm2,converged,min_tank_cap_ratio"]
        lines += [
            f"{r['storage_cap']:.6g},{r['sea']:.6g},{r['converged']},"
            f"{r['min_tank_cap_ratio']:.6g}"
            for r in rows
        ]
        (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return result


def _min_tank_ratio(rollout, ds: StabilizedDS) -> float:
    """Smallest tank level relative to the local cap along a rollout."""
    if ds.capacity == 0:
        return 1.0
    ys = rollout.states - ds.goal
    sq = np.sum(ys * ys, axis=1)
    caps = (1.0 - np.exp(-ds.params.sharpness * sq)) * ds.capacity
    good = caps > 1e-12 * ds.capacity
    if not good.any():
        return 1.0
    return float((rollout.tank[good] / caps[good]).min())
