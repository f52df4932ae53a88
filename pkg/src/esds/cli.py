"""Command line interface.

Subcommands:
    run    benchmark every motion in a corpus, write reports and plots
    sweep  reproduction accuracy of one motion across tank sizes
    synth  generate a synthetic demonstration corpus
    plot   render one motion (demonstrations, reproductions, field) as SVG

Flags mirror :class:`esds.benchmark.RunConfig`; ``--config`` loads the same
fields from JSON, with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmark import RunConfig, run_corpus, run_motion, sweep_storage
from .dynamics import StabilizedDS, integrate
from .gains import GainParams
from .regression import load_model
from .synthetic import SHAPES, gen_synthetic
from .training import (
    discover_motions,
    estimate_storage_cap,
    load_motion_corpus,
    preprocess,
)

_DEFAULTS = RunConfig()


def _add_run_flags(p: argparse.ArgumentParser, with_out: bool = True) -> None:
    p.add_argument("--corpus", help="corpus root or single motion directory")
    if with_out:
        p.add_argument("--out", dest="out_dir",
                       help="output directory for reports")
    p.add_argument("--backend", choices=("gmr", "rbf", "gp"),
                   help=f"regression backend (default: {_DEFAULTS.backend})")
    p.add_argument("--k", dest="k_candidates", type=int, nargs="+",
                   metavar="K",
                   help="mixture-size candidates for the gmr backend "
                        f"(default: {' '.join(map(str, _DEFAULTS.k_candidates))})")
    p.add_argument("--demos", dest="demos_used", type=int,
                   help=f"demonstrations used per motion (default: {_DEFAULTS.demos_used})")
    p.add_argument("--downsample", dest="downsample_t", type=int,
                   help=f"samples kept per demonstration (default: {_DEFAULTS.downsample_t})")
    p.add_argument("--dt", type=float,
                   help=f"integration step in seconds (default: {_DEFAULTS.dt})")
    p.add_argument("--conv-tol", dest="conv_tol", type=float,
                   help=f"goal distance ending a rollout (default: {_DEFAULTS.conv_tol})")
    p.add_argument("--max-steps", dest="max_steps", type=int,
                   help=f"rollout step cap (default: {_DEFAULTS.max_steps})")
    p.add_argument("--sbar", help="tank size: 'auto' estimates it from the "
                                  "training data (default), a number fixes it")
    p.add_argument("--sbar-scale", dest="storage_scale", type=float,
                   help="multiplier on the estimated tank size (default: 1.0)")
    p.add_argument("--centers", dest="n_centers", type=int,
                   help=f"centers for the rbf backend (default: {_DEFAULTS.n_centers})")
    p.add_argument("--seed", type=int,
                   help=f"seed for backend initialization (default: {_DEFAULTS.seed})")
    p.add_argument("--jobs", type=int,
                   help="parallel worker processes across motions (default: 1)")
    p.add_argument("--no-rollouts", action="store_const", const=True,
                   default=None, help="skip writing rollout CSV files")
    p.add_argument("--no-plots", action="store_const", const=True,
                   default=None, help="skip writing SVG plots")
    p.add_argument("--config", help="JSON file with RunConfig fields; "
                                    "explicit flags override it")


_FLAG_FIELDS = (
    "corpus", "out_dir", "backend", "k_candidates", "demos_used",
    "downsample_t", "dt", "conv_tol", "max_steps", "storage_scale",
    "n_centers", "seed", "jobs",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "sbar", None) is not None:
        data["storage_cap"] = None if args.sbar == "auto" else float(args.sbar)
    if getattr(args, "no_rollouts", None):
        data["write_rollouts"] = False
    if getattr(args, "no_plots", None):
        data["write_plots"] = False
    return RunConfig.from_dict(data)


def _resolve_motion_dir(config: RunConfig, motion: str | None) -> Path:
    dirs = discover_motions(config.corpus)
    if motion is not None:
        match = [d for d in dirs if d.name == motion]
        if not match:
            raise SystemExit(f"motion {motion!r} not found under {config.corpus}")
        return match[0]
    if len(dirs) > 1:
        names = ", ".join(d.name for d in dirs)
        raise SystemExit(f"corpus has several motions ({names}); pass --motion")
    return dirs[0]


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summary = run_corpus(config)
    for row in summary["motions"]:
        print(
            f"{row['motion']}: SEA={row['sea']:.4g} mm^2  "
            f"Vrmse={row['vrmse']:.4g} mm/s  K={row['k_selected']}  "
            f"converged={all(row['converged'])}"
        )
    for failure in summary["failures"]:
        print(f"{failure['motion']}: FAILED ({failure['error']})")
    if "aggregate" in summary:
        agg = summary["aggregate"]
        print(
            f"aggregate: SEA {agg['sea']['mean']:.4g} "
            f"[{agg['sea']['min']:.4g}-{agg['sea']['max']:.4g}] mm^2, "
            f"Vrmse {agg['vrmse']['mean']:.4g} "
            f"[{agg['vrmse']['min']:.4g}-{agg['vrmse']['max']:.4g}] mm/s"
        )
    if config.out_dir:
        print(f"reports written to {config.out_dir}")
    return 1 if summary["failures"] else 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    motion_dir = _resolve_motion_dir(config, args.motion)
    result = sweep_storage(config, motion_dir, args.sbar_values)
    print(f"{result['motion']}: estimated s_bar = {result['estimated_cap']:.6g}")
    for row in result["rows"]:
        print(
            f"  s_bar={row['storage_cap']:.6g}: SEA={row['sea']:.6g} mm^2 "
            f"converged={row['converged']}"
        )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out = gen_synthetic(
        args.out, args.shape, n_demos=args.demos, samples=args.samples,
        noise=args.noise, seed=args.seed, goal=tuple(args.goal),
        name=args.name,
    )
    print(f"corpus written to {out}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    from .plotting import plot_motion_svg

    config = _config_from_args(args)
    motion_dir = _resolve_motion_dir(config, args.motion)
    if args.model:
        corpus = load_motion_corpus(motion_dir)
        demos = [
            preprocess(d, corpus.goal, config.downsample_t)
            for d in corpus.demos[: config.demos_used]
        ]
        model = load_model(args.model)
        params = GainParams()
        cap = (
            float(config.storage_cap)
            if config.storage_cap is not None
            else estimate_storage_cap(demos, model, params)
        ) * config.storage_scale
        ds = StabilizedDS(model=model, capacity=cap, params=params,
                          goal=np.zeros(demos[0].dim), dim=demos[0].dim)
        rollouts = [
            integrate(ds, d.positions[0], dt=config.dt,
                      max_steps=config.max_steps, conv_tol=config.conv_tol)
            for d in demos
        ]
    else:
        _, artifacts = run_motion(config, motion_dir)
        demos, rollouts, ds = (
            artifacts["demos"], artifacts["rollouts"], artifacts["ds"],
        )
    plot_motion_svg(demos, rollouts, ds, args.out)
    print(f"plot written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esds",
        description="Learn goal-convergent motions from demonstrations and "
                    "benchmark their reproduction accuracy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="benchmark a corpus")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="SEA across tank sizes")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--motion", help="motion name inside the corpus root")
    p_sweep.add_argument("--sbar-values", dest="sbar_values", type=float,
                         nargs="+", required=True, metavar="S")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--shape", choices=SHAPES, required=True)
    p_synth.add_argument("--out", required=True, help="corpus directory")
    p_synth.add_argument("--demos", type=int, default=3)
    p_synth.add_argument("--samples", type=int, default=150)
    p_synth.add_argument("--noise", type=float, default=0.0,
                         help="smooth position noise amplitude, mm")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--goal", type=float, nargs=2, default=(0.0, 0.0))
    p_synth.add_argument("--name", default=None)
    p_synth.set_defaults(fn=cmd_synth)

    p_plot = sub.add_parser("plot", help="render one motion as SVG")
    _add_run_flags(p_plot, with_out=False)
    p_plot.add_argument("--motion", help="motion name inside the corpus root")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.add_argument("--model", help="cached model JSON instead of refitting")
    p_plot.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
