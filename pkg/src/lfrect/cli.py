"""Command-line interface.

Subcommands::

    simulate   draw one noisy correspondence set from a config
    estimate   relative pose from a correspondence CSV
    rectify    resample two light-field directories onto a common grid
    epi        slice an epipolar-plane image out of a light field
    bench      run a trial sweep and write the summary table

Exit codes: 0 success, 2 bad configuration or arguments, 3 generation
failure, 4 degenerate estimation geometry, 5 no rectified overlap.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import lfio
from .errors import (
    CollinearConstruction,
    ConfigError,
    CoplanarDegeneracy,
    DegenerateSpread,
    IllConditioned,
    LfRectError,
    NoOverlap,
    RankDeficient,
    ZeroBaseline,
)
from .pose import estimate_pose
from .rectify import build_rectified_setup
from .resample import extract_epi, plan_aligned_grid, render_aligned_sais
from .simulate import simulate_correspondences

log = logging.getLogger("lfrect")

# Estimation can fail for geometric rather than configuration reasons;
# these all signal "this input cannot determine a pose".
_DEGENERATE = (
    CoplanarDegeneracy,
    RankDeficient,
    IllConditioned,
    ZeroBaseline,
    CollinearConstruction,
    DegenerateSpread,
)


def _cmd_simulate(args) -> int:
    cfg = lfio.load_sim_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    rng = np.random.default_rng(cfg.seed + args.trial)
    corr = simulate_correspondences(cfg, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lfio.write_correspondence_csv(out / "correspondences.csv", corr)
    lfio.save_intrinsics(out / "intrinsics1.json", cfg.k1)
    lfio.save_intrinsics(out / "intrinsics2.json", cfg.k2)
    lfio.save_pose(out / "ground_truth.json", cfg.pose)
    log.info("simulated %d correspondences at sigma=%g px", len(corr), cfg.sigma_px)
    print(f"wrote {len(corr)} correspondences to {out}")
    return 0


def _cmd_estimate(args) -> int:
    k1 = lfio.load_intrinsics(args.intrinsics1)
    k2 = lfio.load_intrinsics(args.intrinsics2)
    corr = lfio.read_correspondence_csv(args.points, k1, k2)
    result = estimate_pose(corr, refine=not args.no_refine)
    doc = result.pose.to_json_dict()
    doc.update(
        {
            "initial_cost": result.initial_cost,
            "final_cost": result.final_cost,
            "iterations": result.iterations,
            "converged": bool(result.converged),
            "refined": bool(result.refined),
            "singular_values": [float(s) for s in result.linear.singular_values],
        }
    )
    lfio.save_json(args.out, doc)
    print(
        f"estimated pose from {len(corr)} correspondences: "
        f"cost {result.initial_cost:.6g} -> {result.final_cost:.6g} "
        f"in {result.iterations} iterations"
    )
    return 0


def _cmd_rectify(args) -> int:
    pose = lfio.load_pose(args.pose)
    if args.pose_direction == "1to2":
        # The estimator reports camera-1 -> camera-2; rectification wants
        # the map from camera-2 coordinates back into camera 1.
        pose = pose.inverse()
    setup = build_rectified_setup(pose)
    left, _ = lfio.load_sampled_lf(args.left)
    right, _ = lfio.load_sampled_lf(args.right)
    grid = plan_aligned_grid(left, right, setup)
    out_lf = render_aligned_sais(left, right, setup, grid)
    out = Path(args.out)
    lfio.save_sampled_lf(out, out_lf, grid)
    lfio.save_setup(out / "setup.json", setup)
    n_both = int(np.sum(grid.provenance == 3))
    print(
        f"rectified onto {grid.rows_mm.size}x{grid.cols_mm.size} grid "
        f"(baseline {setup.baseline_mm:.3f} mm, {n_both} shared sub-apertures)"
    )
    return 0


def _cmd_epi(args) -> int:
    lf, _ = lfio.load_sampled_lf(args.sais)
    epi = extract_epi(lf, row=args.row, line=args.line)
    out = Path(args.out)
    lfio.write_pgm16(out, epi.image)
    lfio.write_pbm(out.with_suffix(".pbm"), epi.mask)
    print(f"wrote {epi.image.shape[0]}x{epi.image.shape[1]} EPI to {out}")
    return 0


def _cmd_bench(args) -> int:
    if args.spec is not None:
        spec = bench_mod.parse_bench_spec(lfio.load_json(args.spec), source=str(args.spec))
        if args.trials is not None:
            spec = dataclasses.replace(spec, trials=args.trials)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
    else:
        trials = 100 if args.trials is None else args.trials
        seed = 0 if args.seed is None else args.seed
        if args.scenario == "noise-sweep":
            spec = bench_mod.noise_sweep_spec(trials=trials, seed=seed)
        else:
            spec = bench_mod.pose_grid_spec(trials=trials, seed=seed)
    log.info("running %s: %d rows x %d trials", spec.name, len(spec.rows), spec.trials)
    result = bench_mod.run_bench(spec, jobs=args.jobs)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(bench_mod.bench_csv_lines(result)) + "\n")
    out.with_suffix(".dat").write_text("\n".join(bench_mod.bench_dat_lines(result)) + "\n")
    for row, rep in zip(spec.rows, result.reports):
        print(
            f"{spec.name} {row.label}: err_R {rep.mean_err_R:.4f} deg, "
            f"err_T {rep.mean_err_T:.4f} deg ({rep.n_failures} failures)"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfrect", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="draw a noisy correspondence set")
    ps.add_argument("--config", required=True, help="simulation config JSON")
    ps.add_argument("--out", required=True, help="output directory")
    ps.add_argument("--seed", type=int, default=None, help="override the config seed")
    ps.add_argument("--trial", type=int, default=0, help="which trial's noise draw")
    ps.set_defaults(func=_cmd_simulate)

    pe = sub.add_parser("estimate", help="estimate a relative pose")
    pe.add_argument("--points", required=True, help="correspondence CSV")
    pe.add_argument("--intrinsics1", required=True)
    pe.add_argument("--intrinsics2", required=True)
    pe.add_argument("--out", required=True, help="output pose JSON")
    pe.add_argument("--no-refine", action="store_true", help="linear solution only")
    pe.set_defaults(func=_cmd_estimate)

    pr = sub.add_parser("rectify", help="resample two light fields onto a common grid")
    pr.add_argument("--pose", required=True, help="pose JSON")
    pr.add_argument(
        "--pose-direction",
        choices=("1to2", "2to1"),
        default="1to2",
        help="direction of the pose file (estimator output is 1to2; default)",
    )
    pr.add_argument("--left", required=True, help="camera-1 light-field directory")
    pr.add_argument("--right", required=True, help="camera-2 light-field directory")
    pr.add_argument("--out", required=True, help="output directory")
    pr.set_defaults(func=_cmd_rectify)

    pp = sub.add_parser("epi", help="extract an epipolar-plane image")
    pp.add_argument("--sais", required=True, help="light-field directory")
    pp.add_argument("--row", type=int, required=True, help="sub-aperture grid row")
    pp.add_argument("--line", type=int, required=True, help="image scan line")
    pp.add_argument("--out", required=True, help="output PGM path")
    pp.set_defaults(func=_cmd_epi)

    pb = sub.add_parser("bench", help="run a benchmark sweep")
    group = pb.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", choices=("noise-sweep", "pose-grid"))
    group.add_argument("--spec", help="custom sweep JSON")
    pb.add_argument("--trials", type=int, default=None)
    pb.add_argument("--seed", type=int, default=None)
    pb.add_argument("--jobs", type=int, default=1, help="worker processes")
    pb.add_argument("--out", required=True, help="output CSV (a .dat twin is written too)")
    pb.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NoOverlap as e:
        print(f"error: no overlap after rectification: {e}", file=sys.stderr)
        for key, val in (e.diagnostics or {}).items():
            print(f"  {key}: {val}", file=sys.stderr)
        return 5
    except _DEGENERATE as e:
        print(f"error: degenerate geometry: {type(e).__name__}: {e}", file=sys.stderr)
        report = getattr(e, "report", None)
        if report is not None:
            print(
                f"  plane residual {report.residual_rms:.6g} mm over scene "
                f"diameter {report.scene_diameter:.6g} mm",
                file=sys.stderr,
            )
        return 4
    except LfRectError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
