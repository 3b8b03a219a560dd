"""Command-line front end: experiment dispatch and artifact emission.

Subcommands:
  simulate            run one configured experiment
  compare-planners    sweep all five planners on one config
  compare-supervision run full/semi/self supervision with the frontier planner
  dump-map            export a saved run's map as CSV/PGM rasters

Every run directory receives a manifest, the resolved config echo, per-arm
metrics CSVs, a JSON summary, and per-arm final map snapshots for dump-map.
Set TERRA_ACTIVE_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path as FilePath

import numpy as np

from .config import ConfigError, apply_overrides, emit_config, parse_config
from .mapping import MultiLayerMap, dump_map
from .mission import ExperimentConfig, MissionLog, run_experiment, summarize
from .planning import PLANNER_KINDS
from .world import GridBounds

log = logging.getLogger("terra_active")

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("terra-active")
except Exception:  # running from a source tree without installation
    VERSION = "0.1.0+src"


def _setup_logging() -> None:
    level = os.environ.get("TERRA_ACTIVE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _write_manifest(
    out: FilePath, config_path: str | None, resolved: str, runtime: float | None
) -> None:
    manifest = {
        "config_path": config_path,
        "output_dir": str(out),
        "version": VERSION,
        "resolved_config": resolved,
        "runtime_seconds": runtime,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_map(path: FilePath, grid_map: MultiLayerMap) -> None:
    np.savez_compressed(
        path,
        semantic_logodds=grid_map.semantic_logodds,
        uncertainty_sum=grid_map.uncertainty_sum,
        uncertainty_count=grid_map.uncertainty_count,
        train_counts=grid_map.train_counts,
        explored=grid_map.explored,
        dims=np.array([grid_map.bounds.width_cells, grid_map.bounds.height_cells]),
        cell_size=np.array([grid_map.bounds.cell_size]),
        num_classes=np.array([grid_map.num_classes]),
    )


def _load_map(path: FilePath) -> MultiLayerMap:
    data = np.load(path)
    bounds = GridBounds(int(data["dims"][0]), int(data["dims"][1]), float(data["cell_size"][0]))
    grid_map = MultiLayerMap(bounds=bounds, num_classes=int(data["num_classes"][0]))
    grid_map.semantic_logodds = data["semantic_logodds"]
    grid_map.uncertainty_sum = data["uncertainty_sum"]
    grid_map.uncertainty_count = data["uncertainty_count"]
    grid_map.train_counts = data["train_counts"]
    grid_map.explored = data["explored"]
    return grid_map


def _run_tree(
    config: ExperimentConfig, out: FilePath, config_path: str | None, jobs: int
) -> list[MissionLog]:
    """Run one experiment and write its full artifact tree."""
    out.mkdir(parents=True, exist_ok=True)
    resolved = emit_config(config)
    _write_manifest(out, config_path, resolved, runtime=None)
    (out / "config.resolved.toml").write_text(resolved)

    started = time.monotonic()
    logs = run_experiment(config, out_dir=out, jobs=jobs)
    for arm_log in logs:
        if arm_log.final_map is not None:
            _save_map(out / f"map_arm{arm_log.arm_index:02d}.npz", arm_log.final_map)
    _write_manifest(out, config_path, resolved, runtime=time.monotonic() - started)
    return logs


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = parse_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(
        config,
        seed=getattr(args, "seed", None),
        planner=getattr(args, "planner", None),
        mode=getattr(args, "mode", None),
    )


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    logs = _run_tree(config, FilePath(args.out), args.config, args.jobs)
    final = summarize(logs)["final"]
    log.info("simulate finished: %s", final)
    print(f"final mIoU {final['miou_mean']:.4f}  accuracy {final['accuracy_mean']:.4f}")
    return 0


def _cmd_compare_planners(args: argparse.Namespace) -> int:
    base = _load_config(args)
    out = FilePath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comparison = {}
    for kind in PLANNER_KINDS:
        config = replace(base, planner_kind=kind)
        logs = _run_tree(config, out / kind, args.config, args.jobs)
        comparison[kind] = summarize(logs)["final"]
        print(f"{kind:>12s}: final mIoU {comparison[kind]['miou_mean']:.4f}")
    with open(out / "comparison.json", "w") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_compare_supervision(args: argparse.Namespace) -> int:
    base = replace(_load_config(args), planner_kind="frontier")
    out = FilePath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comparison = {}
    for mode in ("full", "semi", "self"):
        config = replace(base, supervision_mode=mode)
        logs = _run_tree(config, out / mode, args.config, args.jobs)
        comparison[mode] = summarize(logs)["final"]
        print(f"{mode:>5s}: final mIoU {comparison[mode]['miou_mean']:.4f}")
    with open(out / "comparison.json", "w") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_dump_map(args: argparse.Namespace) -> int:
    run_dir = FilePath(args.run)
    map_path = run_dir / f"map_arm{args.arm:02d}.npz"
    if not map_path.exists():
        raise ConfigError(f"no saved map for arm {args.arm} in {run_dir}")
    grid_map = _load_map(map_path)
    written = dump_map(grid_map, args.out or run_dir / f"map_arm{args.arm:02d}_rasters")
    print(f"wrote {len(written)} raster files to {written[0].parent}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="terra-active",
        description="Desk-scale adaptive terrain-monitoring mission simulator",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="TOML config file (defaults apply if omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the seed list with one seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel experiment arms")

    p_sim = sub.add_parser("simulate", help="run one configured experiment")
    add_run_flags(p_sim)
    p_sim.add_argument("--planner", choices=PLANNER_KINDS, help="override planner kind")
    p_sim.add_argument("--mode", choices=("full", "semi", "self"), help="override supervision")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cp = sub.add_parser("compare-planners", help="sweep the five planners")
    add_run_flags(p_cp)
    p_cp.set_defaults(func=_cmd_compare_planners)

    p_cs = sub.add_parser("compare-supervision", help="full vs semi vs self supervision")
    add_run_flags(p_cs)
    p_cs.set_defaults(func=_cmd_compare_supervision)

    p_dm = sub.add_parser("dump-map", help="export a saved map as rasters")
    p_dm.add_argument("--run", required=True, help="run directory holding map_arm*.npz")
    p_dm.add_argument("--arm", type=int, default=0, help="arm index to dump")
    p_dm.add_argument("--out", help="raster output directory")
    p_dm.set_defaults(func=_cmd_dump_map)
    return parser


def run(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
