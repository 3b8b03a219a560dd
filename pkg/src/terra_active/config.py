"""Experiment config files: a small TOML schema with strict validation.

Every key has a default, unknown keys are rejected, and the resolved config
can be emitted back to text such that re-parsing reproduces it exactly. One
base seed per arm drives all randomness; module-level seeds are derived by
stable hashing, so a config file plus the seeds list pins a run completely.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path as FilePath

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .labelling import LabellingConfig
from .mission import ExperimentConfig, LearnerConfig, WorldConfig
from .planning import PlannerConfig
from .world import Pose


class ConfigError(ValueError):
    """Config file problem: parse failure, unknown key, or invalid value."""


def _as_int(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    return value


def _as_float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    return float(value)


def _as_str(section: str, key: str, value) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string, got {value!r}")
    return value


def _as_bool(section: str, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"[{section}] {key} must be a boolean, got {value!r}")
    return value


def _as_int_list(section: str, key: str, value) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"[{section}] {key} must be a non-empty list of integers")
    return tuple(_as_int(section, key, v) for v in value)


def _as_pose_list(section: str, key: str, value) -> tuple[Pose, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"[{section}] {key} must be a non-empty list of [x, y] pairs")
    poses = []
    for item in value:
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"[{section}] {key} entries must be [x, y] pairs, got {item!r}")
        poses.append(Pose(_as_float(section, key, item[0]), _as_float(section, key, item[1])))
    return tuple(poses)


class _Section:
    """One config table with typed pops; leftovers are unknown keys."""

    def __init__(self, name: str, table: dict):
        self.name = name
        self.table = dict(table)

    def take(self, key: str, coerce, default):
        if key not in self.table:
            return default
        return coerce(self.name, key, self.table.pop(key))

    def finish(self) -> None:
        if self.table:
            raise ConfigError(f"unknown key(s) in [{self.name}]: {sorted(self.table)}")


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    known_sections = {"experiment", "world", "learner", "labelling", "planner"}
    unknown = set(raw) - known_sections
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    exp = _Section("experiment", raw.get("experiment", {}))
    wld = _Section("world", raw.get("world", {}))
    lrn = _Section("learner", raw.get("learner", {}))
    lab = _Section("labelling", raw.get("labelling", {}))
    pln = _Section("planner", raw.get("planner", {}))

    exp_defaults = ExperimentConfig()
    world_defaults = WorldConfig()
    learner_defaults = LearnerConfig()
    lab_defaults = LabellingConfig()
    pln_defaults = PlannerConfig()

    try:
        world = WorldConfig(
            seed=wld.take("seed", _as_int, world_defaults.seed),
            width_cells=wld.take("width_cells", _as_int, world_defaults.width_cells),
            height_cells=wld.take("height_cells", _as_int, world_defaults.height_cells),
            num_classes=wld.take("num_classes", _as_int, world_defaults.num_classes),
            blob_scale=wld.take("blob_scale", _as_int, world_defaults.blob_scale),
            cell_size=wld.take("cell_size", _as_float, world_defaults.cell_size),
            feature_dim=wld.take("feature_dim", _as_int, 0) or None,
            noise_sigma=wld.take("noise_sigma", _as_float, world_defaults.noise_sigma),
            class_separation=wld.take(
                "class_separation", _as_float, world_defaults.class_separation
            ),
            label_raster=wld.take("label_raster", _as_str, "") or None,
        )
        learner = LearnerConfig(
            n_seed=lrn.take("n_seed", _as_int, learner_defaults.n_seed),
            w_pseudo=lrn.take("w_pseudo", _as_float, learner_defaults.w_pseudo),
            variance_floor=lrn.take(
                "variance_floor", _as_float, learner_defaults.variance_floor
            ),
            prior_smoothing=lrn.take(
                "prior_smoothing", _as_float, learner_defaults.prior_smoothing
            ),
        )
        labelling = LabellingConfig(
            alpha=lab.take("alpha", _as_int, lab_defaults.alpha),
            beta_percent=lab.take("beta_percent", _as_float, lab_defaults.beta_percent),
            impurity_radius=lab.take("impurity_radius", _as_int, lab_defaults.impurity_radius),
        )
        planner = PlannerConfig(
            side_cells=pln.take("side_cells", _as_int, pln_defaults.side_cells),
            exploration_bonus=pln.take(
                "exploration_bonus", _as_float, pln_defaults.exploration_bonus
            ),
            speed=pln.take("speed", _as_float, pln_defaults.speed),
            measure_time=pln.take("measure_time", _as_float, pln_defaults.measure_time),
            candidate_grid_step=pln.take(
                "candidate_grid_step", _as_int, pln_defaults.candidate_grid_step
            ),
            horizon=pln.take("horizon", _as_int, pln_defaults.horizon),
            mcts_iterations=pln.take("mcts_iterations", _as_int, pln_defaults.mcts_iterations),
            mcts_uct_constant=pln.take(
                "mcts_uct_constant", _as_float, pln_defaults.mcts_uct_constant
            ),
            rollout_depth=pln.take("rollout_depth", _as_int, pln_defaults.rollout_depth),
            local_step=pln.take("local_step", _as_float, pln_defaults.local_step),
            frontier_cost_normalized=pln.take(
                "frontier_cost_normalized", _as_bool, pln_defaults.frontier_cost_normalized
            ),
        )
        config = ExperimentConfig(
            num_missions=exp.take("num_missions", _as_int, exp_defaults.num_missions),
            budget_seconds=exp.take("budget_seconds", _as_float, exp_defaults.budget_seconds),
            supervision_mode=exp.take(
                "supervision_mode", _as_str, exp_defaults.supervision_mode
            ),
            planner_kind=exp.take("planner", _as_str, exp_defaults.planner_kind),
            start_poses=exp.take("start_poses", _as_pose_list, exp_defaults.start_poses),
            seeds=exp.take("seeds", _as_int_list, exp_defaults.seeds),
            world=world,
            learner=learner,
            labelling=labelling,
            planner=planner,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    for section in (exp, wld, lrn, lab, pln):
        section.finish()
    return config


def parse_config(path: str | FilePath) -> ExperimentConfig:
    path = FilePath(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        return text if ("." in text or "e" in text or "inf" in text) else text + ".0"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot emit {value!r}")


def emit_config(config: ExperimentConfig) -> str:
    """Resolved config as TOML; parse_config_text(emit_config(c)) == c."""
    sections = {
        "experiment": {
            "num_missions": config.num_missions,
            "budget_seconds": float(config.budget_seconds),
            "supervision_mode": config.supervision_mode,
            "planner": config.planner_kind,
            "start_poses": [[float(p.x), float(p.y)] for p in config.start_poses],
            "seeds": list(config.seeds),
        },
        "world": {
            "seed": config.world.seed,
            "width_cells": config.world.width_cells,
            "height_cells": config.world.height_cells,
            "num_classes": config.world.num_classes,
            "blob_scale": config.world.blob_scale,
            "cell_size": float(config.world.cell_size),
            "feature_dim": config.world.feature_dim or 0,
            "noise_sigma": float(config.world.noise_sigma),
            "class_separation": float(config.world.class_separation),
            "label_raster": config.world.label_raster or "",
        },
        "learner": {
            "n_seed": config.learner.n_seed,
            "w_pseudo": float(config.learner.w_pseudo),
            "variance_floor": float(config.learner.variance_floor),
            "prior_smoothing": float(config.learner.prior_smoothing),
        },
        "labelling": {
            "alpha": config.labelling.alpha,
            "beta_percent": float(config.labelling.beta_percent),
            "impurity_radius": config.labelling.impurity_radius,
        },
        "planner": {
            "side_cells": config.planner.side_cells,
            "exploration_bonus": float(config.planner.exploration_bonus),
            "speed": float(config.planner.speed),
            "measure_time": float(config.planner.measure_time),
            "candidate_grid_step": config.planner.candidate_grid_step,
            "horizon": config.planner.horizon,
            "mcts_iterations": config.planner.mcts_iterations,
            "mcts_uct_constant": float(config.planner.mcts_uct_constant),
            "rollout_depth": config.planner.rollout_depth,
            "local_step": float(config.planner.local_step),
            "frontier_cost_normalized": config.planner.frontier_cost_normalized,
        },
    }
    lines = []
    for name, table in sections.items():
        lines.append(f"[{name}]")
        for key, value in table.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def apply_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    planner: str | None = None,
    mode: str | None = None,
) -> ExperimentConfig:
    """CLI flag overrides; --seed narrows the run to a single arm seed."""
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if planner is not None:
        config = replace(config, planner_kind=planner)
    if mode is not None:
        config = replace(config, supervision_mode=mode)
    return config
