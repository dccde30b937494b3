"""Run configuration: one TOML tree with a section per module.

Resolution order, lowest to highest: built-in defaults, the profile,
the config file, then command-line flags.  Flags address leaves with
dotted names, e.g. ``--solver.b_last 0.5`` or ``--scene.fog.beta 0.078``.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .pipeline import PipelineConfig
from .scenes import FOG_LEVELS, SceneSpec
from .tls import SolverConfig
from .transmission import DcpConfig

SECTIONS = ("scene", "dcp", "solver", "pipeline", "metrics")
TOP_LEVEL = ("profile", "seed", "threads")

# simulation: the synthetic study (no white balance, b_last = 0.5, sigma = 0.01)
# real-raw: camera data (b all ones, gray-world balance, gamma 1.25 for display)
PROFILES = {
    "simulation": {
        "solver": {"b_last": 0.5, "sigma": 0.01},
        "scene": {"noise": {"sigma": 0.01}},
        "pipeline": {"gamma": 1.0, "stages": ["demosaick", "defog"]},
    },
    "real-raw": {
        "solver": {"b_last": 1.0},
        "pipeline": {"gamma": 1.25, "stages": ["white_balance", "demosaick", "defog", "gamma"]},
    },
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsConfig:
    threshold: float = 0.05  # visible-edge contrast

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("metrics threshold must lie in (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    scene: SceneSpec = field(default_factory=SceneSpec)
    dcp: DcpConfig = field(default_factory=DcpConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    profile: str = "simulation"
    seed: int = 0
    threads: int = 1
    explicit: frozenset = field(default=frozenset(), compare=False)  # dotted keys set by file or flag

    def to_dict(self) -> dict:
        d = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        d.update(profile=self.profile, seed=self.seed, threads=self.threads)
        return json.loads(json.dumps(d))  # tuples -> lists


def _defaults() -> dict:
    return RunConfig().to_dict()


def _leaves(tree: dict, prefix: str = "") -> list[str]:
    out = []
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _leaves(v, key + ".")
        else:
            out.append(key)
    return out


def merge(base: dict, over: dict, path: str = "") -> dict:
    """Deep merge; keys unknown to `base` are config errors."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} is a section, not a value")
            out[k] = merge(out[k], v, where + ".")
        elif isinstance(v, dict):
            raise ConfigError(f"{where!r} is a value, not a section")
        else:
            out[k] = v
    return out


def parse_value(text: str):
    """Flag values: JSON literals, comma lists, or bare strings."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [parse_value(p.strip()) for p in text.split(",")]
    return text


def dotted_to_tree(pairs: dict) -> dict:
    tree: dict = {}
    for key, value in pairs.items():
        parts = key.split(".")
        node = tree
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"conflicting overrides at {key!r}")
        node[parts[-1]] = value
    return tree


def load_file(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _fog_beta(value):
    if isinstance(value, str):
        if value not in FOG_LEVELS:
            raise ConfigError(f"unknown fog level {value!r}; use one of {sorted(FOG_LEVELS)}")
        return FOG_LEVELS[value]
    return value


def _build(tree: dict, explicit: frozenset) -> RunConfig:
    try:
        sc = dict(tree["scene"])
        sc["fog"] = dict(sc["fog"], beta=_fog_beta(sc["fog"]["beta"]))
        pipe = dict(tree["pipeline"], stages=tuple(tree["pipeline"]["stages"]))
        return RunConfig(
            scene=SceneSpec.from_dict(sc),
            dcp=DcpConfig(**tree["dcp"]),
            solver=SolverConfig(**tree["solver"]),
            pipeline=PipelineConfig(**pipe),
            metrics=MetricsConfig(**tree["metrics"]),
            profile=tree["profile"],
            seed=int(tree["seed"]),
            threads=int(tree["threads"]),
            explicit=explicit,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def resolve(profile: str | None = None, file_tree: dict | None = None,
            flags: dict | None = None) -> RunConfig:
    """defaults < profile < file < flags.  `flags` maps dotted keys to values.

    The profile itself may come from the file or a flag; the seed is
    mirrored into scene.noise.seed unless that key is given directly.
    """
    file_tree = file_tree or {}
    flag_tree = dotted_to_tree(flags or {})
    name = profile or flag_tree.get("profile") or file_tree.get("profile") or "simulation"
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; use one of {sorted(PROFILES)}")
    tree = merge(_defaults(), PROFILES[name])
    tree = merge(tree, file_tree)
    tree = merge(tree, flag_tree)
    tree["profile"] = name
    explicit = frozenset(_leaves(file_tree)) | frozenset(_leaves(flag_tree))
    if "scene.noise.seed" not in explicit:
        tree["scene"]["noise"]["seed"] = tree["seed"]
    if tree["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return _build(tree, explicit)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    scene = dataclasses.replace(cfg.scene, noise=dataclasses.replace(cfg.scene.noise, seed=seed))
    return dataclasses.replace(cfg, scene=scene, seed=seed)


def solver_for_input(cfg: RunConfig, meta: dict) -> SolverConfig:
    """Take the sensor noise model from the input's sidecar unless configured."""
    updates = {}
    for key in ("sigma", "gain"):
        if f"solver.{key}" not in cfg.explicit and key in meta:
            updates[key] = float(meta[key])
    return dataclasses.replace(cfg.solver, **updates) if updates else cfg.solver


__all__ = ["RunConfig", "MetricsConfig", "ConfigError", "PROFILES", "resolve", "load_file",
           "parse_value", "merge", "with_seed", "solver_for_input"]
