"""Camera-pipeline arms: the separate demosaick-then-defog baseline and the
joint TLS arm, sharing white balance, airlight and display encoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cfa import bilinear_demosaick
from .fog import FogParams, defog
from .imaging import CfaImage, ColorImage, TransmissionMap, color_masks
from .tls import JointResult, SolverConfig, joint_defog_demosaick
from .transmission import (Airlight, DcpConfig, estimate_airlight, estimate_transmission_cfa,
                           estimate_transmission_rgb)

log = logging.getLogger(__name__)

STAGES = ("white_balance", "demosaick", "defog", "gamma")


@dataclass(frozen=True)
class PipelineConfig:
    gamma: float = 1.0
    stages: tuple[str, ...] = ("white_balance", "demosaick", "defog")
    epsilon: float = 0.01

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        stages = tuple(self.stages)
        if any(s not in STAGES for s in stages) or len(set(stages)) != len(stages):
            raise ValueError(f"stages must be distinct members of {STAGES}")
        if "defog" in stages and "demosaick" in stages and \
                stages.index("defog") < stages.index("demosaick"):
            raise ValueError("the separate pipeline defogs after demosaicking")
        object.__setattr__(self, "stages", stages)


def gray_world_white_balance(img: CfaImage) -> tuple[CfaImage, tuple[float, float, float]]:
    """Scale each color class so its mean matches the green mean."""
    masks = color_masks(img.phase, *img.data.shape)
    means = [float(img.data[m].mean()) if m.any() else 0.0 for m in masks]
    gains = []
    for k in range(3):
        if means[k] <= 0 or means[1] <= 0:
            log.warning("color class %d has zero mean; using unit gain", k)
            gains.append(1.0)
        else:
            gains.append(means[1] / means[k])
    gains[1] = 1.0
    out = img.data.copy()
    for k in range(3):
        out[masks[k]] *= gains[k]
    return CfaImage(out, img.phase, img.meta), tuple(gains)


def gamma_encode(img: ColorImage, gamma: float) -> ColorImage:
    return ColorImage(np.clip(img.data, 0.0, None) ** (1.0 / gamma))


def gamma_decode(img: ColorImage, gamma: float) -> ColorImage:
    return ColorImage(np.clip(img.data, 0.0, None) ** gamma)


@dataclass
class PipelineResult:
    output: ColorImage  # final image, display encoded if "gamma" ran
    linear: ColorImage  # restored radiance before gamma
    airlight: Airlight | None
    t_map: TransmissionMap | None
    gains: tuple[float, float, float]
    intermediates: dict = field(default_factory=dict)
    joint: JointResult | None = None

    @property
    def fallback_rate(self) -> float:
        return self.joint.fallback_rate if self.joint is not None else 0.0


def _balance(h: CfaImage, config: PipelineConfig) -> tuple[CfaImage, tuple]:
    if "white_balance" in config.stages:
        return gray_world_white_balance(h)
    return h, (1.0, 1.0, 1.0)


def separate_pipeline(h: CfaImage, config: PipelineConfig = PipelineConfig(),
                      dcp: DcpConfig = DcpConfig(),
                      t_map: TransmissionMap | None = None) -> PipelineResult:
    """White balance, bilinear demosaick, DCP defog, gamma, as configured.

    Passing `t_map` replaces the estimated transmission (oracle runs).
    """
    stages = {}
    cur, gains = _balance(h, config)
    stages["white_balance"] = cur
    air = estimate_airlight(cur, dcp)
    rgb = bilinear_demosaick(cur) if "demosaick" in config.stages else None
    if rgb is None:
        raise ValueError("the separate pipeline needs the demosaick stage")
    stages["demosaick"] = rgb
    img = rgb
    if "defog" in config.stages:
        if t_map is None:
            t_map = estimate_transmission_rgb(rgb, air.rgb, dcp)
        img = defog(rgb, t_map, FogParams(airlight=air.rgb, epsilon=config.epsilon))
        stages["defog"] = img
    linear = img
    if "gamma" in config.stages:
        img = gamma_encode(img, config.gamma)
        stages["gamma"] = img
    return PipelineResult(img, linear, air, t_map, gains, stages)


def joint_pipeline(h: CfaImage, config: PipelineConfig = PipelineConfig(),
                   dcp: DcpConfig = DcpConfig(), solver: SolverConfig = SolverConfig(),
                   t_map: TransmissionMap | None = None, threads: int = 1) -> PipelineResult:
    """White balance, CFA-domain airlight and transmission, joint TLS, gamma."""
    cur, gains = _balance(h, config)
    air = estimate_airlight(cur, dcp)
    if t_map is None:
        t_map = estimate_transmission_cfa(cur, air.scalar, dcp)
    res = joint_defog_demosaick(cur, t_map, air.scalar, solver, threads=threads)
    stages = {"white_balance": cur, "joint": res.image}
    img = res.image
    if "gamma" in config.stages:
        img = gamma_encode(img, config.gamma)
        stages["gamma"] = img
    return PipelineResult(img, res.image, air, t_map, gains, stages, joint=res)
