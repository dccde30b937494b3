"""Depth-annotated test scenes and the noisy foggy CFA observation chain."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cfa import mosaic
from .fog import FogParams, NoiseParams, add_sensor_noise, apply_fog, transmission_from_depth
from .imaging import (CfaImage, ColorImage, DepthMap, TransmissionMap, check_phase,
                      load_image, save_image)

FOG_LEVELS = {"light": 0.004, "moderate": 0.02, "thick": 0.078}
BUILTIN_SCENES = ("ramp", "steps", "textured-blocks")
SKY_DEPTH = 1000.0
STEP_DEPTHS = (200.0, 50.0, 10.0)


def _ramp(h: int, w: int, sky: bool = True) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    r = j / max(w - 1, 1)
    g = i / max(h - 1, 1)
    x = np.stack([r, g, 0.5 * (r + g)], axis=2)
    d = 10.0 + 190.0 * (h - 1 - i) / max(h - 1, 1)
    return x, d


def _steps(h: int, w: int, sky: bool = True) -> tuple[np.ndarray, np.ndarray]:
    palette = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.2, 0.3, 0.8], [0.6, 0.6, 0.2]])
    j = np.arange(w)
    col = palette[(4 * j // max(w, 1)) % 4]
    x = np.broadcast_to(col[None], (h, w, 3)).copy()
    band = np.minimum(3 * np.arange(h) // max(h, 1), 2)
    d = np.broadcast_to(np.asarray(STEP_DEPTHS)[band][:, None], (h, w)).copy()
    return x, d


def _textured_blocks(h: int, w: int, sky: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Saturated, textured color blocks on dark separators under a gray sky.

    Every block color has one zero channel, so the dark channel of the
    ground-truth scene vanishes outside the sky.  The six colors are the
    permutations of (0.85, 0.35, 0), which balances the channel means.
    Without the sky band the whole scene satisfies the dark channel prior.
    """
    rng = np.random.default_rng(20160901)
    hi, lo = 0.85, 0.35
    palette = np.array([[hi, lo, 0], [0, hi, lo], [lo, 0, hi],
                        [hi, 0, lo], [lo, hi, 0], [0, lo, hi]])
    block, sep = 30, 2
    sky_rows = max(h // 8, 1) if sky else 0
    x = np.zeros((h, w, 3))
    x[:sky_rows] = 0.8
    i, j = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    li = i - sky_rows
    bi, bj = li // (block + sep), j // (block + sep)
    inner = (li >= 0) & (li % (block + sep) >= sep) & (j % (block + sep) >= sep)
    n_bi, n_bj = bi.max() + 1, bj.max() + 1
    freq = rng.uniform(0.02, 0.06, size=(n_bi, n_bj))
    theta = rng.uniform(0, np.pi, size=(n_bi, n_bj))
    phase = rng.uniform(0, 2 * np.pi, size=(n_bi, n_bj))
    bi_c, bj_c = np.clip(bi, 0, None), bj
    f, th, ph = freq[bi_c, bj_c], theta[bi_c, bj_c], phase[bi_c, bj_c]
    texture = 0.7 + 0.3 * np.sin(2 * np.pi * f * (np.cos(th) * i + np.sin(th) * j) + ph)
    color = palette[(3 * bi_c + bj_c) % 6]
    x = np.where(inner[..., None], color * texture[..., None], x)

    far, near = 20.0, 5.0
    frac = np.clip(li / max(h - sky_rows - 1, 1), 0, 1)
    d = np.where(li < 0, SKY_DEPTH, far + (near - far) * frac)
    return x, d


def builtin_scene(name: str, size: int | tuple[int, int] = 128,
                  sky: bool = True) -> tuple[ColorImage, DepthMap]:
    """Ground truth and depth of a built-in scene; `sky` only affects
    textured-blocks."""
    h, w = (size, size) if isinstance(size, int) else size
    makers = {"ramp": _ramp, "steps": _steps, "textured-blocks": _textured_blocks}
    if name not in makers:
        raise ValueError(f"unknown scene {name!r}; expected one of {BUILTIN_SCENES}")
    x, d = makers[name](h, w, sky)
    return ColorImage(x), DepthMap(d)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 128
    height: int = 128
    layout: str = "textured-blocks"  # builtin name or "imported"
    depth_layout: str = "builtin"  # builtin | linear | layered | imported
    depth_range: tuple[float, float] = (10.0, 200.0)
    fog: FogParams = field(default_factory=FogParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    phase: str = "RGGB"
    x_path: str | None = None
    depth_path: str | None = None
    sky: bool = True  # textured-blocks: gray sky band at SKY_DEPTH on top

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("scene must be at least 2x2")
        if self.layout not in BUILTIN_SCENES + ("imported",):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.depth_layout not in ("builtin", "linear", "layered", "imported"):
            raise ValueError(f"unknown depth layout {self.depth_layout!r}")
        near, far = self.depth_range
        if not 0 < near <= far:
            raise ValueError("depth range must be positive and ordered")
        if self.layout == "imported" and not self.x_path:
            raise ValueError("imported layout needs x_path")
        if self.depth_layout == "imported" and not self.depth_path:
            raise ValueError("imported depth layout needs depth_path")
        check_phase(self.phase)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if isinstance(d.get("fog"), dict):
            fog = dict(d["fog"])
            if "airlight" in fog:
                fog["airlight"] = tuple(fog["airlight"])
            d["fog"] = FogParams(**fog)
        if isinstance(d.get("noise"), dict):
            d["noise"] = NoiseParams(**d["noise"])
        if "depth_range" in d:
            d["depth_range"] = tuple(d["depth_range"])
        return cls(**d)


@dataclass
class SceneBundle:
    spec: SceneSpec
    x: ColorImage
    d: DepthMap
    t: TransmissionMap
    y: ColorImage
    s: ColorImage
    h: CfaImage

    FILES = {"x": "x.ppm", "d": "d.f32", "t": "t.f32", "y": "y.ppm", "s": "s.ppm", "h": "h.raw"}

    def save(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fog = self.spec.fog
        meta = {"scene": self.spec.to_dict(), "beta": fog.beta, "airlight": list(fog.airlight),
                "sigma": self.spec.noise.sigma, "gain": self.spec.noise.gain,
                "seed": self.spec.noise.seed, "phase": self.spec.phase}
        paths = {}
        for name, fname in self.FILES.items():
            paths[name] = out / fname
            save_image(getattr(self, name), paths[name], {**meta, "role": name})
        return paths


def _depth(spec: SceneSpec, builtin: np.ndarray) -> np.ndarray:
    h, w = spec.height, spec.width
    near, far = spec.depth_range
    if spec.depth_layout == "builtin":
        return builtin
    if spec.depth_layout == "linear":
        frac = np.arange(h)[:, None] / max(h - 1, 1)
        return np.broadcast_to(far + (near - far) * frac, (h, w)).copy()
    if spec.depth_layout == "layered":
        levels = np.geomspace(far, near, 3)
        band = np.minimum(3 * np.arange(h) // h, 2)
        return np.broadcast_to(levels[band][:, None], (h, w)).copy()
    return load_image(spec.depth_path, "depth").data


def synthesize(spec: SceneSpec) -> SceneBundle:
    """x -> t -> y (fog) -> s (noise) -> h (mosaic); deterministic in the spec."""
    if spec.layout == "imported":
        x = load_image(spec.x_path, "color")
        builtin_d = np.full((x.height, x.width), spec.depth_range[0])
    else:
        x, d0 = builtin_scene(spec.layout, (spec.height, spec.width), spec.sky)
        builtin_d = d0.data
    d = DepthMap(_depth(spec, builtin_d))
    if d.data.shape != x.data.shape[:2]:
        raise ValueError("depth map does not match the scene")
    t = transmission_from_depth(d, spec.fog.beta)
    y = apply_fog(x, t, spec.fog)
    s = add_sensor_noise(y, spec.noise)
    h = mosaic(s, spec.phase)
    h = CfaImage(h.data, spec.phase, {"beta": spec.fog.beta, "airlight": list(spec.fog.airlight),
                                      "sigma": spec.noise.sigma, "gain": spec.noise.gain})
    return SceneBundle(spec, x, d, t, y, s, h)
