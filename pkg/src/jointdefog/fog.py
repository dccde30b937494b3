"""Koschmieder fog model, its inverse, and Poisson-Gaussian sensor noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import ColorImage, DepthMap, TransmissionMap

DEFAULT_GAIN = 1000.0


@dataclass(frozen=True)
class FogParams:
    beta: float = 0.02  # scattering coefficient, 1/m
    airlight: tuple[float, float, float] = (0.8, 0.8, 0.8)
    epsilon: float = 0.01  # transmission floor used when defogging

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if len(self.airlight) != 3 or min(self.airlight) <= 0:
            raise ValueError("airlight needs three positive channels")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        object.__setattr__(self, "airlight", tuple(float(a) for a in self.airlight))

    @property
    def la(self) -> np.ndarray:
        return np.asarray(self.airlight, dtype=np.float64)


@dataclass(frozen=True)
class NoiseParams:
    sigma: float = 0.01  # readout noise std, radiance units
    seed: int = 0
    gain: float = DEFAULT_GAIN  # photons per unit radiance

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.gain <= 0:
            raise ValueError("gain must be positive")


def _tdata(t) -> np.ndarray:
    return t.data if isinstance(t, TransmissionMap) else np.asarray(t, dtype=np.float64)


def _check_dims(img: ColorImage, t: np.ndarray) -> None:
    if t.shape != img.data.shape[:2]:
        raise ValueError(f"dimension mismatch: image {img.data.shape[:2]} vs t {t.shape}")


def transmission_from_depth(depth: DepthMap, beta: float) -> TransmissionMap:
    """t = exp(-beta * d)."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    d = depth.data if isinstance(depth, DepthMap) else np.asarray(depth, dtype=np.float64)
    t = np.exp(-beta * d)
    # deep fog underflows exp(); keep t strictly positive
    return TransmissionMap(np.maximum(t, np.finfo(np.float64).tiny))


def apply_fog(x: ColorImage, t, params: FogParams) -> ColorImage:
    t = _tdata(t)
    _check_dims(x, t)
    tt = t[..., None]
    return ColorImage(tt * x.data + (1.0 - tt) * params.la)


def defog(y: ColorImage, t, params: FogParams) -> ColorImage:
    """Invert the fog blend, flooring the transmission at `params.epsilon`.

    No clamping is applied; values outside [0, 1] survive until save time.
    """
    t = _tdata(t)
    _check_dims(y, t)
    tt = np.maximum(t, params.epsilon)[..., None]
    return ColorImage((y.data - params.la) / tt + params.la)


def _row_generator(seed: int, row: int) -> np.random.Generator:
    # Philox is counter based; one keyed stream per image row makes the noise
    # field independent of traversal order and of image width beyond the row.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(row,))
    return np.random.Generator(np.random.Philox(ss))


def add_sensor_noise(y: ColorImage, params: NoiseParams,
                     gain: float | None = None) -> ColorImage:
    """s = Poisson(gain * y) / gain + Normal(0, sigma^2), per pixel and channel."""
    gain = params.gain if gain is None else gain
    if gain <= 0:
        raise ValueError("gain must be positive")
    rate = np.maximum(y.data, 0.0) * gain
    out = np.empty_like(rate)
    for i in range(rate.shape[0]):
        rng = _row_generator(params.seed, i)
        shot = rng.poisson(rate[i]) / gain
        read = rng.normal(0.0, 1.0, size=rate[i].shape) * params.sigma
        out[i] = shot + read
    return ColorImage(out)


def predicted_noise_variance(t: float, x, fog: FogParams, noise: NoiseParams,
                             gain: float | None = None) -> np.ndarray:
    """Per-channel variance of the noisy foggy observation.

    Shot noise scales with the foggy intensity, so as t -> 0 the variance
    tends to airlight / gain + sigma^2.
    """
    gain = noise.gain if gain is None else gain
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    y = t * np.asarray(x, dtype=np.float64) + (1 - t) * fog.la
    return y / gain + noise.sigma ** 2


def amplified_noise_variance(t: float, base_variance, epsilon: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    return np.asarray(base_variance, dtype=np.float64) / max(t, epsilon) ** 2
