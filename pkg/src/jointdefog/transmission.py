"""Dark-channel airlight and transmission estimation for RGB and CFA data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imaging import CfaImage, ColorImage, TransmissionMap, color_masks

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DcpConfig:
    window: int = 25
    rho: float = 0.95
    airlight_quantile: float = 0.001
    # never average fewer raw samples than this; 0.1% of a small image is
    # too few to beat sensor noise
    airlight_min_pixels: int = 256
    refine: bool = True  # box-smooth the raw estimate with the same window

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not 0 < self.airlight_quantile <= 0.05:
            raise ValueError("airlight_quantile must lie in (0, 0.05]")
        if self.airlight_min_pixels < 1:
            raise ValueError("airlight_min_pixels must be >= 1")


@dataclass(frozen=True)
class Airlight:
    rgb: tuple[float, float, float]
    scalar: float
    spread: float  # (max - min) / mean over the three channel estimates

    @property
    def unbalanced(self) -> bool:
        return self.spread > 0.05


def _window_min(a: np.ndarray, window: int) -> np.ndarray:
    # scipy "reflect" is half-sample symmetric extension
    return ndimage.minimum_filter(a, size=window, mode="reflect")


def dark_channel_rgb(img: ColorImage | np.ndarray, window: int) -> np.ndarray:
    data = img.data if isinstance(img, ColorImage) else np.asarray(img, dtype=np.float64)
    if window % 2 == 0:
        raise ValueError("window must be odd")
    return _window_min(data.min(axis=2), window)


def dark_channel_cfa(h: CfaImage, window: int) -> np.ndarray:
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    return _window_min(h.data, window)


def estimate_airlight(h: CfaImage, config: DcpConfig = DcpConfig()) -> Airlight:
    """Average the raw values of the most haze-opaque pixels per color class.

    The most opaque pixels are the top `airlight_quantile` fraction ranked by
    the CFA dark channel, but at least `airlight_min_pixels` of them.
    """
    data = h.data
    n_pix = data.size
    n_top = min(n_pix, max(math.ceil(config.airlight_quantile * n_pix),
                           config.airlight_min_pixels))
    if n_pix * config.airlight_quantile < 1:
        log.warning("image has fewer than 1/airlight_quantile pixels")
    dc = dark_channel_cfa(h, config.window).ravel()
    order = np.argsort(-dc, kind="stable")
    top = np.zeros(n_pix, dtype=bool)
    top[order[:n_top]] = True
    masks = color_masks(h.phase, *data.shape).reshape(3, -1)
    flat = data.ravel()
    overall = float(flat[top].mean())
    rgb = []
    for k in range(3):
        sel = top & masks[k]
        rgb.append(float(flat[sel].mean()) if sel.any() else overall)
    scalar = float(np.mean(rgb))
    spread = (max(rgb) - min(rgb)) / scalar if scalar > 0 else 0.0
    est = Airlight(tuple(rgb), scalar, spread)
    if est.unbalanced:
        log.warning("airlight channel spread %.1f%% exceeds 5%%", 100 * spread)
    return est


def _finish(raw: np.ndarray, config: DcpConfig) -> TransmissionMap:
    t = 1.0 - config.rho * raw
    if config.refine:
        t = ndimage.uniform_filter(t, size=config.window, mode="reflect")
    lo = max(1.0 - config.rho, np.finfo(np.float64).tiny)
    return TransmissionMap(np.clip(t, lo, 1.0))


def estimate_transmission_cfa(h: CfaImage, la: float,
                              config: DcpConfig = DcpConfig()) -> TransmissionMap:
    """t = 1 - rho * min over the window of h / la, clamped to [1 - rho, 1]."""
    if la <= 0:
        raise ValueError("airlight must be positive")
    return _finish(dark_channel_cfa(CfaImage(h.data / la, h.phase), config.window), config)


def estimate_transmission_rgb(y: ColorImage, la, config: DcpConfig = DcpConfig()
                              ) -> TransmissionMap:
    la = np.broadcast_to(np.asarray(la, dtype=np.float64), (3,))
    if np.any(la <= 0):
        raise ValueError("airlight must be positive")
    return _finish(dark_channel_rgb(y.data / la, config.window), config)
