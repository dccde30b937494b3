"""Full-reference PSNR and blind contrast descriptors (e, r_bar)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .imaging import ColorImage

GRAD_FLOOR = 1e-6


def _data(img) -> np.ndarray:
    return img.data if isinstance(img, ColorImage) else np.asarray(img, dtype=np.float64)


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical images give +inf."""
    a, b = _data(a), _data(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def luminance(img) -> np.ndarray:
    d = _data(img)
    return d.mean(axis=2) if d.ndim == 3 else d


def local_contrast(lum: np.ndarray) -> np.ndarray:
    """(max - min) / (max + min) over each 3x3 neighborhood."""
    hi = ndimage.maximum_filter(lum, size=3, mode="reflect")
    lo = ndimage.minimum_filter(lum, size=3, mode="reflect")
    den = hi + lo
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(den > 0, (hi - lo) / np.where(den > 0, den, 1.0), 0.0)
    return c


def visible_edges(img, threshold: float = 0.05) -> np.ndarray:
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    return local_contrast(luminance(img)) > threshold


def gradient_magnitude(lum: np.ndarray) -> np.ndarray:
    p = np.pad(lum, 1, mode="symmetric")
    gx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    gy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    return np.hypot(gx, gy)


@dataclass(frozen=True)
class ContrastReport:
    e: float
    r_bar: float
    n_before: int
    n_after: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def blind_contrast(before, after, threshold: float = 0.05) -> ContrastReport:
    """Newly visible edge rate e and geometric-mean gradient ratio r_bar.

    e = (n_after - n_before) / n_before; when nothing was visible before, e
    is reported as n_after and the report is flagged degenerate.  r_bar is
    taken over the visible edges of `after`, with both gradients floored
    at 1e-6.
    """
    b, a = _data(before), _data(after)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {b.shape} vs {a.shape}")
    mb, ma = visible_edges(b, threshold), visible_edges(a, threshold)
    n_b, n_a = int(mb.sum()), int(ma.sum())
    degenerate = n_b == 0
    e = float(n_a) if degenerate else (n_a - n_b) / n_b
    if n_a == 0:
        return ContrastReport(e, 1.0, n_b, n_a, degenerate)
    ga = np.maximum(gradient_magnitude(luminance(a)), GRAD_FLOOR)
    gb = np.maximum(gradient_magnitude(luminance(b)), GRAD_FLOOR)
    r_bar = float(np.exp(np.mean(np.log(ga[ma] / gb[ma]))))
    return ContrastReport(e, r_bar, n_b, n_a, degenerate)


def metrics_report(restored, before, reference=None, threshold: float = 0.05,
                   fallback_rate: float = 0.0) -> dict:
    """JSON-ready {psnr_db, e, r_bar, n_before, n_after, fallback_rate}."""
    rep = blind_contrast(before, restored, threshold)
    if reference is None:
        p = None
    else:
        p = psnr(np.clip(_data(restored), 0, 1), reference)
    return {"psnr_db": ("inf" if p == math.inf else p) if p is not None else "n/a",
            "e": rep.e, "r_bar": rep.r_bar, "n_before": rep.n_before,
            "n_after": rep.n_after, "fallback_rate": fallback_rate}
