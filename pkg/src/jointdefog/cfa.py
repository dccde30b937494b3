"""Bayer mosaicking, single-color sublattices and bilinear demosaicking."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imaging import (COLORS, CfaImage, ColorImage, _color_index, color_at,
                      color_masks, pad_cfa)

_K_GREEN = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4
_K_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4


def mosaic(x: ColorImage, phase: str) -> CfaImage:
    h, w = x.data.shape[:2]
    cols = color_at(phase, np.arange(h)[:, None], np.arange(w)[None, :])
    g = np.take_along_axis(x.data, cols[..., None], axis=2)[..., 0]
    return CfaImage(g, phase)


def sublattice(h: CfaImage, color, origin: tuple[int, int]) -> np.ndarray:
    """Stride-2 single-color plane starting at `origin`.

    Shape is (ceil(H/2), ceil(W/2)) for origin (0, 0).
    """
    k = _color_index(color)
    i0, j0 = origin
    if i0 not in (0, 1) or j0 not in (0, 1):
        raise ValueError(f"origin must lie in {{0,1}}^2, got {origin}")
    if color_at(h.phase, i0, j0) != k:
        raise ValueError(f"origin {origin} carries {COLORS[color_at(h.phase, i0, j0)]}, "
                         f"not {COLORS[k]}, under phase {h.phase}")
    return np.array(h.data[i0::2, j0::2])


def bilinear_demosaick(h: CfaImage) -> ColorImage:
    """Classic bilinear interpolation; observed samples pass through unchanged.

    Boundaries use parity-preserving mirror extension, so the kernel weights
    at every site sum to one and the operator commutes with constant offsets.
    """
    H, W = h.data.shape
    padded = pad_cfa(h.data, 1)
    rows = np.arange(-1, H + 1)
    cols = np.arange(-1, W + 1)
    site = color_at(h.phase, rows[:, None], cols[None, :])
    out = np.empty((H, W, 3))
    for k in range(3):
        sampled = np.where(site == k, padded, 0.0)
        kern = _K_GREEN if k == 1 else _K_RB
        out[..., k] = ndimage.correlate(sampled, kern, mode="constant")[1:-1, 1:-1]
    own = color_masks(h.phase, H, W)
    for k in range(3):
        out[..., k][own[k]] = h.data[own[k]]
    return ColorImage(out)
