"""Raster types, Bayer geometry, patch extraction and 16-bit file I/O.

All radiance math is float64; quantization happens only in `save_image`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PHASES = ("RGGB", "GRBG", "GBRG", "BGGR")
COLORS = "RGB"
MAXVAL = 65535


class ImageFormatError(ValueError):
    """Raised for malformed image files or sidecars."""


def _color_index(c: int | str) -> int:
    if isinstance(c, str):
        return COLORS.index(c.upper())
    if c not in (0, 1, 2):
        raise ValueError(f"bad color index {c}")
    return int(c)


def check_phase(phase: str) -> str:
    if phase not in PHASES:
        raise ImageFormatError(f"unknown phase {phase!r}; expected one of {PHASES}")
    return phase


def phase_pattern(phase: str) -> np.ndarray:
    """2x2 array of color indices (0=R, 1=G, 2=B) for `phase`."""
    check_phase(phase)
    return np.array([[COLORS.index(phase[0]), COLORS.index(phase[1])],
                     [COLORS.index(phase[2]), COLORS.index(phase[3])]])


def color_at(phase: str, i, j):
    """Color index of site (i, j); works elementwise on arrays."""
    return phase_pattern(phase)[np.asarray(i) % 2, np.asarray(j) % 2]


def shifted_phase(phase: str, i: int, j: int) -> str:
    """Phase of the mosaic re-originated at site (i, j)."""
    p = phase_pattern(phase)
    cells = [p[(i + di) % 2, (j + dj) % 2] for di in (0, 1) for dj in (0, 1)]
    return "".join(COLORS[c] for c in cells)


def color_origins(phase: str, color: int | str) -> list[tuple[int, int]]:
    """Origins (i0, j0) in {0,1}^2 whose stride-2 sublattice carries `color`."""
    k = _color_index(color)
    p = phase_pattern(phase)
    return [(a, b) for a in (0, 1) for b in (0, 1) if p[a, b] == k]


def color_masks(phase: str, height: int, width: int) -> np.ndarray:
    """Boolean (3, H, W) indicator of each color's sites."""
    cols = color_at(phase, np.arange(height)[:, None], np.arange(width)[None, :])
    return np.stack([cols == k for k in range(3)])


@dataclass(frozen=True)
class ColorImage:
    data: np.ndarray  # (H, W, 3)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[2] != 3 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"ColorImage needs shape (H, W, 3), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("ColorImage contains non-finite values")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CfaImage:
    data: np.ndarray  # (H, W)
    phase: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_phase(self.phase)
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"CfaImage needs shape (H, W), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("CfaImage contains non-finite values")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def color_at(self, i, j):
        return color_at(self.phase, i, j)


@dataclass(frozen=True)
class DepthMap:
    data: np.ndarray  # (H, W) meters

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("DepthMap must be 2-D")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("depth must be finite and non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)


@dataclass(frozen=True)
class TransmissionMap:
    data: np.ndarray  # (H, W), 0 < t <= 1

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("TransmissionMap must be 2-D")
        if not np.all(np.isfinite(d)) or np.any(d <= 0) or np.any(d > 1):
            raise ValueError("transmission must lie in (0, 1]")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)


# -- boundary handling -------------------------------------------------------

def mirror_index(idx, n: int, keep_parity: bool = False):
    """Map (possibly out of range) indices into [0, n) by mirror extension.

    The default is half-sample symmetric extension (edge sample repeated).
    ``keep_parity`` uses whole-sample reflection instead, which preserves
    index parity and therefore the Bayer color at every extended site.
    """
    idx = np.asarray(idx)
    if n == 1:
        return np.zeros_like(idx)
    if keep_parity:
        period = 2 * (n - 1)
        r = np.mod(idx, period)
        return np.where(r < n, r, period - r)
    period = 2 * n
    r = np.mod(idx, period)
    return np.where(r < n, r, period - 1 - r)


def pad_symmetric(a: np.ndarray, pad: int) -> np.ndarray:
    h, w = a.shape
    rows = mirror_index(np.arange(-pad, h + pad), h)
    cols = mirror_index(np.arange(-pad, w + pad), w)
    return a[np.ix_(rows, cols)]


def pad_cfa(a: np.ndarray, pad: int) -> np.ndarray:
    """Mirror-pad a mosaic without changing the color of any site."""
    h, w = a.shape
    rows = mirror_index(np.arange(-pad, h + pad), h, keep_parity=True)
    cols = mirror_index(np.arange(-pad, w + pad), w, keep_parity=True)
    return a[np.ix_(rows, cols)]


def extract_plane_patch(img: np.ndarray, center: tuple[int, int], half: int,
                        stride: int = 1) -> np.ndarray:
    """Row-major vector of the (2*half+1)^2 samples around `center`.

    Samples are `stride` apart; out-of-range positions use symmetric
    mirror extension, so every center is valid.
    """
    img = np.asarray(img, dtype=np.float64)
    offs = np.arange(-half, half + 1) * stride
    rows = mirror_index(center[0] + offs, img.shape[0])
    cols = mirror_index(center[1] + offs, img.shape[1])
    return img[np.ix_(rows, cols)].ravel()


# -- file I/O ------------------------------------------------------------------

def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _read_sidecar(path: Path) -> dict | None:
    sc = sidecar_path(path)
    if not sc.exists():
        return None
    try:
        return json.loads(sc.read_text())
    except json.JSONDecodeError as exc:
        raise ImageFormatError(f"bad sidecar {sc}: {exc}") from exc


def _write_sidecar(path: Path, meta: dict) -> None:
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def quantize(values: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.rint(v * MAXVAL).astype(np.uint16)


def _parse_pnm(raw: bytes, path: Path) -> tuple[str, np.ndarray]:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise ImageFormatError(f"{path}: unsupported magic {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed header") from exc
    if w < 1 or h < 1 or not 0 < maxval <= MAXVAL:
        raise ImageFormatError(f"{path}: bad dimensions or maxval")
    ch = 1 if magic == "P5" else 3
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h * ch
    body = np.frombuffer(raw, dtype=dtype, count=-1, offset=pos)
    if body.size != count:
        raise ImageFormatError(f"{path}: expected {count} samples, found {body.size}")
    arr = body.astype(np.float64) / maxval
    return magic, arr.reshape((h, w) if ch == 1 else (h, w, 3))


def load_image(path: str | Path, kind: str | None = None):
    """Load a CFA mosaic, color image or depth map.

    `kind` is one of "cfa", "color", "depth", "transmission"; when omitted
    it follows from the extension (.raw/.pgm -> cfa, .ppm/.png -> color,
    .f32 -> depth or transmission per the sidecar's "kind" key).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if kind is None:
        kind = {".raw": "cfa", ".pgm": "cfa", ".ppm": "color", ".png": "color",
                ".f32": "depth"}.get(suffix)
        if kind is None:
            raise ImageFormatError(f"cannot infer image kind from {path.name}")
    meta = _read_sidecar(path)

    if suffix == ".f32":
        if meta is None or "width" not in meta or "height" not in meta:
            raise ImageFormatError(f"{path}: float maps need a sidecar with width/height")
        arr = np.fromfile(path, dtype="<f4").astype(np.float64)
        if arr.size != meta["width"] * meta["height"]:
            raise ImageFormatError(f"{path}: dimension mismatch with sidecar")
        arr = arr.reshape(meta["height"], meta["width"])
        if kind == "transmission" or meta.get("kind") == "transmission":
            return TransmissionMap(arr)
        return DepthMap(arr)

    if suffix == ".png":
        import cv2

        arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise ImageFormatError(f"{path}: unreadable PNG")
        scale = MAXVAL if arr.dtype == np.uint16 else 255
        arr = arr.astype(np.float64) / scale
        if arr.ndim == 3:
            arr = arr[..., 2::-1]
    else:
        _, arr = _parse_pnm(path.read_bytes(), path)

    meta = meta or {}
    if "width" in meta and "height" in meta:
        if (meta["height"], meta["width"]) != arr.shape[:2]:
            raise ImageFormatError(f"{path}: dimension mismatch with sidecar")
    if kind == "cfa":
        if arr.ndim != 2:
            raise ImageFormatError(f"{path}: CFA file must be single-channel")
        if "phase" not in meta:
            raise ImageFormatError("missing phase metadata")
        return CfaImage(arr, check_phase(meta["phase"]), meta)
    if arr.ndim == 2:
        raise ImageFormatError(f"{path}: color file is single-channel")
    return ColorImage(arr, meta)


def save_image(img, path: str | Path, meta: dict | None = None) -> None:
    """Write `img` plus its sidecar; identical input gives identical bytes.

    Values are clamped to [0, 1] and quantized to 16 bits. Depth and
    transmission maps are stored as little-endian float32.
    """
    path = Path(path)
    extra = dict(meta or {})
    if isinstance(img, (DepthMap, TransmissionMap)):
        arr = img.data
        kind = "depth" if isinstance(img, DepthMap) else "transmission"
        meta = {**extra, "kind": kind, "height": arr.shape[0], "width": arr.shape[1]}
        np.asarray(arr, dtype="<f4").tofile(path)
    elif isinstance(img, CfaImage):
        q = quantize(img.data)
        h, w = q.shape
        meta = {**img.meta, **extra, "phase": img.phase, "width": w, "height": h}
        path.write_bytes(f"P5\n{w} {h}\n{MAXVAL}\n".encode() + q.astype(">u2").tobytes())
    elif isinstance(img, ColorImage):
        q = quantize(img.data)
        h, w, _ = q.shape
        meta = {**img.meta, **extra, "width": w, "height": h}
        if path.suffix.lower() == ".png":
            import cv2

            if not cv2.imwrite(str(path), np.ascontiguousarray(q[..., ::-1])):
                raise OSError(f"cannot write {path}")
        else:
            path.write_bytes(f"P6\n{w} {h}\n{MAXVAL}\n".encode() + q.astype(">u2").tobytes())
    else:
        raise TypeError(f"cannot save {type(img).__name__}")
    _write_sidecar(path, meta)
