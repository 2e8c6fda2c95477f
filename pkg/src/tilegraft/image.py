"""Planar float image type, PNG/PFM I/O, color conversions, and preprocessing.

All pixel data is float64 in nominal range [0, 1].  PNG covers the 8- and
16-bit integer cases (via OpenCV); PFM covers lossless float storage
(little-endian, scale header -1.0, rows stored bottom-up per the usual PFM
convention).  Conversions and normalizations are pure value transforms and
never mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

SPACES = ("SRGB", "LinearRGB", "HSV", "Gray")

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


@dataclass
class ImageF:
    """Floating-point image: (H, W) gray or (H, W, 3) color plus a space tag."""

    data: np.ndarray
    space: str = "SRGB"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            ch = 1
        elif self.data.ndim == 3 and self.data.shape[2] == 3:
            ch = 3
        else:
            raise ValueError(f"image must be (H, W) or (H, W, 3), got {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("zero-sized image")
        if self.space not in SPACES:
            raise ValueError(f"unknown color space {self.space!r}")
        if ch == 1 and self.space != "Gray":
            raise ValueError("single-channel images must be tagged Gray")
        if ch == 3 and self.space == "Gray":
            raise ValueError("3-channel images cannot be tagged Gray")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("image contains non-finite samples")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def planes(self) -> list[np.ndarray]:
        """Per-channel 2-D views."""
        if self.data.ndim == 2:
            return [self.data]
        return [self.data[:, :, c] for c in range(3)]


# ----------------------------------------------------------------------------
# File I/O
# ----------------------------------------------------------------------------

def load_image(path: str | Path) -> ImageF:
    """Load a PNG (8/16-bit, gray or RGB) or PFM file; 8-bit maps v/255, 16-bit v/65535."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            head = f.read(8)
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e
    if head.startswith(_PNG_SIG):
        return _load_png(path)
    if head[:2] in (b"PF", b"Pf"):
        return _load_pfm(path)
    raise ValueError(f"{path}: not a PNG or PFM file")


def _load_png(path: Path) -> ImageF:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise OSError(f"cannot decode PNG {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"{path}: unsupported PNG bit depth ({raw.dtype})")
    if raw.ndim == 2:
        return ImageF(raw.astype(np.float64) / scale, "Gray")
    if raw.ndim == 3 and raw.shape[2] == 3:
        rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
        return ImageF(rgb.astype(np.float64) / scale, "SRGB")
    raise ValueError(f"{path}: unsupported channel count {raw.shape}")


def _load_pfm(path: Path) -> ImageF:
    with path.open("rb") as f:
        magic = _pfm_token(f)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: bad PFM magic {magic!r}")
        width = int(_pfm_token(f))
        height = int(_pfm_token(f))
        scale = float(_pfm_token(f))
        if width < 1 or height < 1:
            raise ValueError(f"{path}: zero PFM dimensions")
        count = width * height * channels
        buf = f.read(count * 4)
    if len(buf) != count * 4:
        raise ValueError(f"{path}: truncated PFM payload")
    dt = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(buf, dtype=dt).astype(np.float64)
    if channels == 3:
        data = data.reshape(height, width, 3)
    else:
        data = data.reshape(height, width)
    data = data[::-1].copy()  # PFM rows are bottom-up
    return ImageF(data, "SRGB" if channels == 3 else "Gray")


def _pfm_token(f) -> bytes:
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("unexpected end of PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def save_image(img: ImageF, path: str | Path, depth: int | str = 8) -> None:
    """Write img to path; depth 8/16 selects PNG, "float" selects PFM (exact)."""
    path = Path(path)
    if depth == "float":
        if path.suffix.lower() != ".pfm":
            raise ValueError("float depth requires a .pfm path")
        _save_pfm(img, path)
        return
    if depth not in (8, 16):
        raise ValueError(f"depth must be 8, 16 or 'float', got {depth!r}")
    if path.suffix.lower() != ".png":
        raise ValueError(f"depth {depth} requires a .png path")
    peak = 255 if depth == 8 else 65535
    dtype = np.uint8 if depth == 8 else np.uint16
    quant = np.rint(np.clip(img.data, 0.0, 1.0) * peak).astype(dtype)
    if img.channels == 3:
        quant = cv2.cvtColor(quant, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), quant):
        raise OSError(f"cannot write {path}")


def _save_pfm(img: ImageF, path: Path) -> None:
    header = b"PF\n" if img.channels == 3 else b"Pf\n"
    header += f"{img.width} {img.height}\n".encode()
    header += b"-1.0\n"
    payload = img.data[::-1].astype("<f4").tobytes()
    try:
        with path.open("wb") as f:
            f.write(header)
            f.write(payload)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


# ----------------------------------------------------------------------------
# Color conversions
# ----------------------------------------------------------------------------

def _require(img: ImageF, space: str) -> None:
    if img.space != space:
        raise ValueError(f"expected {space} image, got {img.space}")


def eotf_srgb(u: np.ndarray) -> np.ndarray:
    """sRGB decoding: u <= 0.04045 -> u/12.92, else ((u + 0.055)/1.055)^2.4."""
    u = np.asarray(u, dtype=np.float64)
    return np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)


def oetf_srgb(v: np.ndarray) -> np.ndarray:
    """sRGB encoding, inverse of eotf_srgb."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * np.maximum(v, 0.0) ** (1 / 2.4) - 0.055)


def srgb_to_linear(img: ImageF) -> ImageF:
    _require(img, "SRGB")
    return ImageF(eotf_srgb(img.data), "LinearRGB")


def linear_to_srgb(img: ImageF) -> ImageF:
    _require(img, "LinearRGB")
    return ImageF(oetf_srgb(img.data), "SRGB")


def rgb_to_hsv(img: ImageF) -> ImageF:
    """Hexcone RGB -> HSV with all three channels in [0, 1]; H forced 0 where S = 0."""
    _require(img, "SRGB")
    if img.channels != 3:
        raise ValueError("rgb_to_hsv needs 3 channels")
    r, g, b = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    mx = img.data.max(axis=2)
    mn = img.data.min(axis=2)
    d = mx - mn
    safe_d = np.where(d > 0, d, 1.0)
    h = np.where(
        mx == r, ((g - b) / safe_d) % 6.0,
        np.where(mx == g, (b - r) / safe_d + 2.0, (r - g) / safe_d + 4.0),
    ) / 6.0
    s = np.where(mx > 0, d / np.where(mx > 0, mx, 1.0), 0.0)
    h = np.where(s == 0, 0.0, h)
    return ImageF(np.stack([h, s, mx], axis=2), "HSV")


def hsv_to_rgb(img: ImageF) -> ImageF:
    _require(img, "HSV")
    h, s, v = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return ImageF(np.stack([r, g, b], axis=2), "SRGB")


# ----------------------------------------------------------------------------
# Preprocessing
# ----------------------------------------------------------------------------

def minmax_normalize(img: ImageF) -> ImageF:
    """Joint min-max rescale to [0, 1]; a constant image maps to all zeros."""
    lo = img.data.min()
    hi = img.data.max()
    if hi == lo:
        return ImageF(np.zeros_like(img.data), img.space)
    return ImageF((img.data - lo) / (hi - lo), img.space)


def equalize_hist(img: ImageF) -> ImageF:
    """256-bin histogram equalization with CDF_min normalization; constants pass through."""
    if img.channels != 1:
        raise ValueError("equalize_hist expects a single-channel image")
    v = np.clip(img.data, 0.0, 1.0)
    idx = np.minimum((v * 256.0).astype(int), 255)
    counts = np.bincount(idx.ravel(), minlength=256)
    cdf = np.cumsum(counts) / idx.size
    cdf_min = cdf[np.nonzero(counts)[0][0]]
    if cdf_min >= 1.0:
        return ImageF(img.data.copy(), img.space)
    out = (cdf[idx] - cdf_min) / (1.0 - cdf_min)
    return ImageF(out, img.space)


def _area_weights(src: int, dst: int) -> np.ndarray:
    # fractional box-overlap weights; each output row sums to 1
    w = np.zeros((dst, src))
    scale = src / dst
    for i in range(dst):
        a = i * scale
        b = (i + 1) * scale
        j0 = int(np.floor(a))
        j1 = min(int(np.ceil(b)), src)
        for j in range(j0, j1):
            w[i, j] = min(b, j + 1.0) - max(a, float(j))
    return w / scale


def clamp_long_side(img: ImageF, max_side: int = 512) -> ImageF:
    """Isotropic area-average downscale so the long side is at most max_side."""
    if max_side < 1:
        raise ValueError("max_side must be >= 1")
    h, w = img.height, img.width
    long_side = max(h, w)
    if long_side <= max_side:
        return img
    if w >= h:
        new_w = max_side
        new_h = max(1, int(round(h * max_side / w)))
    else:
        new_h = max_side
        new_w = max(1, int(round(w * max_side / h)))
    wr = _area_weights(h, new_h)
    wc = _area_weights(w, new_w)
    if img.channels == 1:
        out = wr @ img.data @ wc.T
    else:
        out = np.stack([wr @ img.data[:, :, c] @ wc.T for c in range(3)], axis=2)
    return ImageF(out, img.space)
