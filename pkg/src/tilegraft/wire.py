"""Binary patch-exchange framing used to talk to out-of-process models.

Frame layout, identical in both directions:

  magic   4 bytes               b"NPX1"
  width   uint32 little-endian
  height  uint32 little-endian
  channels uint32 little-endian
  payload width*height*channels float32 little-endian, planar
          (channel plane after channel plane, each plane row-major)

One request and one response per patch; the stream stays open across patches
and the child must exit 0 when its stdin closes.  Note the wire carries
float32: float64 samples that are not exactly representable in float32 are
rounded in transit.
"""

from __future__ import annotations

import numpy as np

MAGIC = b"NPX1"

_MAX_SIDE = 1 << 16
_MAX_SAMPLES = 1 << 28


class WireError(RuntimeError):
    """Base class for patch-protocol failures."""


class BadMagicError(WireError):
    pass


class ShortReadError(WireError):
    pass


class ChildExitError(WireError):
    def __init__(self, returncode: int):
        super().__init__(f"child process exited with status {returncode}")
        self.returncode = returncode


def read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ShortReadError(f"expected {n} bytes, got {len(buf)}")
        buf += chunk
    return buf


def write_frame(stream, array: np.ndarray) -> None:
    """Serialize an (H, W) or (H, W, C) array as one frame and flush."""
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 2:
        planes = array[None, :, :]
    elif array.ndim == 3:
        planes = np.moveaxis(array, 2, 0)
    else:
        raise ValueError(f"cannot frame array of shape {array.shape}")
    c, h, w = planes.shape
    stream.write(MAGIC)
    stream.write(np.array([w, h, c], dtype="<u4").tobytes())
    stream.write(np.ascontiguousarray(planes, dtype="<f4").tobytes())
    stream.flush()


def read_frame(stream) -> np.ndarray:
    """Read one frame; returns (H, W) for 1 channel, else (H, W, C)."""
    magic = read_exact(stream, 4)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    w, h, c = np.frombuffer(read_exact(stream, 12), dtype="<u4")
    w, h, c = int(w), int(h), int(c)
    if not (0 < w <= _MAX_SIDE and 0 < h <= _MAX_SIDE and 0 < c <= 16):
        raise WireError(f"implausible frame header w={w} h={h} c={c}")
    if w * h * c > _MAX_SAMPLES:
        raise WireError(f"frame payload too large: {w}x{h}x{c}")
    payload = read_exact(stream, w * h * c * 4)
    planes = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(c, h, w)
    if c == 1:
        return planes[0]
    return np.moveaxis(planes, 0, 2)


def try_read_frame(stream) -> np.ndarray | None:
    """Like read_frame but returns None on clean end-of-stream before the magic."""
    first = stream.read(1)
    if not first:
        return None
    magic = first + read_exact(stream, 3)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    w, h, c = np.frombuffer(read_exact(stream, 12), dtype="<u4")
    w, h, c = int(w), int(h), int(c)
    if not (0 < w <= _MAX_SIDE and 0 < h <= _MAX_SIDE and 0 < c <= 16):
        raise WireError(f"implausible frame header w={w} h={h} c={c}")
    payload = read_exact(stream, w * h * c * 4)
    planes = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(c, h, w)
    if c == 1:
        return planes[0]
    return np.moveaxis(planes, 0, 2)
