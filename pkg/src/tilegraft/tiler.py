"""Sliding-window patch translation with feathered recomposition.

The pipeline: compute a patch grid (patch size P, stride S), reflect-pad the
input up to the grid, run a patch operator on every PxP window, accumulate
each output times a separable Hann weight mask into a padded canvas along
with the mask itself, divide the two accumulators elementwise, and crop back
to the input size.  Because numerator and denominator carry the same weights,
any operator whose patch outputs agree on overlaps is reconstructed exactly;
disagreeing patches are feathered into each other instead of seaming.

Patch operators are pluggable: anything with ``apply(patch) -> (P, P, 3)``
works.  Four reference operators ship here, including one that talks to an
external process over the binary frame protocol in tilegraft.wire.  Patch
prediction may run on a thread pool (operators advertise ``parallel_safe``),
but accumulation always happens in row-major grid order, so outputs are
bitwise identical for any thread count.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from tilegraft import wire
from tilegraft.image import ImageF

DEFAULT_PATCH = 256
DEFAULT_STRIDE = 240
STRIDE_PRESETS = (222, 240)
DEFAULT_MASK_FLOOR = 1e-4


class PatchOperatorError(RuntimeError):
    """Raised when a patch operator fails; carries the offending patch index."""

    def __init__(self, index: int, origin: tuple[int, int], message: str):
        super().__init__(f"patch {index} at (y={origin[0]}, x={origin[1]}): {message}")
        self.index = index
        self.origin = origin


# ----------------------------------------------------------------------------
# Grid, padding, mask
# ----------------------------------------------------------------------------

@dataclass
class TileGrid:
    patch: int
    stride: int
    padded_h: int
    padded_w: int
    origins: list[tuple[int, int]]


@dataclass
class FeatherMask:
    size: int
    epsilon: float
    weights: np.ndarray


def compute_grid(height: int, width: int, patch: int = DEFAULT_PATCH,
                 stride: int = DEFAULT_STRIDE) -> TileGrid:
    """Row-major patch origins over the minimally padded canvas.

    Padded extent is patch + k*stride for the smallest k >= 0 reaching the
    image size, so every padded pixel is covered by at least one patch.
    """
    if height < 1 or width < 1:
        raise ValueError("zero-sized image")
    if patch < 8:
        raise ValueError("patch size must be >= 8")
    if not (1 <= stride <= patch):
        raise ValueError(f"stride must satisfy 1 <= S <= P, got S={stride} P={patch}")
    ky = max(0, -(-(height - patch) // stride))
    kx = max(0, -(-(width - patch) // stride))
    padded_h = patch + ky * stride
    padded_w = patch + kx * stride
    origins = [(a * stride, b * stride) for a in range(ky + 1) for b in range(kx + 1)]
    return TileGrid(patch, stride, padded_h, padded_w, origins)


def pad_reflect(img: ImageF, grid: TileGrid) -> ImageF:
    """Reflect-pad (no edge repeat) on bottom/right up to the grid extent."""
    pad_h = grid.padded_h - img.height
    pad_w = grid.padded_w - img.width
    if pad_h < 0 or pad_w < 0:
        raise ValueError("grid smaller than image")
    if pad_h == 0 and pad_w == 0:
        return img
    pads = [(0, pad_h), (0, pad_w)] + [(0, 0)] * (img.data.ndim - 2)
    return ImageF(np.pad(img.data, pads, mode="reflect"), img.space)


def hann_mask(patch: int, epsilon: float = DEFAULT_MASK_FLOOR) -> FeatherMask:
    """Separable Hann weights w[i]*w[j] with w[n] = 0.5(1 - cos(2πn/(P-1))), floored at ε."""
    if patch < 2:
        raise ValueError("patch size must be >= 2")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must be in (0, 1)")
    w = np.hanning(patch)
    return FeatherMask(patch, epsilon, np.maximum(np.outer(w, w), epsilon))


# ----------------------------------------------------------------------------
# Patch operators
# ----------------------------------------------------------------------------

class IdentityColorize:
    """Replicate the gray patch into all three channels."""

    name = "identity"
    parallel_safe = True

    def apply(self, patch: np.ndarray) -> np.ndarray:
        return np.stack([patch, patch, patch], axis=2)


class LutColorize:
    """Per-pixel 256-entry RGB lookup with linear interpolation between entries."""

    name = "lut"
    parallel_safe = True

    def __init__(self, lut: np.ndarray):
        lut = np.asarray(lut, dtype=np.float64)
        if lut.shape != (256, 3):
            raise ValueError(f"LUT must be 256x3, got {lut.shape}")
        self.lut = lut
        self._xp = np.linspace(0.0, 1.0, 256)

    def apply(self, patch: np.ndarray) -> np.ndarray:
        flat = patch.ravel()
        chans = [np.interp(flat, self._xp, self.lut[:, c]) for c in range(3)]
        return np.stack(chans, axis=1).reshape(patch.shape + (3,))


class ToyConv:
    """One 3x3 cross-correlation plus bias per output channel, mirror boundary."""

    name = "toyconv"
    parallel_safe = True

    def __init__(self, kernels: np.ndarray, bias: np.ndarray):
        kernels = np.asarray(kernels, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if kernels.shape != (3, 3, 3) or bias.shape != (3,):
            raise ValueError("toyconv needs three 3x3 kernels and three biases")
        self.kernels = kernels
        self.bias = bias

    def apply(self, patch: np.ndarray) -> np.ndarray:
        outs = [
            ndimage.correlate(patch, self.kernels[c], mode="mirror") + self.bias[c]
            for c in range(3)
        ]
        return np.stack(outs, axis=2)


def load_lut(path: str | Path) -> LutColorize:
    """Read a LUT file: 256 whitespace-separated RGB float triples, '#' comments."""
    vals = _read_floats(path)
    if len(vals) != 256 * 3:
        raise ValueError(f"{path}: expected 768 values, got {len(vals)}")
    return LutColorize(np.array(vals).reshape(256, 3))


def load_toyconv(path: str | Path) -> ToyConv:
    """Read a TOYCONV weights file: header 'TOYCONV 1', then 3 x (9 weights + bias)."""
    path = Path(path)
    text = path.read_text()
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if tokens[:2] != ["TOYCONV", "1"]:
        raise ValueError(f"{path}: missing 'TOYCONV 1' header")
    vals = [float(t) for t in tokens[2:]]
    if len(vals) != 3 * 10:
        raise ValueError(f"{path}: expected 30 values after header, got {len(vals)}")
    kernels = np.empty((3, 3, 3))
    bias = np.empty(3)
    for c in range(3):
        block = vals[c * 10:(c + 1) * 10]
        kernels[c] = np.array(block[:9]).reshape(3, 3)
        bias[c] = block[9]
    return ToyConv(kernels, bias)


def _read_floats(path: str | Path) -> list[float]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        out.extend(float(t) for t in line.split())
    return out


class SubprocessOperator:
    """Patch operator backed by a child process speaking the wire protocol.

    The child is spawned lazily on first use and kept alive across patches;
    close() (or context exit) closes its stdin and requires exit status 0.
    Owns a single pipe, so it is not parallel-safe.
    """

    name = "subprocess"
    parallel_safe = False

    def __init__(self, command: str | list[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ValueError("empty subprocess command")
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        return self._proc

    def _raise_if_dead(self, fallback: wire.WireError):
        # distinguish "child died nonzero" from a plain protocol failure; give
        # an exiting child a moment to be reaped
        if self._proc is not None:
            rc = self._proc.poll()
            if rc is None:
                try:
                    rc = self._proc.wait(timeout=5.0)
                except subprocess.TimeoutExpired:
                    rc = None
            if rc is not None and rc != 0:
                raise wire.ChildExitError(rc) from fallback
        raise fallback

    def apply(self, patch: np.ndarray) -> np.ndarray:
        proc = self._ensure_started()
        try:
            wire.write_frame(proc.stdin, patch)
        except (BrokenPipeError, OSError) as e:
            self._raise_if_dead(wire.WireError(f"cannot write to child: {e}"))
        try:
            reply = wire.read_frame(proc.stdout)
        except wire.ShortReadError as e:
            self._raise_if_dead(e)
        except wire.WireError:
            raise
        if reply.ndim != 3 or reply.shape[2] != 3:
            raise wire.WireError(f"child replied with shape {reply.shape}, expected 3 channels")
        if reply.shape[:2] != patch.shape[:2]:
            raise wire.WireError(
                f"child replied {reply.shape[:2]}, expected {patch.shape[:2]}"
            )
        return reply

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
        rc = proc.wait()
        if proc.stdout is not None:
            proc.stdout.close()
        if rc != 0:
            raise wire.ChildExitError(rc)

    def __enter__(self) -> "SubprocessOperator":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            # already failing; don't mask the original error
            if self._proc is not None:
                self._proc.kill()
                self._proc.wait()
                self._proc = None


# ----------------------------------------------------------------------------
# Translation and diagnostics
# ----------------------------------------------------------------------------

def _resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def tile_translate(
    img: ImageF,
    op,
    patch: int = DEFAULT_PATCH,
    stride: int = DEFAULT_STRIDE,
    epsilon: float = DEFAULT_MASK_FLOOR,
    mask: str = "hann",
    threads: int = 1,
) -> ImageF:
    """Translate a gray image to RGB patch by patch with feathered blending."""
    if img.channels != 1:
        raise ValueError("tile_translate expects a single-channel image")
    if mask not in ("hann", "box"):
        raise ValueError(f"mask must be 'hann' or 'box', got {mask!r}")
    grid = compute_grid(img.height, img.width, patch, stride)
    padded = pad_reflect(img, grid).data
    weights = hann_mask(patch, epsilon).weights if mask == "hann" else np.ones((patch, patch))

    acc = np.zeros((grid.padded_h, grid.padded_w, 3))
    wacc = np.zeros((grid.padded_h, grid.padded_w))
    patches = [padded[y:y + patch, x:x + patch] for (y, x) in grid.origins]

    def predict(p: np.ndarray) -> np.ndarray:
        return op.apply(p)

    threads = _resolve_threads(threads)
    if threads > 1 and getattr(op, "parallel_safe", False):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(predict, patches)
            outputs = _gather(results, grid)
    else:
        outputs = _gather((predict(p) for p in patches), grid)

    w3 = weights[:, :, None]
    for (y, x), out in zip(grid.origins, outputs):
        acc[y:y + patch, x:x + patch] += out * w3
        wacc[y:y + patch, x:x + patch] += weights
    blended = acc / wacc[:, :, None]
    return ImageF(blended[: img.height, : img.width], "SRGB")


def _gather(results, grid: TileGrid) -> list[np.ndarray]:
    it = iter(results)
    outputs = []
    for i in range(len(grid.origins)):
        try:
            out = np.asarray(next(it), dtype=np.float64)
        except Exception as e:  # noqa: BLE001 - annotate with patch index
            raise PatchOperatorError(i, grid.origins[i], str(e)) from e
        if out.shape != (grid.patch, grid.patch, 3):
            raise PatchOperatorError(
                i, grid.origins[i],
                f"operator returned shape {out.shape}, expected {(grid.patch, grid.patch, 3)}",
            )
        if not np.all(np.isfinite(out)):
            raise PatchOperatorError(i, grid.origins[i], "operator returned non-finite values")
        outputs.append(out)
    return outputs


def seam_energy(img: ImageF, grid: TileGrid, band: int = 2) -> dict:
    """Gradient-magnitude variance near interior patch borders vs elsewhere.

    Returns {"boundary_var", "interior_var", "ratio"}; a single-patch grid has
    no interior borders and reports zeros by convention.
    """
    gray = img.data if img.channels == 1 else img.data.mean(axis=2)
    h, w = gray.shape
    lines_y = sorted({y for (y, _) in grid.origins if 0 < y < h}
                     | {y + grid.patch for (y, _) in grid.origins if 0 < y + grid.patch < h})
    lines_x = sorted({x for (_, x) in grid.origins if 0 < x < w}
                     | {x + grid.patch for (_, x) in grid.origins if 0 < x + grid.patch < w})
    gy, gx = np.gradient(gray)
    mag = np.hypot(gy, gx)
    if not lines_y and not lines_x:
        return {"boundary_var": 0.0, "interior_var": float(mag.var()), "ratio": 0.0}
    rows = np.zeros(h, dtype=bool)
    for y in lines_y:
        rows[max(0, y - band): y + band + 1] = True
    cols = np.zeros(w, dtype=bool)
    for x in lines_x:
        cols[max(0, x - band): x + band + 1] = True
    boundary = rows[:, None] | cols[None, :]
    bvals = mag[boundary]
    ivals = mag[~boundary]
    bvar = float(bvals.var()) if bvals.size else 0.0
    ivar = float(ivals.var()) if ivals.size else 0.0
    return {"boundary_var": bvar, "interior_var": ivar,
            "ratio": bvar / (ivar + 1e-12)}
