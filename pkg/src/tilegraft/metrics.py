"""Image quality metrics: PSNR, windowed SSIM, and angular error.

PSNR is 10*log10(MAX^2 / MSE), capped at 99 dB so identical images stay
JSON-friendly.  SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with
C1 = (0.01*L)^2, C2 = (0.03*L)^2 at L = 1, evaluated on the valid region and
averaged over channels.  Angular error is the mean per-pixel angle in degrees
between RGB vectors, skipping near-black pixels where the angle is undefined;
it is invariant to per-pixel intensity scaling.  LPIPS is intentionally not
computed (it needs a pretrained network) and is reported as null.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from tilegraft.image import ImageF, eotf_srgb, load_image

PSNR_CAP = 99.0


@dataclass
class MetricsReport:
    psnr_db: float
    ssim: float
    ae_deg: float
    n_pixels: int

    def to_json(self) -> dict:
        return {
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "ae_deg": self.ae_deg,
            "n_pixels": self.n_pixels,
            "lpips": None,
        }


def _check_shapes(a: ImageF, b: ImageF) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")


def psnr(a: ImageF, b: ImageF, max_i: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over all samples, capped at 99."""
    _check_shapes(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(max_i * max_i / mse))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


_SSIM_WIN = _gaussian_window()


def ssim(a: ImageF, b: ImageF) -> float:
    """Mean local SSIM over valid 11x11 Gaussian windows and channels (L = 1)."""
    _check_shapes(a, b)
    if a.height < 11 or a.width < 11:
        raise ValueError("ssim needs images at least 11x11")
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    vals = []
    for pa, pb in zip(a.planes(), b.planes()):
        mu_a = convolve2d(pa, _SSIM_WIN, mode="valid")
        mu_b = convolve2d(pb, _SSIM_WIN, mode="valid")
        s_aa = convolve2d(pa * pa, _SSIM_WIN, mode="valid") - mu_a * mu_a
        s_bb = convolve2d(pb * pb, _SSIM_WIN, mode="valid") - mu_b * mu_b
        s_ab = convolve2d(pa * pb, _SSIM_WIN, mode="valid") - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * s_ab + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (s_aa + s_bb + c2)
        vals.append(num / den)
    return float(np.mean(vals))


def angular_error(pred: ImageF, gt: ImageF) -> float:
    """Mean per-pixel RGB vector angle in degrees; near-black pixels are skipped."""
    _check_shapes(pred, gt)
    if pred.channels != 3:
        raise ValueError("angular_error needs 3-channel images")
    p = pred.data.reshape(-1, 3)
    g = gt.data.reshape(-1, 3)
    np_norm = np.linalg.norm(p, axis=1)
    ng_norm = np.linalg.norm(g, axis=1)
    valid = (np_norm >= 1e-8) & (ng_norm >= 1e-8)
    if not np.any(valid):
        raise ValueError("all pixels are degenerate (near-black)")
    cosang = np.einsum("ij,ij->i", p[valid], g[valid]) / (np_norm[valid] * ng_norm[valid])
    ang = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return float(ang.mean())


# ----------------------------------------------------------------------------
# File and directory evaluation
# ----------------------------------------------------------------------------

def _maybe_linear(img: ImageF, linear: bool) -> ImageF:
    if not linear:
        return img
    # apply the sRGB EOTF samplewise; meaningful for encoded inputs
    return ImageF(eotf_srgb(img.data), "LinearRGB" if img.channels == 3 else "Gray")


def evaluate_images(pred: ImageF, gt: ImageF) -> MetricsReport:
    _check_shapes(pred, gt)
    if pred.channels == 3:
        ae = angular_error(pred, gt)
    else:
        ae = 0.0  # gray vectors replicate to parallel RGB, angle is identically 0
    return MetricsReport(
        psnr_db=psnr(pred, gt),
        ssim=ssim(pred, gt),
        ae_deg=ae,
        n_pixels=pred.height * pred.width,
    )


def evaluate_pair(pred_path: str | Path, gt_path: str | Path,
                  linear: bool = False) -> MetricsReport:
    """Load two files and compute all metrics; shapes must match."""
    pred = _maybe_linear(load_image(pred_path), linear)
    gt = _maybe_linear(load_image(gt_path), linear)
    return evaluate_images(pred, gt)


_IMAGE_SUFFIXES = (".png", ".pfm")


def _stems(directory: Path) -> dict[str, Path]:
    out = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file():
            out[p.stem] = p
    return out


def evaluate_dir(pred_dir: str | Path, gt_dir: str | Path,
                 linear: bool = False) -> tuple[list[tuple[str, MetricsReport]], dict, list[str]]:
    """Evaluate same-stem file pairs across two directories.

    Returns (per-pair reports, aggregate mean/std, skipped stems).  Stems
    present in only one directory are skipped, not fatal.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = _stems(pred_dir)
    gts = _stems(gt_dir)
    skipped = sorted(set(preds) ^ set(gts))
    reports = []
    for stem in sorted(set(preds) & set(gts)):
        reports.append((stem, evaluate_pair(preds[stem], gts[stem], linear)))
    aggregate = {}
    for key in ("psnr_db", "ssim", "ae_deg"):
        vals = np.array([getattr(r, key) for _, r in reports])
        if vals.size:
            aggregate[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        else:
            aggregate[key] = {"mean": None, "std": None}
    return reports, aggregate, skipped


def report_json(reports: list[tuple[str, MetricsReport]], aggregate: dict,
                skipped: list[str]) -> dict:
    return {
        "pairs": [{"name": name, **rep.to_json()} for name, rep in reports],
        "aggregate": aggregate,
        "skipped": list(skipped),
    }
