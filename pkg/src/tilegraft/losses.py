"""Composite reconstruction loss, hinge adversarial losses, and SPADE modulation.

The reconstruction loss combines four terms over a prediction/target pair:

  total = alpha * feature_l2(texture) + gamma * (1 - cos)(texture)
        + beta * cdf_loss + delta * feature_l2(semantic)

with defaults (alpha, beta, gamma, delta) = (1.0, 1.5, 1.0, 0.2).  Feature
vectors are instance-normalized before either distance; the L2 term is the
*mean* squared difference so values are comparable across extractors of
different output length.

Feature extraction is pluggable: any object with a ``name`` and an
``extract(img) -> 1-D float array`` method works.  Two deterministic
reference extractors ship here (Sobel gradients, fixed-seed random
projections); they stand in for learned networks, which are out of scope,
while keeping every loss formula exercised end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from tilegraft.image import ImageF
from tilegraft.softhist import HistConfig, cdf_loss


@runtime_checkable
class FeatureExtractor(Protocol):
    name: str

    def extract(self, img: ImageF) -> np.ndarray: ...


@dataclass
class RecWeights:
    """Weights of the four reconstruction terms."""

    alpha: float = 1.0   # texture feature L2
    beta: float = 1.5    # CDF color prior
    gamma: float = 1.0   # texture cosine
    delta: float = 0.2   # semantic feature L2

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta) < 0:
            raise ValueError("reconstruction weights must be nonnegative")


@dataclass
class ObjectiveWeights:
    """Top-level generator objective weights (adv : mse : feat defaults 1 : 15 : 15)."""

    lambda_adv: float = 1.0
    lambda_mse: float = 15.0
    lambda_feat: float = 15.0

    def __post_init__(self):
        if min(self.lambda_adv, self.lambda_mse, self.lambda_feat) < 0:
            raise ValueError("objective weights must be nonnegative")


@dataclass
class LossReport:
    """Weighted-sum breakdown: total == sum_k weights[k] * terms[k]."""

    total: float
    terms: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_terms(cls, terms: dict[str, float], weights: dict[str, float]) -> "LossReport":
        total = sum(weights[k] * terms[k] for k in terms)
        return cls(total=float(total), terms=dict(terms), weights=dict(weights))

    def to_json(self) -> dict:
        return {"total": self.total, "terms": dict(self.terms)}


# ----------------------------------------------------------------------------
# Feature distances
# ----------------------------------------------------------------------------

def instance_normalize(v: np.ndarray) -> np.ndarray:
    """Standardize a feature vector: (v - mean) / max(std, 1e-6)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError("instance_normalize needs at least 2 elements")
    return (v - v.mean()) / max(float(v.std()), 1e-6)


def _normalized_pair(a: ImageF, b: ImageF, fx: FeatureExtractor) -> tuple[np.ndarray, np.ndarray]:
    u = instance_normalize(fx.extract(a))
    w = instance_normalize(fx.extract(b))
    if u.shape != w.shape:
        raise ValueError(
            f"extractor {fx.name!r} output length mismatch: {u.size} vs {w.size}"
        )
    return u, w


def feature_l2(a: ImageF, b: ImageF, fx: FeatureExtractor) -> float:
    """Mean squared difference of instance-normalized features."""
    u, w = _normalized_pair(a, b, fx)
    return float(np.mean((u - w) ** 2))


def feature_cosine(a: ImageF, b: ImageF, fx: FeatureExtractor) -> float:
    """1 - cosine similarity of instance-normalized features; 1 for degenerate norms."""
    u, w = _normalized_pair(a, b, fx)
    nu = float(np.linalg.norm(u))
    nw = float(np.linalg.norm(w))
    if nu < 1e-12 or nw < 1e-12:
        return 1.0
    return 1.0 - float(np.dot(u, w)) / (nu * nw)


# ----------------------------------------------------------------------------
# Loss compositions
# ----------------------------------------------------------------------------

def rec_loss(
    pred: ImageF,
    target: ImageF,
    w: RecWeights,
    texture_fx: FeatureExtractor,
    semantic_fx: FeatureExtractor,
    hist: HistConfig | None = None,
) -> LossReport:
    """Composite reconstruction loss; terms are stored unweighted."""
    hist = hist or HistConfig()
    terms = {
        "feature_l2": feature_l2(pred, target, texture_fx),
        "cosine": feature_cosine(pred, target, texture_fx),
        "cdf": cdf_loss(pred, target, hist.bins, hist.tau, hist.kernel),
        "perceptual": feature_l2(pred, target, semantic_fx),
    }
    weights = {
        "feature_l2": w.alpha,
        "cosine": w.gamma,
        "cdf": w.beta,
        "perceptual": w.delta,
    }
    return LossReport.from_terms(terms, weights)


def hinge_d(real_scores, fake_scores) -> float:
    """Critic hinge loss: mean(max(0, 1 - r)) + mean(max(0, 1 + f))."""
    r = np.asarray(real_scores, dtype=np.float64).ravel()
    f = np.asarray(fake_scores, dtype=np.float64).ravel()
    if r.size == 0 or f.size == 0:
        raise ValueError("hinge_d needs non-empty score lists")
    return float(np.maximum(0.0, 1.0 - r).mean() + np.maximum(0.0, 1.0 + f).mean())


def hinge_g(fake_scores) -> float:
    """Generator hinge loss: -mean(f)."""
    f = np.asarray(fake_scores, dtype=np.float64).ravel()
    if f.size == 0:
        raise ValueError("hinge_g needs a non-empty score list")
    return float(-f.mean())


def generator_objective(
    adv: float,
    mse_rgb: float,
    mse_hsv: float,
    rec_rgb: LossReport,
    rec_hsv: LossReport,
    w: ObjectiveWeights,
) -> LossReport:
    """Full objective: lambda_adv*adv + lambda_mse*(mse terms) + lambda_feat*(rec totals)."""
    for name, val in (("adv", adv), ("mse_rgb", mse_rgb), ("mse_hsv", mse_hsv)):
        if not np.isfinite(val):
            raise ValueError(f"non-finite component {name}")
    terms = {
        "adv": float(adv),
        "mse_rgb": float(mse_rgb),
        "mse_hsv": float(mse_hsv),
        "rec_rgb": rec_rgb.total,
        "rec_hsv": rec_hsv.total,
    }
    weights = {
        "adv": w.lambda_adv,
        "mse_rgb": w.lambda_mse,
        "mse_hsv": w.lambda_mse,
        "rec_rgb": w.lambda_feat,
        "rec_hsv": w.lambda_feat,
    }
    return LossReport.from_terms(terms, weights)


def spade_modulate(features: np.ndarray, gamma_map: np.ndarray, beta_map: np.ndarray) -> np.ndarray:
    """Spatially adaptive modulation: gamma ⊙ F + beta, elementwise."""
    features = np.asarray(features, dtype=np.float64)
    gamma_map = np.asarray(gamma_map, dtype=np.float64)
    beta_map = np.asarray(beta_map, dtype=np.float64)
    if not (features.shape == gamma_map.shape == beta_map.shape):
        raise ValueError(
            f"shape mismatch: {features.shape}, {gamma_map.shape}, {beta_map.shape}"
        )
    return gamma_map * features + beta_map


# ----------------------------------------------------------------------------
# Reference feature extractors
# ----------------------------------------------------------------------------

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def _block_mean(a: np.ndarray, k: int) -> np.ndarray:
    # crop to a multiple of k, then average k x k blocks
    h = (a.shape[0] // k) * k
    w = (a.shape[1] // k) * k
    return a[:h, :w].reshape(h // k, k, w // k, k).mean(axis=(1, 3))


def _check_min_size(img: ImageF, k: int) -> None:
    if img.height < k or img.width < k:
        raise ValueError(f"image smaller than {k}x{k}")


class SobelFeatures:
    """Horizontal/vertical Sobel responses, 4x block-averaged and concatenated."""

    name = "sobel"

    def extract(self, img: ImageF) -> np.ndarray:
        _check_min_size(img, 8)
        gx = []
        gy = []
        for plane in img.planes():
            gx.append(_block_mean(ndimage.correlate(plane, _SOBEL_X, mode="mirror"), 4))
            gy.append(_block_mean(ndimage.correlate(plane, _SOBEL_X.T, mode="mirror"), 4))
        return np.concatenate([g.ravel() for g in gx + gy])


MASK64 = (1 << 64) - 1
_XS_MULT = 2685821657736338717  # 0x2545F4914F6CDD1D
_GOLDEN = 0x9E3779B97F4A7C15


def _xorshift64s_floats(seed: int, count: int) -> np.ndarray:
    """xorshift64* stream mapped to [-1, 1); fully pinned so all builds agree.

    State starts at (seed XOR 0x9E3779B97F4A7C15), replaced by the constant
    itself if that is zero.  Each draw applies shifts 12/25/27, multiplies by
    0x2545F4914F6CDD1D, keeps the top 53 bits as a [0, 1) float, then maps to
    [-1, 1).
    """
    state = (int(seed) ^ _GOLDEN) & MASK64
    if state == 0:
        state = _GOLDEN
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        state ^= state >> 12
        state = (state ^ (state << 25)) & MASK64
        state ^= state >> 27
        word = (state * _XS_MULT) & MASK64
        out[i] = (word >> 11) * 2.0 ** -53 * 2.0 - 1.0
    return out


class RandProjFeatures:
    """Fixed-seed bank of 8 random 3x3 filters on the channel mean, 8x pooled."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.name = f"randproj{self.seed}"
        self.filters = _xorshift64s_floats(self.seed, 8 * 9).reshape(8, 3, 3)

    def extract(self, img: ImageF) -> np.ndarray:
        _check_min_size(img, 8)
        gray = img.data if img.channels == 1 else img.data.mean(axis=2)
        maps = [
            _block_mean(ndimage.correlate(gray, k, mode="mirror"), 8).ravel()
            for k in self.filters
        ]
        return np.concatenate(maps)
