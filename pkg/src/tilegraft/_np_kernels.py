"""Pure-numpy fallback for the histogram hot kernels.

Same contracts as the compiled ``tilegraft._fastk`` extension.  Work is
chunked over samples so memory stays bounded on large images, and chunks are
reduced in a fixed order so results are reproducible run to run.

Kernel conventions (B bins over [0, 1]):
  edges    e_j = j / B for j = 0..B
  centers  c_b = (b + 0.5) / B for b = 0..B-1
  raw mass m_b already carries the 1/N factor but is *not* renormalized.

The gradient kernels compute, per sample i, the derivative of the
per-channel CDF loss  (1/B) * sum_b |H_b - Ht_b|  through the raw mass ->
normalization -> CDF chain.  Callers pass the per-channel reductions:
  tail[j]   = sum_{b >= j} sgn_b          (sgn_b = sign(H_b - Ht_b), sign(0) = 0)
  csum      = sum_b sgn_b * H_b
  mass_sum  = sum_b m_b                   (the normalizer s)
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

_CHUNK = 1 << 16


def _dsigmoid(z: np.ndarray) -> np.ndarray:
    s = expit(z)
    return s * (1.0 - s)


def mass_logistic(samples: np.ndarray, bins: int, tau: float) -> np.ndarray:
    """Raw soft-bin masses with the logistic (sigmoid edge-difference) kernel."""
    edges = np.arange(bins + 1, dtype=np.float64) / bins
    out = np.zeros(bins, dtype=np.float64)
    for lo in range(0, samples.size, _CHUNK):
        y = samples[lo:lo + _CHUNK, None]
        sig = expit((y - edges[None, :]) / tau)
        out += (sig[:, :-1] - sig[:, 1:]).sum(axis=0)
    return out / samples.size


def mass_triangular(samples: np.ndarray, bins: int, tau: float) -> np.ndarray:
    """Raw soft-bin masses with the triangular kernel max(0, 1 - |y - c_b| / tau)."""
    centers = (np.arange(bins, dtype=np.float64) + 0.5) / bins
    out = np.zeros(bins, dtype=np.float64)
    for lo in range(0, samples.size, _CHUNK):
        y = samples[lo:lo + _CHUNK, None]
        out += np.maximum(0.0, 1.0 - np.abs(y - centers[None, :]) / tau).sum(axis=0)
    return out / samples.size


def grad_logistic(
    samples: np.ndarray,
    bins: int,
    tau: float,
    tail: np.ndarray,
    csum: float,
    mass_sum: float,
) -> np.ndarray:
    """Per-sample gradient of the per-channel CDF loss, logistic kernel.

    Uses the telescoped cumulative form: with u_j = (y - e_j)/tau,
      g_i = (1/(B*s*N*tau)) * [ sum_j tail[j]*(sig'(u_j) - sig'(u_{j+1}))
                                - csum*(sig'(u_0) - sig'(u_B)) ].
    """
    edges = np.arange(bins + 1, dtype=np.float64) / bins
    n = samples.size
    out = np.empty(n, dtype=np.float64)
    scale = 1.0 / (bins * mass_sum * n * tau)
    for lo in range(0, n, _CHUNK):
        y = samples[lo:lo + _CHUNK, None]
        ds = _dsigmoid((y - edges[None, :]) / tau)
        t1 = (ds[:, :-1] - ds[:, 1:]) @ tail
        t2 = csum * (ds[:, 0] - ds[:, -1])
        out[lo:lo + _CHUNK] = scale * (t1 - t2)
    return out


def grad_triangular(
    samples: np.ndarray,
    bins: int,
    tau: float,
    tail: np.ndarray,
    csum: float,
    mass_sum: float,
) -> np.ndarray:
    """Per-sample gradient of the per-channel CDF loss, triangular kernel.

    Piecewise-linear kernel: d m_j / d y_i = -sign(y_i - c_j)/(N*tau) inside
    the support |y_i - c_j| < tau, zero outside (subgradient 0 at kinks).
    """
    centers = (np.arange(bins, dtype=np.float64) + 0.5) / bins
    n = samples.size
    out = np.empty(n, dtype=np.float64)
    scale = 1.0 / (bins * mass_sum * n * tau)
    for lo in range(0, n, _CHUNK):
        y = samples[lo:lo + _CHUNK, None]
        d = y - centers[None, :]
        dmat = np.where(np.abs(d) < tau, -np.sign(d), 0.0)
        t1 = dmat @ tail
        t2 = csum * dmat.sum(axis=1)
        out[lo:lo + _CHUNK] = scale * (t1 - t2)
    return out
