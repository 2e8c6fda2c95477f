"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -s`)."""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter
from scipy.special import expit

from tilegraft import wire
from tilegraft.image import ImageF, save_image
from tilegraft.losses import (
    LossReport,
    ObjectiveWeights,
    RandProjFeatures,
    RecWeights,
    SobelFeatures,
    generator_objective,
    hinge_d,
    rec_loss,
    spade_modulate,
)
from tilegraft.metrics import angular_error, psnr, ssim
from tilegraft.softhist import (
    cdf_loss,
    cdf_loss_grad,
    hard_histogram,
    hist_match_gd,
    soft_histogram,
)
from tilegraft.tiler import (
    IdentityColorize,
    SubprocessOperator,
    compute_grid,
    seam_energy,
    tile_translate,
)

B, TAU = 64, 0.02


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[ACCEPTANCE] C{num:02d} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# ----------------------------------------------------------------------------
# C1: identity blending exactness
# ----------------------------------------------------------------------------

def test_c01_identity_blending():
    rng = np.random.default_rng(100)
    img = ImageF(rng.random((500, 500)), "Gray")
    t0 = time.perf_counter()
    out = tile_translate(img, IdentityColorize(), patch=256, stride=240,
                         epsilon=1e-4, threads=1)
    elapsed = time.perf_counter() - t0
    dev = float(np.abs(out.data - np.stack([img.data] * 3, axis=2)).max())
    report(1, dev < 1e-5 and elapsed < 2.0,
           f"max deviation {dev:.2e} (<1e-5), runtime {elapsed:.2f}s (<2s)")


# ----------------------------------------------------------------------------
# C2: gradient correctness (independent FD oracle)
# ----------------------------------------------------------------------------

def _oracle_channel_loss(samples: np.ndarray, tgt_cdf: np.ndarray) -> float:
    edges = np.arange(B + 1) / B
    sig = expit((samples[:, None] - edges[None, :]) / TAU)
    raw = (sig[:, :-1] - sig[:, 1:]).sum(axis=0) / samples.size
    cdf = np.cumsum(raw / raw.sum())
    return float(np.abs(cdf - tgt_cdf).sum()) / B


def test_c02_gradient_matches_finite_differences():
    rng = np.random.default_rng(101)
    # fixture kept inside [0.2, 0.8]: the FD oracle at step 1e-3 is inaccurate
    # near the value-domain edges (see decisions ledger); the gradient itself
    # is separately verified over [0, 1] at a smaller step in the unit tests
    pred = ImageF(0.2 + 0.6 * rng.random((64, 64, 3)), "SRGB")
    target = ImageF(0.2 + 0.6 * rng.random((64, 64, 3)) ** 1.3, "SRGB")
    step = 1e-3
    n_samples = 120

    t0 = time.perf_counter()
    analytic = cdf_loss_grad(pred, target, B, TAU, "logistic").data.ravel()
    tgt_cdfs = []
    for c in range(3):
        s = target.data[:, :, c].ravel()
        edges = np.arange(B + 1) / B
        sig = expit((s[:, None] - edges[None, :]) / TAU)
        raw = (sig[:, :-1] - sig[:, 1:]).sum(axis=0) / s.size
        tgt_cdfs.append(np.cumsum(raw / raw.sum()))

    idx = rng.choice(pred.data.size, n_samples, replace=False)
    max_rel = 0.0
    for i in idx:
        c = int(i % 3)
        vec = pred.data[:, :, c].ravel().copy()
        pos = int(i // 3)
        orig = vec[pos]
        vec[pos] = orig + step
        lp = _oracle_channel_loss(vec, tgt_cdfs[c])
        vec[pos] = orig - step
        lm = _oracle_channel_loss(vec, tgt_cdfs[c])
        fd = (lp - lm) / (2 * step) / 3.0
        rel = abs(analytic[i] - fd) / max(abs(analytic[i]), abs(fd), 1e-12)
        max_rel = max(max_rel, rel)
    elapsed = time.perf_counter() - t0
    report(2, max_rel < 1e-4 and elapsed < 5.0,
           f"max rel err {max_rel:.2e} over {n_samples} pixels (<1e-4), "
           f"runtime {elapsed:.2f}s (<5s)")


# ----------------------------------------------------------------------------
# C3: histogram-match optimization
# ----------------------------------------------------------------------------

def test_c03_hist_match_optimization():
    src = ImageF(np.full((128, 128), 0.2), "Gray")
    tgt = ImageF(np.full((128, 128), 0.8), "Gray")
    t0 = time.perf_counter()
    _, trace = hist_match_gd(src, tgt, steps=500, lr=0.5)
    elapsed = time.perf_counter() - t0
    ratio = trace[-1] / trace[0]
    report(3, ratio <= 0.10 and elapsed < 30.0,
           f"final/initial loss {ratio:.4f} (<=0.10) in {len(trace) - 1} steps, "
           f"runtime {elapsed:.2f}s (<30s)")


# ----------------------------------------------------------------------------
# C4: soft/hard histogram consistency
# ----------------------------------------------------------------------------

def test_c04_soft_hard_consistency():
    rng = np.random.default_rng(42)
    x = rng.random(512 * 512)
    hard = hard_histogram(x, B)
    dists = [float(np.abs(soft_histogram(x, B, tau, "logistic").mass - hard).sum())
             for tau in (0.05, 0.02, 0.005)]
    tri = float(np.abs(soft_histogram(x, B, TAU, "triangular").mass - hard).sum())
    ok = dists[1] < 0.05 and dists[0] > dists[1] > dists[2] and tri < 0.05
    report(4, ok,
           f"L1(tau=0.02) logistic {dists[1]:.4f}, triangular {tri:.4f} (<0.05); "
           f"sweep {[round(d, 4) for d in dists]} monotone")


# ----------------------------------------------------------------------------
# C5: feathering reduces seams
# ----------------------------------------------------------------------------

class _AlternatingLut:
    name = "altlut"
    parallel_safe = False

    def __init__(self):
        self.count = 0

    def apply(self, patch):
        off = 0.1 if self.count % 2 == 0 else 0.0
        self.count += 1
        return np.stack([np.clip(patch + off, 0.0, 1.1)] * 3, axis=2)


def test_c05_feathering_reduces_seams():
    rng = np.random.default_rng(102)
    img = ImageF(gaussian_filter(rng.random((600, 520)), 3.0), "Gray")
    details = []
    ok = True
    for stride in (222, 240):
        grid = compute_grid(600, 520, 256, stride)
        ratios = {}
        for mask in ("hann", "box"):
            out = tile_translate(img, _AlternatingLut(), patch=256, stride=stride,
                                 mask=mask)
            ratios[mask] = seam_energy(out, grid)["ratio"]
        ok = ok and ratios["hann"] < ratios["box"]
        details.append(f"S={stride}: hann {ratios['hann']:.3f} < box {ratios['box']:.3f}")
    report(5, ok, "; ".join(details))


# ----------------------------------------------------------------------------
# C6: metric identities
# ----------------------------------------------------------------------------

def test_c06_metric_identities():
    rng = np.random.default_rng(103)
    x = ImageF(0.05 + 0.45 * rng.random((32, 32, 3)), "SRGB")
    doubled = ImageF(2.0 * x.data, "SRGB")  # values <= 1, no clipping
    a = ImageF(rng.random((24, 24)), "Gray")
    b = ImageF(rng.random((24, 24)), "Gray")
    checks = {
        "psnr(x,x)=99": psnr(x, x) == 99.0,
        "ssim(x,x)=1": abs(ssim(x, x) - 1.0) < 1e-6,
        "ae(x,x)=0": angular_error(x, x) < 1e-6,
        "ae(x,2x)=0": angular_error(x, doubled) < 1e-5,
        "ssim symmetry": abs(ssim(a, b) - ssim(b, a)) < 1e-9,
    }
    report(6, all(checks.values()),
           ", ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items()))


# ----------------------------------------------------------------------------
# C7: loss algebra
# ----------------------------------------------------------------------------

def test_c07_loss_algebra():
    rng = np.random.default_rng(104)
    img = ImageF(rng.random((32, 32, 3)), "SRGB")
    zero_sobel = rec_loss(img, img, RecWeights(), SobelFeatures(), RandProjFeatures())
    zero_rand = rec_loss(img, img, RecWeights(), RandProjFeatures(3), RandProjFeatures(4))
    unit = LossReport.from_terms(
        {"feature_l2": 1.0, "cosine": 1.0, "cdf": 1.0, "perceptual": 1.0},
        {"feature_l2": 1.0, "cosine": 1.0, "cdf": 1.5, "perceptual": 0.2},
    )
    rec02 = LossReport.from_terms({"cdf": 0.2}, {"cdf": 1.0})
    gen = generator_objective(1.0, 0.1, 0.1, rec02, rec02, ObjectiveWeights(1.0, 15.0, 15.0))
    checks = {
        "rec(x,x)=0 sobel": abs(zero_sobel.total) < 1e-9,
        "rec(x,x)=0 randproj": abs(zero_rand.total) < 1e-9,
        "unit terms -> 3.7": abs(unit.total - 3.7) < 1e-9,
        "generator -> 10.0": abs(gen.total - 10.0) < 1e-9,
        "hinge(1,-1)=0": hinge_d([1.0], [-1.0]) == 0.0,
        "hinge(0,0)=2": hinge_d([0.0], [0.0]) == 2.0,
    }
    report(7, all(checks.values()),
           ", ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in checks.items()))


# ----------------------------------------------------------------------------
# C8: SPADE identity
# ----------------------------------------------------------------------------

def test_c08_spade_identity():
    rng = np.random.default_rng(105)
    feats = rng.standard_normal((16, 12, 8))
    out = spade_modulate(feats, np.ones_like(feats), np.zeros_like(feats))
    ok = np.array_equal(out, feats)
    report(8, ok, "spade(F, 1, 0) == F bitwise on random F")


# ----------------------------------------------------------------------------
# C9: grid oracle
# ----------------------------------------------------------------------------

def _brute_force_grid(h, w, p, s):
    def axis(extent):
        k = 0
        while p + k * s < extent:
            k += 1
        return p + k * s, [a * s for a in range(k + 1)]

    ph, ys = axis(h)
    pw, xs = axis(w)
    return ph, pw, [(y, x) for y in ys for x in xs]


def test_c09_grid_oracle():
    rng = np.random.default_rng(106)
    cases = []
    for _ in range(196):
        p = int(rng.integers(8, 400))
        s = int(rng.integers(1, p + 1))
        h = int(rng.integers(1, 1500))
        w = int(rng.integers(1, 1500))
        cases.append((h, w, p, s))
    # pinned edge cases: smaller than a patch, and exact fits
    cases += [(100, 100, 256, 240), (256, 256, 256, 240), (736, 736, 256, 240),
              (8, 2000, 8, 8)]
    coverage_checked = 0
    for h, w, p, s in cases:
        g = compute_grid(h, w, p, s)
        ph, pw, origins = _brute_force_grid(h, w, p, s)
        assert (g.padded_h, g.padded_w) == (ph, pw), (h, w, p, s)
        assert g.origins == origins, (h, w, p, s)
        if g.padded_h * g.padded_w <= 1024 * 1024:
            cover = np.zeros((g.padded_h, g.padded_w), dtype=bool)
            for (y, x) in g.origins:
                cover[y:y + p, x:x + p] = True
            assert cover.all(), (h, w, p, s)
            coverage_checked += 1
    report(9, True,
           f"{len(cases)} grids matched brute force; "
           f"{coverage_checked} verified pixel-exhaustively")


# ----------------------------------------------------------------------------
# C10: wire protocol roundtrip
# ----------------------------------------------------------------------------

def test_c10_wire_roundtrip():
    echo = [sys.executable, "-m", "tilegraft.echo_model"]
    rng = np.random.default_rng(107)
    patch = rng.integers(0, 257, size=(32, 32)).astype(np.float64) / 256.0
    with SubprocessOperator(echo) as op:
        got = op.apply(patch)
    bitwise = np.array_equal(got, IdentityColorize().apply(patch))

    with pytest.raises(wire.BadMagicError):
        with SubprocessOperator(echo + ["--corrupt-magic"]) as op:
            op.apply(patch)
    with pytest.raises(wire.ShortReadError):
        with SubprocessOperator(echo + ["--truncate"]) as op:
            op.apply(patch)
    report(10, bitwise,
           "echo == identity bitwise; BadMagicError and ShortReadError raised")


# ----------------------------------------------------------------------------
# C11: CLI determinism across thread counts
# ----------------------------------------------------------------------------

def test_c11_cli_determinism(tmp_path):
    rng = np.random.default_rng(108)
    src = tmp_path / "in.png"
    save_image(ImageF(rng.random((300, 280)), "Gray"), src, 8)
    blobs = []
    for threads in ("1", "8"):
        out = tmp_path / f"out{threads}.png"
        env = dict(os.environ, TILEGRAFT_THREADS=threads)
        proc = subprocess.run(
            [sys.executable, "-m", "tilegraft", "translate", str(src), str(out),
             "--op", "identity"],
            env=env, capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        blobs.append(out.read_bytes())
    report(11, blobs[0] == blobs[1],
           "TILEGRAFT_THREADS=1 and =8 produce bitwise-identical PNGs")
