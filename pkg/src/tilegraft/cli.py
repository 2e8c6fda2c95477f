"""Command-line interface.

Subcommands: translate, metrics, hist, gradcheck, equalize, resize.
Diagnostic output is JSON on stdout; log lines go to stderr.  Exit codes:
0 success, 1 hard error, 2 partial success (skipped pairs).  The
TILEGRAFT_THREADS environment variable caps patch/pair parallelism
(0 = auto); every command is deterministic for fixed inputs, flags, and
seeds regardless of thread count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tilegraft import metrics as metrics_mod
from tilegraft import softhist, tiler
from tilegraft.image import ImageF, clamp_long_side, equalize_hist, load_image, save_image
from tilegraft.losses import RandProjFeatures, RecWeights, SobelFeatures, rec_loss


@dataclass
class RunConfig:
    """Defaults follow the reference operating point: P=256, S in {222, 240},
    64 histogram bins at tau=0.02 with the logistic kernel."""

    patch_size: int = tiler.DEFAULT_PATCH
    stride: int = tiler.DEFAULT_STRIDE
    mask_floor: float = tiler.DEFAULT_MASK_FLOOR
    kernel: str = "logistic"
    bins: int = softhist.DEFAULT_BINS
    tau: float = softhist.DEFAULT_TAU
    operator: str = "identity"


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    raw = json.loads(Path(path).read_text())
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**raw)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _threads_from_env() -> int:
    raw = os.environ.get("TILEGRAFT_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def _pick(flag, cfg_value):
    return cfg_value if flag is None else flag


def _depth_for(path: str, depth_flag: str) -> int | str:
    if str(path).lower().endswith(".pfm"):
        return "float"
    return int(depth_flag)


def resolve_operator(spec: str):
    """Operator mini-grammar: identity | lut:FILE | toyconv:FILE | subprocess:CMD."""
    name, _, arg = spec.partition(":")
    if name == "identity":
        return tiler.IdentityColorize()
    if name == "lut":
        if not arg:
            raise ValueError("lut operator needs a file: lut:FILE")
        return tiler.load_lut(arg)
    if name == "toyconv":
        if not arg:
            raise ValueError("toyconv operator needs a file: toyconv:FILE")
        return tiler.load_toyconv(arg)
    if name == "subprocess":
        if not arg:
            raise ValueError("subprocess operator needs a command: subprocess:CMD")
        return tiler.SubprocessOperator(arg)
    raise ValueError(f"unknown operator {name!r}")


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------

def cmd_translate(args) -> int:
    cfg = load_config(args.config)
    patch = _pick(args.patch, cfg.patch_size)
    stride = _pick(args.stride, cfg.stride)
    floor = _pick(args.mask_floor, cfg.mask_floor)
    op_spec = _pick(args.op, cfg.operator)
    threads = args.threads if args.threads is not None else _threads_from_env()

    img = load_image(args.input)
    if img.channels != 1:
        raise ValueError("translate expects a single-channel (gray) input image")

    op = resolve_operator(op_spec)

    def run(s: int) -> ImageF:
        _log(f"translate: {img.width}x{img.height} patch={patch} stride={s} "
             f"mask={args.mask} op={op_spec}")
        return tiler.tile_translate(
            img, op, patch=patch, stride=s, epsilon=floor,
            mask=args.mask, threads=threads,
        )

    try:
        report = None
        if args.stride_sweep:
            report = {}
            main_out = None
            for s in tiler.STRIDE_PRESETS:
                out = run(s)
                grid = tiler.compute_grid(img.height, img.width, patch, s)
                report[str(s)] = tiler.seam_energy(out, grid, band=args.seam_band)
                if s == stride:
                    main_out = out
            if main_out is None:
                main_out = run(stride)
            out = main_out
        else:
            out = run(stride)
            if args.seam_report:
                grid = tiler.compute_grid(img.height, img.width, patch, stride)
                report = tiler.seam_energy(out, grid, band=args.seam_band)
    finally:
        if hasattr(op, "close"):
            op.close()

    save_image(out, args.output, _depth_for(args.output, args.depth))
    if report is not None:
        if args.seam_report:
            Path(args.seam_report).write_text(json.dumps(report, indent=2))
        if args.stride_sweep:
            _emit(report)
    return 0


def cmd_metrics(args) -> int:
    pred, gt = Path(args.pred), Path(args.gt)
    if pred.is_dir() and gt.is_dir():
        reports, aggregate, skipped = metrics_mod.evaluate_dir(pred, gt, args.linear)
    elif pred.is_file() and gt.is_file():
        rep = metrics_mod.evaluate_pair(pred, gt, args.linear)
        reports, skipped = [(pred.stem, rep)], []
        aggregate = {
            key: {"mean": getattr(rep, key), "std": 0.0}
            for key in ("psnr_db", "ssim", "ae_deg")
        }
    else:
        raise ValueError("metrics needs two files or two directories")
    _emit(metrics_mod.report_json(reports, aggregate, skipped))
    if skipped:
        _log(f"metrics: skipped {len(skipped)} unmatched stem(s)")
        return 2
    return 0


def _hist_payload(img: ImageF, bins: int, tau: float, kernel: str) -> dict:
    per_channel = [
        softhist.soft_histogram(p.ravel(), bins, tau, kernel) for p in img.planes()
    ]
    if len(per_channel) == 1:
        h = per_channel[0].mass.tolist()
        cdf = per_channel[0].cdf.tolist()
    else:
        h = [sh.mass.tolist() for sh in per_channel]
        cdf = [sh.cdf.tolist() for sh in per_channel]
    return {"bins": bins, "tau": tau, "kernel": kernel, "h": h, "H": cdf}


def cmd_hist(args) -> int:
    cfg = load_config(args.config)
    bins = _pick(args.bins, cfg.bins)
    tau = _pick(args.tau, cfg.tau)
    kernel = _pick(args.kernel, cfg.kernel)

    if args.paths and args.paths[0] == "match":
        if len(args.paths) != 3:
            raise ValueError("usage: hist match SRC TARGET")
        src = load_image(args.paths[1])
        tgt = load_image(args.paths[2])
        matched, trace = softhist.hist_match_gd(
            src, tgt, steps=args.steps, lr=args.lr,
            bins=bins, tau=tau, kernel=kernel,
        )
        out_path = args.out or str(
            Path(args.paths[1]).with_name(Path(args.paths[1]).stem + "_matched.png")
        )
        save_image(matched, out_path, _depth_for(out_path, args.depth))
        payload = {
            "bins": bins, "tau": tau, "kernel": kernel,
            "steps": len(trace) - 1,
            "initial_loss": trace[0], "final_loss": trace[-1],
            "loss_trace": trace, "output": str(out_path),
        }
        if args.trace:
            Path(args.trace).write_text(json.dumps(payload, indent=2))
        _emit(payload)
        return 0

    if len(args.paths) not in (1, 2):
        raise ValueError("usage: hist IMG [TARGET] | hist match SRC TARGET")
    img = load_image(args.paths[0])
    payload = _hist_payload(img, bins, tau, kernel)
    if len(args.paths) == 2:
        target = load_image(args.paths[1])
        payload["loss"] = softhist.cdf_loss(img, target, bins, tau, kernel)
        if args.rec:
            report = rec_loss(
                img, target, RecWeights(), SobelFeatures(), RandProjFeatures(),
                softhist.HistConfig(bins, tau, kernel),
            )
            payload["rec_loss"] = report.to_json()
    _emit(payload)
    return 0


def _triangular_breakpoint_ok(values: np.ndarray, bins: int, tau: float,
                              margin: float) -> np.ndarray:
    centers = (np.arange(bins) + 0.5) / bins
    bps = np.concatenate([centers, centers - tau, centers + tau])
    dist = np.abs(values[:, None] - bps[None, :]).min(axis=1)
    return dist > margin


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config)
    bins = _pick(args.bins, cfg.bins)
    tau = _pick(args.tau, cfg.tau)
    kernel = _pick(args.kernel, cfg.kernel)
    if not (0.0 <= args.lo < args.hi <= 1.0):
        raise ValueError("need 0 <= lo < hi <= 1")

    rng = np.random.default_rng(args.seed)
    shape = (args.size, args.size, 3)
    span = args.hi - args.lo
    pred = ImageF(args.lo + span * rng.random(shape), "SRGB")
    target = ImageF(args.lo + span * rng.random(shape) ** 1.3, "SRGB")

    analytic = softhist.cdf_loss_grad(pred, target, bins, tau, kernel).data.ravel()
    flat = pred.data.ravel()

    candidates = np.arange(flat.size)
    if kernel == "triangular":
        # central differences are invalid across the kernel's kink points
        ok = _triangular_breakpoint_ok(flat, bins, tau, max(args.step, 1e-3))
        candidates = candidates[ok]
    if candidates.size < args.samples:
        raise ValueError("not enough FD-checkable samples; lower --samples")
    idx = rng.choice(candidates, size=args.samples, replace=False)

    # channels are independent in the loss, so each FD evaluation only needs
    # to rebuild the histogram of the perturbed channel
    chan_vecs = [np.ascontiguousarray(pred.data[:, :, c].ravel()) for c in range(3)]
    tgt_cdfs = [
        softhist.soft_histogram(target.data[:, :, c].ravel(), bins, tau, kernel).cdf
        for c in range(3)
    ]

    def channel_loss(vec: np.ndarray, c: int) -> float:
        hp = softhist.soft_histogram(vec, bins, tau, kernel)
        return float(np.abs(hp.cdf - tgt_cdfs[c]).sum()) / bins

    max_rel = 0.0
    for i in idx:
        c = int(i % 3)
        pos = int(i // 3)
        vec = chan_vecs[c]
        orig = vec[pos]
        vec[pos] = orig + args.step
        lp = channel_loss(vec, c)
        vec[pos] = orig - args.step
        lm = channel_loss(vec, c)
        vec[pos] = orig
        fd = (lp - lm) / (2.0 * args.step) / 3.0
        rel = abs(analytic[i] - fd) / max(abs(analytic[i]), abs(fd), 1e-12)
        max_rel = max(max_rel, rel)

    passed = max_rel < args.threshold
    _emit({
        "kernel": kernel, "bins": bins, "tau": tau,
        "seed": args.seed, "size": args.size, "step": args.step,
        "samples": int(args.samples), "value_range": [args.lo, args.hi],
        "max_rel_err": max_rel, "threshold": args.threshold,
        "pass": bool(passed),
    })
    return 0 if passed else 1


def cmd_equalize(args) -> int:
    img = load_image(args.input)
    if img.channels != 1:
        raise ValueError("equalize expects a single-channel (gray) image")
    save_image(equalize_hist(img), args.output, _depth_for(args.output, args.depth))
    return 0


def cmd_resize(args) -> int:
    img = load_image(args.input)
    save_image(clamp_long_side(img, args.max_side), args.output,
               _depth_for(args.output, args.depth))
    return 0


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tilegraft", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_depth(p):
        p.add_argument("--depth", choices=("8", "16"), default="8",
                       help="PNG bit depth (ignored for .pfm outputs)")

    p = sub.add_parser("translate", help="sliding-window gray->RGB translation")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--op", default=None,
                   help="identity | lut:FILE | toyconv:FILE | subprocess:CMD (default identity)")
    p.add_argument("--patch", type=int, default=None, help="patch size P (default 256)")
    p.add_argument("--stride", type=int, default=None,
                   help="stride S (default 240; 222 is the other preset)")
    p.add_argument("--mask-floor", type=float, default=None,
                   help="feather mask floor epsilon (default 1e-4)")
    p.add_argument("--mask", choices=("hann", "box"), default="hann",
                   help="feather mask shape (default hann)")
    p.add_argument("--seam-report", default=None, metavar="FILE",
                   help="write seam-energy JSON to FILE")
    p.add_argument("--seam-band", type=int, default=2,
                   help="half-width of the boundary band in pixels (default 2)")
    p.add_argument("--stride-sweep", action="store_true",
                   help="run both stride presets (222, 240) and print seam JSON")
    p.add_argument("--threads", type=int, default=None,
                   help="patch-inference threads (default: TILEGRAFT_THREADS, 0 = auto)")
    p.add_argument("--config", default=None, help="JSON config mirroring RunConfig")
    add_depth(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("metrics", help="PSNR/SSIM/angular-error report")
    p.add_argument("pred", help="predicted file or directory")
    p.add_argument("gt", help="ground-truth file or directory")
    p.add_argument("--linear", action="store_true",
                   help="decode sRGB to linear before computing metrics")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("hist", help="soft histogram / CDF loss / histogram matching")
    p.add_argument("paths", nargs="+", metavar="ARG",
                   help="IMG [TARGET], or: match SRC TARGET")
    p.add_argument("--bins", type=int, default=None, help="bin count (default 64)")
    p.add_argument("--tau", type=float, default=None, help="kernel temperature (default 0.02)")
    p.add_argument("--kernel", choices=softhist.KERNELS, default=None,
                   help="soft kernel (default logistic)")
    p.add_argument("--steps", type=int, default=500, help="match mode: descent steps")
    p.add_argument("--lr", type=float, default=0.5, help="match mode: learning rate")
    p.add_argument("--out", default=None, help="match mode: output image path")
    p.add_argument("--trace", default=None, metavar="FILE",
                   help="match mode: also write the loss-trace JSON to FILE")
    p.add_argument("--rec", action="store_true",
                   help="with TARGET: include the full reconstruction-loss breakdown "
                        "(weights 1.0/1.0/1.5/0.2, reference extractors)")
    p.add_argument("--config", default=None, help="JSON config mirroring RunConfig")
    add_depth(p)
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("gradcheck",
                       help="verify the analytic CDF-loss gradient against central differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64, help="test image side (default 64)")
    p.add_argument("--kernel", choices=softhist.KERNELS, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--step", type=float, default=1e-3, help="central-difference step")
    p.add_argument("--samples", type=int, default=128, help="number of sampled pixels")
    p.add_argument("--lo", type=float, default=0.2,
                   help="low end of the fixture value range (default 0.2; the FD oracle "
                        "loses accuracy at the stated step for values near 0/1)")
    p.add_argument("--hi", type=float, default=0.8, help="high end of the fixture range")
    p.add_argument("--threshold", type=float, default=1e-4,
                   help="max allowed relative error (default 1e-4)")
    p.add_argument("--config", default=None, help="JSON config mirroring RunConfig")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("equalize", help="histogram-equalize a gray image")
    p.add_argument("input")
    p.add_argument("output")
    add_depth(p)
    p.set_defaults(func=cmd_equalize)

    p = sub.add_parser("resize", help="clamp the long side by area-average downscaling")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--max-side", type=int, default=512,
                   help="maximum long-side length (default 512)")
    add_depth(p)
    p.set_defaults(func=cmd_resize)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as e:
        _log(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
