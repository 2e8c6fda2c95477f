"""tilegraft: resolution-invariant patch translation and histogram-aware losses.

A library and CLI for sliding-window image-to-image inference with feathered
(Hann) blending, differentiable soft-histogram/CDF color losses with analytic
gradients, the composite reconstruction objective built on them, and the
PSNR/SSIM/angular-error evaluation metrics.  The per-patch translator is
pluggable (in-process operators or an external worker over a binary stdin/
stdout protocol).
"""

from tilegraft._kernels import BACKEND
from tilegraft.image import (
    ImageF,
    clamp_long_side,
    equalize_hist,
    hsv_to_rgb,
    linear_to_srgb,
    load_image,
    minmax_normalize,
    rgb_to_hsv,
    save_image,
    srgb_to_linear,
)
from tilegraft.losses import (
    FeatureExtractor,
    LossReport,
    ObjectiveWeights,
    RandProjFeatures,
    RecWeights,
    SobelFeatures,
    feature_cosine,
    feature_l2,
    generator_objective,
    hinge_d,
    hinge_g,
    instance_normalize,
    rec_loss,
    spade_modulate,
)
from tilegraft.metrics import (
    MetricsReport,
    angular_error,
    evaluate_dir,
    evaluate_pair,
    psnr,
    ssim,
)
from tilegraft.softhist import (
    HistConfig,
    SoftHistogram,
    cdf_loss,
    cdf_loss_grad,
    hard_histogram,
    hist_match_gd,
    soft_histogram,
)
from tilegraft.tiler import (
    FeatherMask,
    IdentityColorize,
    LutColorize,
    PatchOperatorError,
    SubprocessOperator,
    TileGrid,
    ToyConv,
    compute_grid,
    hann_mask,
    load_lut,
    load_toyconv,
    pad_reflect,
    seam_energy,
    tile_translate,
)

__version__ = "0.1.0"
