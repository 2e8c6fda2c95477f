import cv2
import numpy as np
import pytest

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


def ks_to_uniform(values: np.ndarray, bins: int = 256) -> float:
    # KS distance between the hard-histogram CDF and the uniform CDF
    idx = np.minimum((np.clip(values.ravel(), 0.0, 1.0) * bins).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    cdf = np.cumsum(counts) / idx.size
    return float(np.abs(cdf - np.arange(1, bins + 1) / bins).max())


# ----------------------------------------------------------------------------
# ImageF type
# ----------------------------------------------------------------------------

def test_imagef_invariants():
    img = ImageF(np.zeros((4, 5)), "Gray")
    assert (img.height, img.width, img.channels) == (4, 5, 1)
    with pytest.raises(ValueError):
        ImageF(np.zeros((4, 5)), "SRGB")  # gray data needs Gray tag
    with pytest.raises(ValueError):
        ImageF(np.zeros((4, 5, 3)), "Gray")
    with pytest.raises(ValueError):
        ImageF(np.zeros((4, 5, 2)), "SRGB")
    with pytest.raises(ValueError):
        ImageF(np.full((3, 3), np.nan), "Gray")
    with pytest.raises(ValueError):
        ImageF(np.zeros((0, 3)), "Gray")


# ----------------------------------------------------------------------------
# PNG / PFM I/O
# ----------------------------------------------------------------------------

def test_load_png8_white_is_one(tmp_path):
    path = tmp_path / "w.png"
    cv2.imwrite(str(path), np.full((7, 9), 255, dtype=np.uint8))
    img = load_image(path)
    assert img.channels == 1 and img.space == "Gray"
    assert np.all(img.data == 1.0)


def test_load_png16_zero_pixel(tmp_path):
    path = tmp_path / "z.png"
    raw = np.full((5, 4, 3), 1000, dtype=np.uint16)
    raw[0, 0] = (0, 0, 0)
    cv2.imwrite(str(path), raw)
    img = load_image(path)
    assert img.space == "SRGB"
    assert tuple(img.data[0, 0]) == (0.0, 0.0, 0.0)
    assert np.allclose(img.data[1, 1], 1000 / 65535.0)


def test_pfm_roundtrip_bitexact(tmp_path):
    path = tmp_path / "half.pfm"
    img = ImageF(np.full((6, 5, 3), 0.5), "SRGB")
    save_image(img, path, "float")
    back = load_image(path)
    assert np.array_equal(back.data, img.data)
    # arbitrary float32-representable data round-trips exactly too
    rng = np.random.default_rng(0)
    data = rng.random((11, 7)).astype(np.float32).astype(np.float64)
    save_image(ImageF(data, "Gray"), tmp_path / "r.pfm", "float")
    assert np.array_equal(load_image(tmp_path / "r.pfm").data, data)


def test_save_png8_quantization(tmp_path):
    path = tmp_path / "q.png"
    save_image(ImageF(np.full((3, 3), 0.5), "Gray"), path, 8)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    assert raw.dtype == np.uint8
    assert np.all(raw == 128)  # round(0.5 * 255)


def test_save_png16_roundtrip_bound(tmp_path):
    rng = np.random.default_rng(1)
    img = ImageF(rng.random((16, 13, 3)), "SRGB")
    path = tmp_path / "x.png"
    save_image(img, path, 16)
    back = load_image(path)
    assert np.abs(back.data - img.data).max() <= 0.5 / 65535 + 1e-12


def test_save_clamps_out_of_range(tmp_path):
    path = tmp_path / "c.png"
    save_image(ImageF(np.full((3, 3), 1.2), "Gray"), path, 8)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    assert np.all(raw == 255)


def test_load_errors(tmp_path):
    with pytest.raises(OSError):
        load_image(tmp_path / "missing.png")
    bad = tmp_path / "junk.png"
    bad.write_bytes(b"this is not an image at all")
    with pytest.raises(ValueError):
        load_image(bad)
    rgba = tmp_path / "rgba.png"
    cv2.imwrite(str(rgba), np.zeros((4, 4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        load_image(rgba)


def test_save_path_rules(tmp_path):
    img = ImageF(np.zeros((3, 3)), "Gray")
    with pytest.raises(ValueError):
        save_image(img, tmp_path / "a.pfm", 8)
    with pytest.raises(ValueError):
        save_image(img, tmp_path / "a.png", "float")
    with pytest.raises(OSError):
        save_image(img, tmp_path / "no" / "dir" / "a.png", 8)


# ----------------------------------------------------------------------------
# sRGB transfer
# ----------------------------------------------------------------------------

def test_srgb_fixed_points():
    img = ImageF(np.array([[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]]), "SRGB")
    lin = srgb_to_linear(img)
    assert lin.space == "LinearRGB"
    assert np.allclose(lin.data[0, 0], 0.0) and np.allclose(lin.data[0, 1], 1.0)


def test_srgb_half():
    # evaluate the piecewise transfer directly as the oracle
    expected = ((0.5 + 0.055) / 1.055) ** 2.4
    img = ImageF(np.full((2, 2, 3), 0.5), "SRGB")
    assert np.allclose(srgb_to_linear(img).data, expected)
    assert abs(expected - 0.21404) < 1e-5


def test_srgb_roundtrip():
    rng = np.random.default_rng(2)
    img = ImageF(rng.random((9, 8, 3)), "SRGB")
    back = linear_to_srgb(srgb_to_linear(img))
    assert np.abs(back.data - img.data).max() < 1e-6


def test_srgb_wrong_space():
    with pytest.raises(ValueError):
        srgb_to_linear(ImageF(np.zeros((3, 3, 3)), "HSV"))
    with pytest.raises(ValueError):
        linear_to_srgb(ImageF(np.zeros((3, 3, 3)), "SRGB"))


# ----------------------------------------------------------------------------
# HSV
# ----------------------------------------------------------------------------

def test_hsv_pure_red():
    img = ImageF(np.array([[[1.0, 0.0, 0.0]]]), "SRGB")
    hsv = rgb_to_hsv(img)
    assert hsv.space == "HSV"
    assert np.allclose(hsv.data[0, 0], (0.0, 1.0, 1.0))


def test_hsv_gray_forces_zero_hue():
    hsv = rgb_to_hsv(ImageF(np.full((2, 2, 3), 0.5), "SRGB"))
    assert np.allclose(hsv.data[..., 0], 0.0)
    assert np.allclose(hsv.data[..., 1], 0.0)
    assert np.allclose(hsv.data[..., 2], 0.5)


def test_hsv_roundtrip():
    rng = np.random.default_rng(3)
    data = rng.random((32, 17, 3))
    img = ImageF(data, "SRGB")
    hsv = rgb_to_hsv(img)
    keep = hsv.data[:, :, 1] > 1e-4
    back = hsv_to_rgb(hsv)
    assert np.abs(back.data - data).max(axis=2)[keep].max() < 1e-5
    assert np.all(hsv.data >= 0.0) and np.all(hsv.data <= 1.0)


# ----------------------------------------------------------------------------
# Normalization / equalization
# ----------------------------------------------------------------------------

def test_minmax_spans_unit_interval():
    rng = np.random.default_rng(4)
    img = ImageF(0.2 + 0.5 * rng.random((20, 20)), "Gray")
    out = minmax_normalize(img)
    assert out.data.min() == 0.0 and out.data.max() == 1.0


def test_minmax_idempotent_and_constant():
    rng = np.random.default_rng(5)
    data = rng.random((10, 10))
    data.flat[0], data.flat[1] = 0.0, 1.0
    out = minmax_normalize(ImageF(data, "Gray"))
    assert np.abs(out.data - data).max() < 1e-7
    const = minmax_normalize(ImageF(np.full((4, 4), 0.4), "Gray"))
    assert np.all(const.data == 0.0)


def test_equalize_constant_unchanged():
    img = ImageF(np.full((8, 8), 0.37), "Gray")
    assert np.array_equal(equalize_hist(img).data, img.data)


def test_equalize_two_level():
    data = np.zeros((4, 8))
    data[:, 4:] = 1.0
    out = equalize_hist(ImageF(data, "Gray"))
    # CDF_min = 0.5: low level -> 0, high level -> 1
    assert np.all(out.data[:, :4] == 0.0)
    assert np.all(out.data[:, 4:] == 1.0)


def test_equalize_improves_uniformity_on_skewed_images():
    rng = np.random.default_rng(6)
    for power in (0.3, 1.0, 3.0):
        skewed = rng.random((40, 40)) ** power
        before = ks_to_uniform(skewed)
        after = ks_to_uniform(equalize_hist(ImageF(skewed, "Gray")).data)
        assert after <= before + 1e-12


def test_equalize_ramp_stays_uniform():
    # bin-aligned ramp: exactly k samples per 256-bin cell
    n = 256 * 6
    ramp = ((np.arange(n) + 0.5) / n).reshape(32, 48)
    before = ks_to_uniform(ramp)
    after = ks_to_uniform(equalize_hist(ImageF(ramp, "Gray")).data)
    assert after <= before + 1e-12


def test_equalize_rejects_color():
    with pytest.raises(ValueError):
        equalize_hist(ImageF(np.zeros((4, 4, 3)), "SRGB"))


# ----------------------------------------------------------------------------
# Downscaling
# ----------------------------------------------------------------------------

def test_clamp_long_side_paper_case():
    img = ImageF(np.zeros((1536, 2048)), "Gray")
    out = clamp_long_side(img, 512)
    assert (out.height, out.width) == (384, 512)


def test_clamp_below_threshold_unchanged():
    img = ImageF(np.zeros((300, 400)), "Gray")
    out = clamp_long_side(img, 512)
    assert (out.height, out.width) == (300, 400)


def test_clamp_exact_halving_is_block_mean():
    rng = np.random.default_rng(7)
    data = rng.random((64, 48))
    out = clamp_long_side(ImageF(data, "Gray"), 32)
    assert (out.height, out.width) == (32, 24)
    oracle = data.reshape(32, 2, 24, 2).mean(axis=(1, 3))
    assert np.allclose(out.data, oracle, atol=1e-12)


def test_clamp_preserves_aspect_and_never_upsamples():
    rng = np.random.default_rng(8)
    for h, w in [(700, 500), (123, 777), (515, 514), (512, 100)]:
        img = ImageF(rng.random((h, w)), "Gray")
        out = clamp_long_side(img, 512)
        assert max(out.height, out.width) <= 512
        assert out.height <= h and out.width <= w
        if max(h, w) > 512:
            scale = max(h, w) / 512
            assert abs(out.height - h / scale) <= 1.0
            assert abs(out.width - w / scale) <= 1.0
