import numpy as np
import pytest

from liveswap import texture
from oracles import naive_lbp_codes


def test_constant_image_all_codes_255():
    gray = np.full((5, 7), 3.0)
    codes = texture.lbp_code_map(gray)
    assert codes.shape == (5, 7)
    assert np.all(codes == 255)


def test_single_bright_pixel_code_zero():
    gray = np.zeros((5, 5))
    gray[2, 2] = 1.0
    codes = texture.lbp_code_map(gray)
    assert codes[2, 2] == 0


def test_matches_naive_oracle_on_random_images():
    rng = np.random.default_rng(0)
    for _ in range(20):
        gray = rng.integers(0, 256, size=(16, 16)).astype(np.float32)
        assert np.array_equal(texture.lbp_code_map(gray), naive_lbp_codes(gray))


def test_codes_within_byte_range():
    rng = np.random.default_rng(1)
    gray = rng.random((12, 12))
    codes = texture.lbp_code_map(gray)
    assert codes.min() >= 0 and codes.max() <= 255


def test_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    gray = rng.random((10, 10))
    assert np.array_equal(
        texture.lbp_code_map(gray), texture.lbp_code_map(0.5 * gray + 0.1)
    )


def test_degenerate_size_rejected():
    with pytest.raises(ValueError):
        texture.lbp_code_map(np.zeros((2, 5)))
    with pytest.raises(ValueError):
        texture.lbp_code_map(np.zeros((5, 2)))


def test_gt_map_constant_image_is_ones():
    img = np.full((16, 16, 3), 0.25, dtype=np.float32)
    gt = texture.lbp_gt_map(img, 8)
    assert gt.shape == (8, 8)
    assert np.allclose(gt, 1.0)


def test_gt_map_identity_pooling():
    rng = np.random.default_rng(3)
    img = rng.random((16, 16, 3)).astype(np.float32)
    gt = texture.lbp_gt_map(img, 16)
    codes = texture.lbp_code_map(texture.to_grayscale(img))
    assert np.allclose(gt, codes.astype(np.float32) / 255.0)


def test_gt_map_range_and_shape():
    rng = np.random.default_rng(4)
    for _ in range(5):
        img = rng.random((24, 24, 3)).astype(np.float32)
        gt = texture.lbp_gt_map(img, 3)
        assert gt.shape == (3, 3)
        assert gt.min() >= 0.0 and gt.max() <= 1.0


def test_gt_map_rejects_non_divisible_out_size():
    with pytest.raises(ValueError):
        texture.lbp_gt_map(np.zeros((16, 16, 3)), 5)


def test_grayscale_weights():
    img = np.zeros((4, 4, 3), dtype=np.float32)
    img[..., 0] = 1.0
    assert np.allclose(texture.to_grayscale(img), 0.299, atol=1e-6)
    img = np.zeros((4, 4, 3), dtype=np.float32)
    img[..., 1] = 1.0
    assert np.allclose(texture.to_grayscale(img), 0.587, atol=1e-6)
