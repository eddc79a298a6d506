import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubeforge.augment import AugmentSpec, alpha_matte, augment_clip, binarize, composite_frame
from tubeforge.errors import DimensionMismatch, LengthMismatch

rng = np.random.default_rng(0)


def rgb(h=6, w=8, seed=0):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


def test_full_mask_gives_foreground():
    fg, bg = rgb(seed=1), rgb(seed=2)
    np.testing.assert_array_equal(composite_frame(fg, np.full((6, 8), 255, np.uint8), bg), fg)


def test_empty_mask_gives_background():
    fg, bg = rgb(seed=1), rgb(seed=2)
    np.testing.assert_array_equal(composite_frame(fg, np.zeros((6, 8), np.uint8), bg), bg)


def test_half_mask_splits_exactly():
    fg, bg = rgb(seed=1), rgb(seed=2)
    mask = np.zeros((6, 8), np.uint8)
    mask[:, :4] = 255
    out = composite_frame(fg, mask, bg)
    np.testing.assert_array_equal(out[:, :4], fg[:, :4])
    np.testing.assert_array_equal(out[:, 4:], bg[:, 4:])


def test_binarize_threshold():
    assert binarize(np.array([0, 127, 128, 255]), 128).tolist() == [0, 0, 255, 255]


def test_feathered_edge_blends():
    fg = np.full((1, 9, 3), 200, np.uint8)
    bg = np.zeros((1, 9, 3), np.uint8)
    mask = np.zeros((1, 9), np.uint8)
    mask[:, :4] = 255
    out = composite_frame(fg, mask, bg, AugmentSpec(feather_radius=1))
    # 3x3 box with edge replication: column 3 sees two of three fg columns
    assert out[0, :, 0].tolist() == [200, 200, 200, 133, 67, 0, 0, 0, 0]


def test_feathered_alpha_in_unit_range():
    mask = rng.integers(0, 256, (10, 10), dtype=np.uint8)
    alpha = alpha_matte(mask, AugmentSpec(feather_radius=2))
    assert alpha.min() >= 0 and alpha.max() <= 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        composite_frame(rgb(), np.zeros((5, 8), np.uint8), rgb())
    with pytest.raises(DimensionMismatch):
        composite_frame(rgb(), np.zeros((6, 8), np.uint8), rgb(7, 8))


def test_clip_with_static_background():
    frames = [rgb(seed=i) for i in range(128)]
    masks = [np.zeros((6, 8), np.uint8)] * 128
    out = augment_clip(frames, masks, rgb(seed=999))
    assert len(out) == 128
    np.testing.assert_array_equal(out[77], rgb(seed=999))


def test_background_clip_loops():
    frames = [rgb(seed=i) for i in range(128)]
    masks = [np.zeros((6, 8), np.uint8)] * 128
    bgs = np.stack([rgb(seed=1000 + i) for i in range(64)])
    out = augment_clip(frames, masks, bgs)
    for i in range(128):
        np.testing.assert_array_equal(out[i], bgs[i % 64])


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        augment_clip([rgb()] * 3, [np.zeros((6, 8), np.uint8)] * 2, rgb())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_compositing_onto_itself_is_identity(seed, radius):
    r = np.random.default_rng(seed)
    fg = r.integers(0, 256, (7, 9, 3), dtype=np.uint8)
    mask = r.integers(0, 256, (7, 9), dtype=np.uint8)
    np.testing.assert_array_equal(composite_frame(fg, mask, fg, AugmentSpec(feather_radius=radius)), fg)
