import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shufflesod.data import (FG_RANGE, TRAIN_SEEDS, VAL_SEEDS, Sample, apply_augment, augment, build_split,
                             export_samples, generate_sample, read_gray, read_rgb, to_uint8)
from shufflesod.errors import ConfigurationError
from shufflesod.global_branch import patchwise_gt


def test_same_seed_same_bytes():
    a, b = generate_sample(17), generate_sample(17)
    assert a.image.tobytes() == b.image.tobytes() and a.mask.tobytes() == b.mask.tobytes()


def test_different_seeds_differ():
    assert not np.array_equal(generate_sample(1).image, generate_sample(2).image)


def test_shapes_and_ranges():
    s = generate_sample(3, side=96)
    assert s.image.shape == (3, 96, 96) and s.mask.shape == (1, 96, 96)
    assert s.image.min() >= 0 and s.image.max() <= 1
    assert set(np.unique(s.mask)) <= {0.0, 1.0}


def test_side_must_be_divisible_by_32():
    with pytest.raises(ConfigurationError):
        generate_sample(0, side=48)


@pytest.mark.slow
def test_foreground_fraction_over_1000_seeds():
    fracs = np.array([generate_sample(s).mask.mean() for s in range(1000)])
    assert fracs.min() >= FG_RANGE[0] and fracs.max() <= FG_RANGE[1]


def test_never_all_background():
    assert all(generate_sample(s).mask.any() for s in range(100))


def test_split_ranges():
    assert TRAIN_SEEDS == range(0, 800) and VAL_SEEDS == range(800, 900)
    images, masks = build_split(range(3), 64)
    assert images.shape == (3, 3, 64, 64) and masks.shape == (3, 1, 64, 64)


def test_identity_augmentation():
    s = generate_sample(5)
    t = apply_augment(s, 0, False)
    np.testing.assert_array_equal(t.image, s.image)
    np.testing.assert_array_equal(t.mask, s.mask)


def test_four_rotations_close():
    s = generate_sample(6)
    t = s
    for _ in range(4):
        t = apply_augment(t, 1, False)
    np.testing.assert_array_equal(t.image, s.image)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_augmentation_permutes_pixels(seed):
    s = generate_sample(seed % 50)
    t = augment(s, seed)
    assert t.mask.sum() == s.mask.sum()
    np.testing.assert_array_equal(np.sort(t.image.ravel()), np.sort(s.image.ravel()))


@pytest.mark.parametrize("k,flip", [(k, f) for k in range(4) for f in (False, True)])
def test_patch_targets_follow_augmentation(k, flip):
    s = generate_sample(7)
    aug = apply_augment(s, k, flip)
    grid = patchwise_gt(s.mask)[0]
    np.testing.assert_array_equal(patchwise_gt(aug.mask)[0], apply_augment(Sample(grid, grid, 0), k, flip).mask)


def test_augment_rejects_non_square():
    with pytest.raises(ConfigurationError):
        augment(Sample(np.zeros((3, 4, 8)), np.zeros((1, 4, 8)), 0), 0)


def test_augment_draws_cover_all_cases():
    seen = set()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        seen.add((int(rng.integers(0, 4)), bool(rng.random() < 0.5)))
    assert len(seen) == 8


def test_export_round_trip(tmp_path):
    export_samples(tmp_path, [4], side=64)
    s = generate_sample(4)
    np.testing.assert_array_equal(read_gray(tmp_path / "masks" / "00004.png"), to_uint8(s.mask[0]))
    assert read_rgb(tmp_path / "images" / "00004.png").shape == (64, 64, 3)
