from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from rvoskit.errors import CorruptMaskError, MaskFormatError, ShapeError
from rvoskit.masks import (
    BinaryMask,
    MaskSequence,
    load_mask_png,
    rle_decode,
    rle_encode,
    save_mask_png,
    zero_mask_sequence,
)

from conftest import random_grid


class TestRleEncode:
    def test_all_zero_grid(self):
        mask = rle_encode(np.zeros((4, 4), dtype=bool))
        assert mask.runs == (16,)

    def test_all_one_grid_has_leading_zero_run(self):
        mask = rle_encode(np.ones((4, 4), dtype=bool))
        assert mask.runs == (0, 16)

    def test_flat_input_needs_dimensions(self):
        flat = np.zeros(12, dtype=bool)
        with pytest.raises(ShapeError):
            rle_encode(flat)
        assert rle_encode(flat, 3, 4).runs == (12,)

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            rle_encode(np.zeros(10, dtype=bool), 3, 4)
        with pytest.raises(ShapeError):
            rle_encode(np.zeros((3, 4), dtype=bool), 4, 4)

    def test_round_trip_random_grids(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            grid = rng.random((16, 16)) < rng.uniform(0, 1)
            assert np.array_equal(rle_decode(rle_encode(grid)), grid)


class TestRleDecode:
    def test_single_background_run(self):
        assert not rle_decode(BinaryMask(4, 4, (16,))).any()

    def test_leading_zero_run_is_all_foreground(self):
        assert rle_decode(BinaryMask(4, 4, (0, 16))).all()

    def test_decoded_area_matches(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            grid = random_grid(rng)
            mask = rle_encode(grid)
            assert sum(mask.runs) == mask.height * mask.width
            assert rle_decode(mask).shape == grid.shape

    @pytest.mark.parametrize(
        "runs",
        [(), (15,), (17,), (4, 0, 12), (-1, 17), (16, 0)],
    )
    def test_invalid_runs_rejected(self, runs):
        with pytest.raises(CorruptMaskError):
            BinaryMask(4, 4, runs)


@given(
    st.integers(min_value=1, max_value=20),
    st.integers(min_value=1, max_value=20),
    st.data(),
)
@settings(max_examples=200, deadline=None)
def test_rle_round_trip_property(height, width, data):
    bits = data.draw(st.lists(st.booleans(), min_size=height * width, max_size=height * width))
    grid = np.array(bits, dtype=bool).reshape(height, width)
    assert np.array_equal(rle_decode(rle_encode(grid)), grid)


class TestMaskPng:
    def test_all_foreground_round_trip(self, tmp_path):
        path = tmp_path / "m.png"
        save_mask_png(BinaryMask(2, 2, (0, 4)), path)
        pixels = np.asarray(Image.open(path))
        assert pixels.shape == (2, 2)
        assert (pixels == 255).all()

    def test_save_load_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(3)
        path = tmp_path / "m.png"
        for _ in range(1000):
            mask = rle_encode(random_grid(rng, max_side=16))
            save_mask_png(mask, path)
            assert load_mask_png(path) == mask

    def test_palette_png_loads_by_index(self, tmp_path):
        img = Image.fromarray(np.array([[0, 1], [1, 0]], dtype=np.uint8)).convert("P")
        path = tmp_path / "p.png"
        img.save(path)
        mask = load_mask_png(path)
        assert rle_decode(mask).tolist() == [[False, True], [True, False]]

    def test_sixteen_bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.new("I;16", (4, 4)).save(path)
        with pytest.raises(MaskFormatError):
            load_mask_png(path)

    def test_rgb_png_rejected(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.new("RGB", (4, 4)).save(path)
        with pytest.raises(MaskFormatError):
            load_mask_png(path)

    def test_non_png_rejected(self, tmp_path):
        path = tmp_path / "m.jpg"
        Image.new("L", (4, 4)).save(path, format="JPEG")
        with pytest.raises(MaskFormatError):
            load_mask_png(path)


class TestZeroMaskSequence:
    def test_all_runs_single_background(self, small_dataset):
        video = next(iter(small_dataset.videos.values()))
        seq = zero_mask_sequence(video)
        assert len(seq) == video.frame_count
        for mask in seq:
            assert mask.runs == (video.height * video.width,)
            assert not rle_decode(mask).any()

    def test_sequence_dimension_check(self):
        with pytest.raises(ShapeError):
            MaskSequence("v", "e", (BinaryMask(2, 2, (4,)), BinaryMask(3, 3, (9,))))
