"""Mask filtering and per-object feature maps vs a loop bilinear oracle."""

import numpy as np
import pytest

from lad.errors import DegenerateObjectError
from lad.scene_objects import (
    area_bounds,
    filter_masks,
    object_feature_maps,
    whole_frame_record,
)
from lad.tensor_store import mask_page_from_array


def bilinear_oracle(grid, out_h, out_w):
    """Direct formula evaluation with edge clamping."""
    in_h, in_w = grid.shape
    out = np.zeros((out_h, out_w))
    for y in range(out_h):
        sy = (y + 0.5) * in_h / out_h - 0.5
        y0 = int(np.floor(sy)); y0c = min(max(y0, 0), in_h - 1)
        y1c = min(y0 + 1, in_h - 1) if y0 + 1 >= 0 else 0
        wy = min(max(sy - y0, 0.0), 1.0)
        for x in range(out_w):
            sx = (x + 0.5) * in_w / out_w - 0.5
            x0 = int(np.floor(sx)); x0c = min(max(x0, 0), in_w - 1)
            x1c = min(x0 + 1, in_w - 1) if x0 + 1 >= 0 else 0
            wx = min(max(sx - x0, 0.0), 1.0)
            top = grid[y0c, x0c] * (1 - wx) + grid[y0c, x1c] * wx
            bot = grid[y1c, x0c] * (1 - wx) + grid[y1c, x1c] * wx
            out[y, x] = top * (1 - wy) + bot * wy
    return out


def page(mask):
    return mask_page_from_array(np.asarray(mask, dtype=np.uint8))


def rect_page(h, w, r0, c0, r1, c1):
    m = np.zeros((h, w), dtype=np.uint8)
    m[r0 : r1 + 1, c0 : c1 + 1] = 1
    return page(m)


class TestFilterMasks:
    def test_keeps_middle(self):
        pages = [rect_page(80, 80, 0, 0, 0, 4),      # area 5
                 rect_page(80, 80, 10, 10, 14, 19),  # area 50
                 rect_page(80, 80, 0, 0, 62, 79)]    # area 5040
        kept = filter_masks(pages, 10, 100)
        assert [p.area for p in kept] == [50]

    def test_unbounded_is_identity(self):
        pages = [rect_page(20, 20, 0, 0, 3, 3), rect_page(20, 20, 5, 5, 9, 9)]
        assert filter_masks(pages, 0, 20 * 20) == pages

    def test_idempotent(self):
        pages = [rect_page(30, 30, 0, 0, i, i) for i in range(6)]
        once = filter_masks(pages, 4, 20)
        twice = filter_masks(once, 4, 20)
        assert twice == once

    def test_order_preserved_and_empty_legal(self):
        pages = [rect_page(10, 10, 0, 0, 1, 1), rect_page(10, 10, 2, 2, 3, 3)]
        assert filter_masks(pages, 1000, 2000) == []

    def test_area_bounds_fractions(self):
        lo, hi = area_bounds((100, 100), 0.001, 0.95)
        assert lo == 10 and hi == 9500


class TestObjectFeatureMaps:
    def test_identity_mask(self):
        rng = np.random.default_rng(0)
        up = rng.standard_normal((3, 16, 16)).astype(np.float32)
        ones = page(np.ones((16, 16)))
        rec = object_feature_maps([ones], up)[0]
        assert np.array_equal(rec.feat, up)
        assert rec.bbox_hi == (0, 0, 15, 15)

    def test_left_half_constant(self):
        up = np.full((2, 16, 16), 2.0, dtype=np.float32)
        half = np.zeros((16, 16), dtype=np.uint8)
        half[:, :8] = 1
        rec = object_feature_maps([page(half)], up)[0]
        # away from the one-pixel bilinear transition band
        assert np.all(rec.feat[:, :, :7] == 2.0)
        assert np.all(rec.feat[:, :, 9:] == 0.0)

    def test_matches_bilinear_oracle(self):
        rng = np.random.default_rng(1)
        mask = (rng.random((7, 9)) < 0.5).astype(np.uint8)
        mask[3, 4] = 1
        up = rng.standard_normal((2, 56, 72)).astype(np.float32)
        rec = object_feature_maps([page(mask)], up)[0]
        oracle_mask = bilinear_oracle(mask.astype(np.float64), 56, 72)
        np.testing.assert_allclose(rec.mask_hi, oracle_mask, atol=1e-6)
        np.testing.assert_allclose(
            rec.feat, (up.astype(np.float64) * oracle_mask).astype(np.float32), atol=1e-6
        )

    def test_feat_zero_where_mask_zero(self):
        rng = np.random.default_rng(2)
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[2:5, 2:5] = 1
        up = rng.standard_normal((4, 32, 32)).astype(np.float32)
        rec = object_feature_maps([page(mask)], up)[0]
        zero_zone = rec.mask_hi == 0.0
        assert zero_zone.any()
        assert np.all(rec.feat[:, zero_zone] == 0.0)

    def test_degenerate_object_names_index(self):
        up = np.zeros((1, 4, 4), dtype=np.float32)
        tiny = np.zeros((64, 64), dtype=np.uint8)
        tiny[0, 63] = 1  # vanishes at 4x4
        big = np.ones((64, 64), dtype=np.uint8)
        with pytest.raises(DegenerateObjectError, match="object 1"):
            object_feature_maps([page(big), page(tiny)], up)

    def test_records_ordered_as_input(self):
        up = np.ones((1, 16, 16), dtype=np.float32)
        pages = [rect_page(16, 16, 0, 0, 3, 3), rect_page(16, 16, 8, 8, 15, 15)]
        recs = object_feature_maps(pages, up)
        assert [r.object_id for r in recs] == [0, 1]
        assert recs[0].bbox_hi[0] < recs[1].bbox_hi[0]

    def test_whole_frame_record(self):
        up = np.random.default_rng(3).standard_normal((2, 8, 8)).astype(np.float32)
        rec = whole_frame_record(up)
        assert rec.bbox_hi == (0, 0, 7, 7)
        assert np.array_equal(rec.feat, up)
        assert rec.mask_hi.min() == 1.0
