"""Synthetic scene generation: determinism, anomalies, toy features."""

import numpy as np
import pytest

from lad.errors import ConfigError, DataError
from lad.synthlab import (
    SceneSpec,
    emit_scene,
    generate_scene,
    load_scene_gt,
    standard_suite,
    toy_extract,
)


class TestGenerateScene:
    def test_normal_scene_has_no_regions(self):
        b = generate_scene(SceneSpec(seed=1))
        assert b.label == 0 and b.gt_regions == []
        assert len(b.masks) == 10  # board + 9 grid objects

    def test_missing_without_board_has_8_masks(self):
        b = generate_scene(SceneSpec(seed=2, anomaly="missing", include_board=False))
        assert len(b.masks) == 8
        assert len(b.gt_regions) == 1 and b.label == 1
        # the vacated footprint does not intersect any remaining object
        gt = b.gt_regions[0].mask
        for page in b.masks:
            assert not (gt & (page.mask > 0)).any()

    def test_same_seed_is_byte_identical(self):
        a = generate_scene(SceneSpec(seed=3, anomaly="swapped"))
        b = generate_scene(SceneSpec(seed=3, anomaly="swapped"))
        assert a.image.tobytes() == b.image.tobytes()
        assert a.features.tobytes() == b.features.tobytes()
        assert len(a.masks) == len(b.masks)
        for pa, pb in zip(a.masks, b.masks):
            assert np.array_equal(pa.mask, pb.mask)
        for ra, rb in zip(a.gt_regions, b.gt_regions):
            assert np.array_equal(ra.mask, rb.mask)

    def test_anomaly_counts_and_labels(self):
        expectations = {
            "missing": (9, 1),
            "extra": (11, 1),
            "swapped": (10, 2),
            "moved": (10, 2),
            "wrong_combo": (10, 1),
        }
        for kind, (n_masks, n_regions) in expectations.items():
            b = generate_scene(SceneSpec(seed=5, anomaly=kind))
            assert len(b.masks) == n_masks, kind
            assert len(b.gt_regions) == n_regions, kind
            assert b.label == 1

    def test_free_placement_rejects_positional_anomalies(self):
        for kind in ("swapped", "moved"):
            with pytest.raises(ConfigError):
                generate_scene(
                    SceneSpec(seed=1, layout_rule="free_placement", anomaly=kind)
                )

    def test_free_placement_normal_ok(self):
        b = generate_scene(SceneSpec(seed=4, layout_rule="free_placement"))
        assert b.label == 0

    def test_breakfast_box_style_six_objects(self):
        from lad.scene_objects import area_bounds, filter_masks

        b = generate_scene(SceneSpec(rows=1, cols=5, seed=6))
        lo, hi = area_bounds((224, 224), 0.001, 0.95)
        kept = filter_masks(b.masks, lo, hi)
        assert len(kept) == 6  # board + five items

    def test_masks_are_binary_with_positive_area(self):
        b = generate_scene(SceneSpec(seed=7, anomaly="extra"))
        for page in b.masks:
            assert set(np.unique(page.mask)) <= {0, 1}
            assert page.area >= 1


class TestToyExtract:
    def test_uniform_gray_image(self):
        img = np.full((3, 32, 32), 0.5, dtype=np.float32)
        f = toy_extract(img, patch=8)
        assert f.shape == (8, 4, 4)
        np.testing.assert_allclose(f[0], 0.5, atol=1e-7)  # mean R
        np.testing.assert_allclose(f[3], 0.0, atol=1e-7)  # edge energy
        np.testing.assert_allclose(f[6], 0.5, atol=1e-7)  # intensity
        np.testing.assert_allclose(f[7], 0.0, atol=1e-7)  # variance

    def test_translation_moves_color_channels(self):
        rng = np.random.default_rng(0)
        img = rng.random((3, 40, 40)).astype(np.float32)
        shifted = np.roll(img, 8, axis=2)  # one patch to the right
        f0 = toy_extract(img, patch=8)
        f1 = toy_extract(shifted, patch=8)
        # color/intensity stats translate one cell; position channels do not
        for ch in (0, 1, 2, 6, 7):
            np.testing.assert_allclose(f1[ch][:, 1:], f0[ch][:, :-1], atol=1e-6)
        np.testing.assert_array_equal(f1[4], f0[4])
        np.testing.assert_array_equal(f1[5], f0[5])

    def test_matches_per_patch_mean_oracle(self):
        rng = np.random.default_rng(1)
        img = rng.random((3, 24, 16)).astype(np.float32)
        f = toy_extract(img, patch=8)
        for by in range(3):
            for bx in range(2):
                block = img[:, by * 8 : (by + 1) * 8, bx * 8 : (bx + 1) * 8]
                for c in range(3):
                    assert f[c, by, bx] == pytest.approx(
                        float(block[c].mean()), abs=1e-6
                    )
                inten = block.mean(axis=0)
                assert f[6, by, bx] == pytest.approx(float(inten.mean()), abs=1e-6)
                assert f[7, by, bx] == pytest.approx(float(inten.var()), abs=1e-6)

    def test_position_channels(self):
        img = np.zeros((3, 16, 16), dtype=np.float32)
        f = toy_extract(img, patch=8)
        np.testing.assert_allclose(f[4], [[0.25, 0.75], [0.25, 0.75]], atol=1e-7)
        np.testing.assert_allclose(f[5], [[0.25, 0.25], [0.75, 0.75]], atol=1e-7)

    def test_divisibility_enforced(self):
        with pytest.raises(DataError):
            toy_extract(np.zeros((3, 30, 30), dtype=np.float32), patch=8)

    def test_locality_of_class_change(self):
        # two scenes differing in one object's color differ only near that
        # object's patches (positions/edges unchanged elsewhere)
        base = generate_scene(SceneSpec(seed=9))
        recolored = generate_scene(SceneSpec(seed=9, anomaly="wrong_combo"))
        diff = np.abs(base.features - recolored.features).sum(axis=0)
        gt = recolored.gt_regions[0].mask
        cells = np.zeros_like(diff, dtype=bool)
        ys, xs = np.nonzero(gt)
        cells[ys // 8, xs // 8] = True
        # dilate one cell to cover bilinear bleed at patch borders
        grown = cells.copy()
        grown[1:] |= cells[:-1]; grown[:-1] |= cells[1:]
        grown[:, 1:] |= cells[:, :-1]; grown[:, :-1] |= cells[:, 1:]
        assert diff[~grown].max() < 1e-6
        assert diff[cells].max() > 0.05


class TestEmit:
    def test_emit_and_reload(self, tmp_path):
        b = generate_scene(SceneSpec(seed=10, anomaly="moved"))
        emit_scene(b, tmp_path / "scene")
        label, regions, anomaly = load_scene_gt(tmp_path / "scene")
        assert label == 1 and anomaly == "moved"
        assert len(regions) == len(b.gt_regions)
        for got, expect in zip(regions, b.gt_regions):
            assert np.array_equal(got.mask, expect.mask)
            assert got.saturation_area == expect.saturation_area

    def test_emitted_files_reproduce_bundle(self, tmp_path):
        from lad import tensor_store
        from lad.pipeline import load_scene_dir

        b = generate_scene(SceneSpec(seed=11))
        emit_scene(b, tmp_path / "s")
        scene = load_scene_dir(tmp_path / "s")
        assert np.array_equal(scene.features, b.features)
        # PNG quantization already applied inside the bundle image
        np.testing.assert_allclose(scene.image, b.image, atol=1e-6)
        masks = tensor_store.load_mask_set(tmp_path / "s" / "masks.sltf")
        assert len(masks) == len(b.masks)

    def test_standard_suite_counts(self):
        templates, evals = standard_suite()
        assert len(templates) == 20
        assert len(evals) == 60
        labels = [0 if s.anomaly == "none" else 1 for s in evals]
        assert sum(labels) == 30
