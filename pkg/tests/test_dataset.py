import numpy as np
import pytest

from padim.dataset import (
    DatasetIndex,
    RdTransform,
    apply_rd_transform,
    load_mask,
    make_rd_dataset,
    scan_dataset,
)
from padim.errors import DataError
from padim.imageops import save_image_rgb


def build_class_tree(root, n_train=3, n_test_good=2, n_defect=2, size=64, seed=0):
    rng = np.random.default_rng(seed)
    cls = root / "widget"
    for i in range(n_train):
        img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_image_rgb(img, cls / "train" / "good" / f"{i:03d}.png")
    for i in range(n_test_good):
        img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_image_rgb(img, cls / "test" / "good" / f"{i:03d}.png")
    for i in range(n_defect):
        img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_image_rgb(img, cls / "test" / "crack" / f"{i:03d}.png")
        mask = np.zeros((size, size), dtype=np.uint8)
        mask[10 + i : 20 + i, 30:40] = 255
        save_image_rgb(mask, cls / "ground_truth" / "crack" / f"{i:03d}_mask.png")
    return cls


class TestScanDataset:
    def test_counts_and_labels(self, tmp_path):
        cls = build_class_tree(tmp_path)
        index = scan_dataset(cls)
        assert index.class_name == "widget"
        assert index.counts == (3, 4)
        # lexicographic defect ordering: crack before good
        labels = [e.label for e in index.test]
        assert labels == [1, 1, 0, 0]
        assert [e.path.parent.name for e in index.test] == ["crack", "crack", "good", "good"]

    def test_lexicographic_and_idempotent(self, tmp_path):
        cls = build_class_tree(tmp_path)
        a = scan_dataset(cls)
        b = scan_dataset(cls)
        assert [str(p) for p in a.train] == [str(p) for p in b.train]
        assert [str(e.path) for e in a.test] == [str(e.path) for e in b.test]
        assert a.train == sorted(a.train)

    def test_missing_mask_is_error(self, tmp_path):
        cls = build_class_tree(tmp_path)
        victim = next((cls / "ground_truth" / "crack").glob("*_mask.png"))
        victim.unlink()
        with pytest.raises(DataError, match="missing ground-truth mask"):
            scan_dataset(cls)

    def test_empty_train_is_error(self, tmp_path):
        cls = build_class_tree(tmp_path)
        for p in (cls / "train" / "good").iterdir():
            p.unlink()
        with pytest.raises(DataError, match="empty train split"):
            scan_dataset(cls)

    def test_anomalous_entries_carry_masks(self, tmp_path):
        cls = build_class_tree(tmp_path)
        index = scan_dataset(cls)
        for e in index.test:
            if e.label == 1:
                assert e.mask_path is not None and e.mask_path.is_file()
            else:
                assert e.mask_path is None

    def test_index_json_round_trip(self, tmp_path):
        cls = build_class_tree(tmp_path)
        index = scan_dataset(cls)
        out = tmp_path / "index.json"
        index.save_json(out)
        import json

        data = json.loads(out.read_text())
        assert data["class"] == "widget"
        assert len(data["train"]) == 3


class TestRdTransform:
    def test_zero_angle_centered_crop_equals_plain_crop(self, rng):
        img = rng.uniform(0, 255, size=(256, 256, 3))
        off = (256 - 224) // 2
        out, _ = apply_rd_transform(img, None, 0.0, off, off, 224)
        expected = img[off : off + 224, off : off + 224]
        np.testing.assert_allclose(out, expected)

    def test_all_zero_mask_stays_zero(self, rng):
        img = rng.uniform(0, 255, size=(256, 256, 3))
        mask = np.zeros((256, 256))
        _, out_mask = apply_rd_transform(img, mask, 7.3, 5, 9, 224)
        assert out_mask is not None
        assert not out_mask.any()

    def test_rotation_padding_never_fabricates_mask_pixels(self):
        img = np.zeros((256, 256, 3))
        mask = np.ones((256, 256))
        _, out_mask = apply_rd_transform(img, mask, 10.0, 0, 0, 224)
        # corners introduced by the rotation must be zero-padded
        assert out_mask[0, 0] == False  # noqa: E712
        assert out_mask[112, 112] == True  # noqa: E712

    def test_image_and_mask_share_the_geometry(self, rng):
        # transform a blob mask both as mask and as image; centroids must agree
        mask = np.zeros((256, 256))
        mask[100:140, 60:100] = 1.0
        img = np.repeat(mask[:, :, None] * 255.0, 3, axis=2)
        out_img, out_mask = apply_rd_transform(img, mask, -8.0, 11, 3, 224)
        img_blob = out_img[:, :, 0] > 127
        r1, c1 = np.argwhere(img_blob).mean(axis=0)
        r2, c2 = np.argwhere(out_mask).mean(axis=0)
        assert abs(r1 - r2) < 1.0
        assert abs(c1 - c2) < 1.0

    def test_draw_is_deterministic_per_seed_and_index(self):
        t = RdTransform(seed=42)
        assert t.draw(3) == t.draw(3)
        assert t.draw(3) != t.draw(4)
        assert RdTransform(seed=43).draw(3) != t.draw(3)

    def test_angles_and_offsets_in_range(self):
        t = RdTransform(seed=1)
        for i in range(50):
            angle, off_r, off_c = t.draw(i)
            assert -10.0 <= angle <= 10.0
            assert 0 <= off_r <= 32
            assert 0 <= off_c <= 32


class TestMakeRdDataset:
    def test_same_seed_is_byte_identical(self, tmp_path):
        cls = build_class_tree(tmp_path, size=256)
        index = scan_dataset(cls)
        out_a = make_rd_dataset(index, seed=5, out_dir=tmp_path / "a")
        out_b = make_rd_dataset(index, seed=5, out_dir=tmp_path / "b")
        for pa, pb in zip(out_a.train, out_b.train):
            assert pa.read_bytes() == pb.read_bytes()
        for ea, eb in zip(out_a.test, out_b.test):
            assert ea.path.read_bytes() == eb.path.read_bytes()
            if ea.mask_path is not None:
                assert ea.mask_path.read_bytes() == eb.mask_path.read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        cls = build_class_tree(tmp_path, size=256)
        index = scan_dataset(cls)
        out_a = make_rd_dataset(index, seed=1, out_dir=tmp_path / "a")
        out_b = make_rd_dataset(index, seed=2, out_dir=tmp_path / "b")
        assert any(pa.read_bytes() != pb.read_bytes()
                   for pa, pb in zip(out_a.train, out_b.train))

    def test_structure_preserved(self, tmp_path):
        cls = build_class_tree(tmp_path, size=256)
        index = scan_dataset(cls)
        out = make_rd_dataset(index, seed=0, out_dir=tmp_path / "rd")
        assert out.counts == index.counts
        assert all(e.mask_path is not None for e in out.test if e.label == 1)
        img = load_mask(out.test[0].mask_path)
        assert img.shape == (224, 224)
