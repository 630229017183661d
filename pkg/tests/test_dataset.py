import os

import numpy as np
import numpy.testing as npt
import pytest

from iterpool.dataset import (
    FACTORS,
    DatasetConfig,
    RecordDiscarded,
    build_dataset,
    desk_category_for,
    desk_patch_size_for,
    load_records,
    make_record,
    read_manifest,
    record_seed,
)
from iterpool.jpegsim import jpeg_sim
from iterpool.imageops import synth_base_image


class TestDeskRouting:
    @pytest.mark.parametrize(
        "d,mode,expected",
        [(64, "ipn", 16), (128, "ipn", 32), (256, "ipn", 64),
         (64, "bn", 16), (128, "bn", 32), (256, "bn", 64)],
    )
    def test_patch_sizes(self, d, mode, expected):
        assert desk_patch_size_for(d, mode) == expected

    @pytest.mark.parametrize("d,expected", [(64, "I"), (128, "II"), (256, "III")])
    def test_categories(self, d, expected):
        assert desk_category_for(d) == expected


class TestMakeRecord:
    def test_deterministic(self):
        cfg = DatasetConfig()
        a = make_record(cfg, 64, 0.8, seed=42, mode="ipn")
        b = make_record(cfg, 64, 0.8, seed=42, mode="ipn")
        npt.assert_array_equal(a.patch, b.patch)
        assert a.meta == b.meta

    def test_factor_one_reduces_to_double_jpeg(self):
        cfg = DatasetConfig()
        rec = make_record(cfg, 64, 1.0, seed=11, mode="ipn")
        rng = np.random.default_rng(11)
        qf1 = int(rng.choice(cfg.qf1_choices))
        img = synth_base_image(64, int(rng.integers(0, 2**63 - 1)))
        img = jpeg_sim(jpeg_sim(img, qf1), 90)
        p = rec.patch.shape[2]
        top = (64 - p) // 2
        npt.assert_array_equal(rec.patch[0, 0], img[top : top + p, top : top + p])

    def test_label_matches_factor(self):
        cfg = DatasetConfig()
        for i, factor in enumerate(FACTORS):
            rec = make_record(cfg, 64, factor, seed=3, mode="bn")
            assert rec.label == i
            assert rec.meta.factor == factor

    def test_shrunk_image_fits_small_patch_but_not_large(self):
        cfg = DatasetConfig()
        # round(64*0.6) = 38 >= 32: fits
        rec = make_record(cfg, 64, 0.6, seed=5, mode="ipn", patch_size=32)
        assert rec.patch.shape == (1, 1, 32, 32)
        with pytest.raises(RecordDiscarded):
            make_record(cfg, 64, 0.6, seed=5, mode="ipn", patch_size=64)

    def test_unknown_factor_rejected(self):
        with pytest.raises(ValueError):
            make_record(DatasetConfig(), 64, 0.7, seed=1, mode="ipn")

    def test_rotation_metadata(self):
        cfg = DatasetConfig(rotation_range_deg=(-20.0, 20.0))
        seen = set()
        for seed in range(12):
            rec = make_record(cfg, 64, 1.0, seed=seed, mode="ipn")
            assert rec.rotation_label in (0, 1)
            assert 0 < abs(rec.meta.rotation_deg) <= 20
            assert (rec.meta.rotation_deg > 0) == (rec.rotation_label == 1)
            seen.add(rec.rotation_label)
        assert seen == {0, 1}


class TestBuildDataset:
    def test_counts_and_balance(self, tmp_path):
        cfg = DatasetConfig(train_per_class=10, test_per_class=2, master_seed=1)
        manifests = build_dataset(cfg, "ipn", tmp_path)
        train = read_manifest(manifests["train"])
        test = read_manifest(manifests["test"])
        assert len(train) == 10 * 3 * 5 == 150
        assert len(test) == 2 * 3 * 5 == 30
        labels = [e.label for e in train]
        assert all(labels.count(k) == 30 for k in range(5))
        # exact uniformity per (size, factor) cell
        for size in (64, 128, 256):
            for k in range(5):
                assert sum(1 for e in train if e.base_size == size and e.label == k) == 10

    def test_regeneration_bitwise_identical(self, tmp_path):
        cfg = DatasetConfig(train_per_class=2, test_per_class=1, master_seed=9)
        m1 = build_dataset(cfg, "bn", tmp_path / "a")
        m2 = build_dataset(cfg, "bn", tmp_path / "b")
        r1 = load_records(m1["train"])
        r2 = load_records(m2["train"])
        for (p1, l1, e1), (p2, l2, e2) in zip(r1, r2):
            npt.assert_array_equal(p1, p2)
            assert l1 == l2 and e1.path == e2.path and e1.seed == e2.seed

    def test_train_test_seed_sets_disjoint(self, tmp_path):
        cfg = DatasetConfig(train_per_class=5, test_per_class=5, master_seed=4)
        manifests = build_dataset(cfg, "ipn", tmp_path)
        train_seeds = {e.seed for e in read_manifest(manifests["train"])}
        test_seeds = {e.seed for e in read_manifest(manifests["test"])}
        assert not train_seeds & test_seeds

    def test_patch_sizes_follow_desk_routing(self, tmp_path):
        cfg = DatasetConfig(train_per_class=1, test_per_class=1, master_seed=2)
        manifests = build_dataset(cfg, "bn", tmp_path)
        for patch, _, entry in load_records(manifests["train"]):
            assert patch.shape[2] == desk_patch_size_for(entry.base_size, "bn")

    def test_label_recoverable_from_meta(self, tmp_path):
        cfg = DatasetConfig(train_per_class=1, test_per_class=1, master_seed=3)
        manifests = build_dataset(cfg, "ipn", tmp_path)
        for e in read_manifest(manifests["train"]):
            assert e.factor in FACTORS
            assert e.label == FACTORS.index(e.factor)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            DatasetConfig(factors=(0.5, 1.0)).validate()
        with pytest.raises(ValueError):
            DatasetConfig(qf2=80).validate()
        with pytest.raises(ValueError):
            DatasetConfig(train_per_class=0).validate()


def test_record_seed_is_pure_function():
    a = record_seed(1, "train", 64, 0, 0)
    assert a == record_seed(1, "train", 64, 0, 0)
    assert a != record_seed(1, "test", 64, 0, 0)
    assert a != record_seed(2, "train", 64, 0, 0)
