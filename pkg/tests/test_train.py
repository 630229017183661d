import numpy as np
import numpy.testing as npt
import pytest

from iterpool.dataset import DatasetConfig, build_dataset, load_records
from iterpool.networks import NetworkSpec, build_network
from iterpool.train import TrainConfig, evaluate, train


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("tinyds")
    cfg = DatasetConfig(train_per_class=3, test_per_class=2, master_seed=13)
    return build_dataset(cfg, "ipn", out)


@pytest.fixture(scope="module")
def tiny_dataset_bn(tmp_path_factory):
    out = tmp_path_factory.mktemp("tinyds_bn")
    cfg = DatasetConfig(train_per_class=3, test_per_class=2, master_seed=13)
    return build_dataset(cfg, "bn", out)


class TestTrain:
    def test_zero_lr_leaves_params_untouched(self, tiny_dataset):
        cfg = TrainConfig(kind="ipn", train_manifest=tiny_dataset["train"], lr=0.0,
                          iterations=6, batch_size=4)
        before = {k: v.copy() for k, v in build_network(NetworkSpec(kind="ipn"), seed=0).params().items()}
        net, _ = train(cfg)
        after = net.params()
        for name in before:
            npt.assert_array_equal(before[name], after[name])

    def test_single_sample_memorized(self, tiny_dataset):
        import os

        from iterpool.dataset import read_manifest, write_manifest

        entries = read_manifest(tiny_dataset["train"])[:1]
        single = os.path.join(os.path.dirname(tiny_dataset["train"]), "single_manifest.csv")
        write_manifest(single, entries)
        cfg = TrainConfig(kind="ipn", train_manifest=single, iterations=200,
                          batch_size=2, lr=0.02)
        net, _ = train(cfg)
        acc = evaluate(net, load_records(single)).average
        assert acc == 1.0

    def test_same_config_identical_traces(self, tiny_dataset):
        cfg = TrainConfig(kind="ipn", train_manifest=tiny_dataset["train"],
                          test_manifest=tiny_dataset["test"], iterations=9,
                          eval_every=3, batch_size=4, seed=3)
        _, trace1 = train(cfg)
        _, trace2 = train(cfg)
        assert trace1 == trace2

    def test_bn_trains_with_category_buckets(self, tiny_dataset_bn):
        cfg = TrainConfig(kind="bn", train_manifest=tiny_dataset_bn["train"],
                          iterations=6, batch_size=4)
        net, _ = train(cfg)
        assert net.spec.kind == "bn"

    def test_kind_spec_mismatch_rejected(self, tiny_dataset):
        cfg = TrainConfig(kind="ipn", train_manifest=tiny_dataset["train"], iterations=1)
        with pytest.raises(ValueError, match="disagree"):
            train(cfg, spec=NetworkSpec(kind="mpn"))


class TestEvaluate:
    def test_chance_level_for_random_init(self, tmp_path):
        cfg = DatasetConfig(train_per_class=1, test_per_class=12, master_seed=21)
        manifests = build_dataset(cfg, "ipn", tmp_path)
        net = build_network(NetworkSpec(kind="ipn"), seed=99)
        records = load_records(manifests["test"])
        m = evaluate(net, records)
        # balanced 5-class set, 180 samples: 3 sigma binomial around 0.2
        sigma = np.sqrt(0.2 * 0.8 / len(records))
        assert abs(m.average - 0.2) <= 3 * sigma + 0.05

    def test_confusion_rows_sum_to_class_counts(self, tiny_dataset):
        net = build_network(NetworkSpec(kind="ipn"), seed=0)
        records = load_records(tiny_dataset["test"])
        m = evaluate(net, records)
        counts = np.bincount([label for _, label, _ in records], minlength=5)
        npt.assert_array_equal(m.confusion.sum(axis=1), counts)

    def test_average_is_unweighted_class_mean(self, tiny_dataset):
        net = build_network(NetworkSpec(kind="ipn"), seed=1)
        m = evaluate(net, load_records(tiny_dataset["test"]))
        assert m.average == pytest.approx(m.per_class.mean())

    def test_empty_records_rejected(self):
        net = build_network(NetworkSpec(kind="ipn"), seed=0)
        with pytest.raises(ValueError):
            evaluate(net, [])
