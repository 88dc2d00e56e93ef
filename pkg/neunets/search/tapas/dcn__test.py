import numpy as np
import pytest

from neunets.data.datasets import Dataset, DatasetError, Split
from neunets.search.tapas import dcn as dcn_module
from neunets.search.tapas.dcn import ProbeNetConfig, compute_dcn, probe_network
from neunets.search.tapas.lde import LifelongDatabase, dataset_fingerprint
from neunets.tensor.optim import OptimizerConfig
from neunets.training.trainer__test import image_data

FAST_PROBE = ProbeNetConfig(filters=(4,), epochs=10, optimizer=OptimizerConfig(learning_rate=0.05, batch_size=16))


def random_labels(n_train=400, n_holdout=1000, n_classes=10, seed=0):
    rng = np.random.default_rng(seed)
    n = n_train + n_holdout
    x = rng.normal(size=(n, 8, 8, 1)).astype(np.float32)
    y = rng.integers(n_classes, size=n)
    return Dataset("image", [str(c) for c in range(n_classes)], Split(x[:n_train], y[:n_train]), Split(x[n_train:], y[n_train:]))


def separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(size=(n, 8, 8, 1)).astype(np.float32) + 3 * y[:, None, None, None].astype(np.float32)
    cut = n - n // 4
    return Dataset("image", ["low", "high"], Split(x[:cut], y[:cut]), Split(x[cut:], y[cut:]))


def test_probe_network_shapes():
    data = image_data()
    graph = probe_network(data.meta(), ProbeNetConfig(filters=(4, 8)))
    graph.validate()
    assert graph.shapes()[graph.output_id] == (2,)


def test_random_labels_score_chance():
    assert compute_dcn(random_labels(), FAST_PROBE) == pytest.approx(0.1, abs=0.05)


def test_separable_data_scores_high():
    assert compute_dcn(separable(), FAST_PROBE) >= 0.95


def test_second_call_reads_the_lde(monkeypatch):
    lde = LifelongDatabase()
    data = image_data()
    first = compute_dcn(data, ProbeNetConfig(filters=(4,), epochs=1), lde)
    assert lde.cached_dcn(dataset_fingerprint(data)) == first

    def no_training(*args, **kwargs):
        raise AssertionError("characterization trained again")

    monkeypatch.setattr(dcn_module, "train", no_training)
    assert compute_dcn(data, ProbeNetConfig(filters=(4,), epochs=1), lde) == first


def test_large_training_splits_are_subsampled(monkeypatch):
    seen = []
    real_train = dcn_module.train

    def spy(job, *args, **kwargs):
        seen.append(len(job.data.train))
        return real_train(job, *args, **kwargs)

    monkeypatch.setattr(dcn_module, "train", spy)
    compute_dcn(image_data(n=100), ProbeNetConfig(filters=(4,), epochs=1, max_examples=30))
    assert seen == [30]


def test_single_class_is_refused():
    data = image_data()
    single = Dataset("image", ["only"], Split(data.train.x, np.zeros(len(data.train), dtype=np.int64)), data.holdout)
    with pytest.raises(DatasetError):
        compute_dcn(single)
