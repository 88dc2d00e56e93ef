import dataclasses

import numpy as np
import pytest

from neunets.search.tapas.lde import (
    DatasetCharacterization,
    ExperimentRecord,
    LdeFormatError,
    LifelongDatabase,
    dataset_fingerprint,
    lde_select,
    read_lines,
)
from neunets.search.tapas.space import ChainArchitecture, ChainElement, ElementKind
from neunets.training.trainer__test import image_data

CHAIN = ChainArchitecture(
    [
        ChainElement(ElementKind.CONVOLUTION, kernel=3, channels=8),
        ChainElement(ElementKind.POOLING, kernel=3, stride=2, padding="valid"),
        ChainElement(ElementKind.BATCH_NORM),
    ]
)


def make_record(dcn=0.5, accuracies=(0.4, 0.5, 0.6), dataset_id="d0", chain=CHAIN, n_classes=3):
    return ExperimentRecord(
        chain=chain,
        dataset_id=dataset_id,
        dcn=dcn,
        n_classes=n_classes,
        accuracies=list(accuracies),
        input_shape=(8, 8, 3),
        hyperparameters={"learning_rate": 0.01},
    )


class TestSelect:
    def test_threshold_is_inclusive(self):
        records = [make_record(dcn=d, dataset_id=str(d)) for d in (0.58, 0.70, 0.66)]
        assert sorted(r.dcn for r in lde_select(records, 0.62)) == [0.58, 0.66]

    def test_zero_threshold_matches_exactly(self):
        records = [make_record(dcn=d, dataset_id=str(d)) for d in (0.5, 0.5000001, 0.7)]
        assert [r.dcn for r in lde_select(records, 0.5, tau=0)] == [0.5]

    def test_matches_a_linear_scan(self):
        rng = np.random.default_rng(0)
        dcns = rng.uniform(size=10_000)
        records = [make_record(dcn=float(d), dataset_id=f"d{i}") for i, d in enumerate(dcns)]
        for query in rng.uniform(size=5):
            expected = [r.id for r in records if abs(r.dcn - query) <= 0.05]
            assert [r.id for r in lde_select(records, query)] == expected

    def test_empty(self):
        assert lde_select([], 0.3) == []


class TestRecord:
    def test_id_is_a_content_hash(self):
        assert make_record().id == make_record().id
        assert make_record().id != make_record(accuracies=(0.4, 0.5, 0.7)).id

    def test_id_covers_the_dataset_description(self):
        base = make_record()
        variants = [
            make_record(dcn=0.6),
            make_record(n_classes=4),
            dataclasses.replace(base, domain="text", vocab_size=500, id=""),
        ]
        assert len({base.id} | {v.id for v in variants}) == 4

    def test_experiments_on_differently_characterized_datasets_are_kept(self, tmp_path):
        lde = LifelongDatabase(tmp_path / "lde.jsonl")
        assert lde.append(make_record(dcn=0.1))
        assert lde.append(make_record(dcn=0.2))
        assert lde.append(make_record(dcn=0.2, n_classes=5))
        assert len(lde) == 3

    def test_prefix_count_must_match_chain(self):
        with pytest.raises(LdeFormatError):
            make_record(accuracies=(0.4, 0.5)).validate()

    def test_accuracies_in_unit_interval(self):
        with pytest.raises(LdeFormatError):
            make_record(accuracies=(0.4, 0.5, 1.2)).validate()

    def test_meta(self):
        meta = make_record().meta()
        assert meta.input_shape == (8, 8, 3)
        assert meta.n_classes == 3


class TestLifelongDatabase:
    def test_reread_yields_identical_records(self, tmp_path):
        path = tmp_path / "lde.jsonl"
        lde = LifelongDatabase(path)
        records = [make_record(dcn=d, dataset_id=str(d)) for d in (0.1, 0.2, 0.3)]
        for record in records:
            assert lde.append(record)
        reread = LifelongDatabase(path)
        assert reread.records == lde.records
        assert len(reread) == 3

    def test_append_only(self, tmp_path):
        path = tmp_path / "lde.jsonl"
        lde = LifelongDatabase(path)
        lde.append(make_record(dcn=0.1))
        first = path.read_text()
        lde.append(make_record(dcn=0.2))
        assert path.read_text().startswith(first)

    def test_duplicates_are_skipped(self, tmp_path):
        lde = LifelongDatabase(tmp_path / "lde.jsonl")
        assert lde.append(make_record())
        assert not lde.append(make_record())
        assert len(read_lines(tmp_path / "lde.jsonl")) == 1

    def test_invalid_records_are_refused(self):
        with pytest.raises(LdeFormatError):
            LifelongDatabase().append(make_record(accuracies=(0.1,)))

    def test_characterizations_are_cached(self, tmp_path):
        path = tmp_path / "lde.jsonl"
        LifelongDatabase(path).characterize(DatasetCharacterization("abc", 0.42, 10, 1000))
        assert LifelongDatabase(path).cached_dcn("abc") == 0.42
        assert LifelongDatabase(path).cached_dcn("other") is None

    def test_merge_and_export(self, tmp_path):
        a, b = LifelongDatabase(tmp_path / "a.jsonl"), LifelongDatabase(tmp_path / "b.jsonl")
        a.append(make_record(dcn=0.1))
        b.append(make_record(dcn=0.1))
        b.append(make_record(dcn=0.2))
        b.characterize(DatasetCharacterization("x", 0.2, 2, 10))
        assert a.merge(b) == 1
        assert len(a) == 2
        assert a.cached_dcn("x") == 0.2
        a.export(tmp_path / "exported.jsonl")
        assert LifelongDatabase(tmp_path / "exported.jsonl").records == a.records

    def test_corrupt_line(self, tmp_path):
        path = tmp_path / "lde.jsonl"
        path.write_text('{"experiment": {"chain": 3}}\n')
        with pytest.raises(LdeFormatError):
            LifelongDatabase(path)


def test_fingerprint_depends_on_data():
    assert dataset_fingerprint(image_data(seed=0)) == dataset_fingerprint(image_data(seed=0))
    assert dataset_fingerprint(image_data(seed=0)) != dataset_fingerprint(image_data(seed=1))
