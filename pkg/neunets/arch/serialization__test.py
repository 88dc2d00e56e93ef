import numpy as np
import pytest

from neunets.arch.graph import GraphMeta, evaluate
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.arch.serialization import ModelFormatError, deserialize, load_model, save_model, serialize
from neunets.arch.template import CELL_INPUT, NeuroCell, TemplateConfig, instantiate_template


def random_graph(rng: np.random.Generator):
    layers = []
    for local in range(int(rng.integers(1, 4))):
        kind = [LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION, LayerKind.BATCH_NORM][int(rng.integers(3))]
        k = int(rng.choice([1, 3, 5]))
        layers.append(
            LayerSpec(
                local,
                kind,
                inputs=(local - 1 if local else CELL_INPUT,),
                kernel=(k, k),
                channels=int(rng.integers(2, 6)),
                activation="relu" if rng.random() < 0.5 else None,
            )
        )
    meta = GraphMeta(input_shape=(8, 8, int(rng.integers(1, 4))), n_classes=int(rng.integers(2, 5)))
    slots = int(rng.integers(1, 4))
    return instantiate_template(NeuroCell(tuple(layers), len(layers) - 1), meta, TemplateConfig(slots=slots, head_units=8), rng)


def assert_same_graph(first, second):
    assert sorted(first.layers, key=lambda s: s.id) == sorted(second.layers, key=lambda s: s.id)
    assert first.meta == second.meta
    for group in ("weights", "buffers"):
        a, b = getattr(first, group), getattr(second, group)
        assert a.keys() == b.keys()
        for layer_id in a:
            assert a[layer_id].keys() == b[layer_id].keys()
            for name in a[layer_id]:
                assert a[layer_id][name].dtype == b[layer_id][name].dtype
                assert np.array_equal(a[layer_id][name], b[layer_id][name])


def test_round_trip_random_graphs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        graph = random_graph(rng)
        assert_same_graph(graph, deserialize(serialize(graph)))


def test_round_trip_preserves_behaviour():
    graph = random_graph(np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(4,) + graph.meta.input_shape).astype(np.float32)
    assert np.array_equal(evaluate(graph, x).data, evaluate(deserialize(serialize(graph)), x).data)


def test_header_layout():
    payload = serialize(random_graph(np.random.default_rng(3)))
    assert payload[:4] == b"NNSG"
    assert int.from_bytes(payload[4:6], "little") == 1


def test_serialization_is_deterministic():
    graph = random_graph(np.random.default_rng(4))
    assert serialize(graph) == serialize(graph.copy())


class TestCorruption:
    payload = serialize(random_graph(np.random.default_rng(5)))

    def test_truncated(self):
        with pytest.raises(ModelFormatError):
            deserialize(self.payload[:-3])

    def test_bad_magic(self):
        with pytest.raises(ModelFormatError):
            deserialize(b"XXXX" + self.payload[4:])

    def test_unknown_version(self):
        with pytest.raises(ModelFormatError):
            deserialize(self.payload[:4] + (7).to_bytes(2, "little") + self.payload[6:])

    def test_trailing_bytes(self):
        with pytest.raises(ModelFormatError):
            deserialize(self.payload + b"\x00")


def test_save_and_load(tmp_path):
    graph = random_graph(np.random.default_rng(6))
    save_model(graph, tmp_path / "model.nnsg")
    assert_same_graph(graph, load_model(tmp_path / "model.nnsg"))
