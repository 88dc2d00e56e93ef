import numpy as np
import pytest

from neunets.arch.costs import count_costs
from neunets.arch.graph import GraphMeta
from neunets.arch.layers import UnknownLayerError
from neunets.search.tapas.encoding import (
    ACCURACY,
    FEATURES,
    LAYER_TYPES,
    N_FEATURES,
    encode_chain,
    encode_pair,
    initial_accuracy,
    one_hot,
)
from neunets.search.tapas.space import ChainArchitecture, ChainElement, ElementKind, decode_chain, sample_chain

META = GraphMeta(input_shape=(8, 8, 3), n_classes=10)
CHAIN = ChainArchitecture(
    [
        ChainElement(ElementKind.CONVOLUTION, kernel=3, channels=16),
        ChainElement(ElementKind.POOLING, kernel=3, stride=2, padding="valid"),
        ChainElement(ElementKind.RESIDUAL, kernel=3, channels=8),
        ChainElement(ElementKind.FULLY_CONNECTED, channels=32),
    ]
)


def column(name):
    return FEATURES.index(name)


def test_initial_accuracy():
    assert initial_accuracy(10) == pytest.approx(0.1)


def test_one_hot():
    assert one_hot("pooling").sum() == 1
    with pytest.raises(UnknownLayerError):
        one_hot("attention")


class TestEncodeChain:
    def test_one_row_per_element_plus_input(self):
        encoding = encode_chain(CHAIN, META)
        assert encoding.rows.shape == (5, N_FEATURES)
        assert len(encoding) == 4
        type_block = encoding.rows[:, : len(LAYER_TYPES)]
        np.testing.assert_array_equal(type_block.sum(axis=1), np.ones(5))
        assert type_block[0, LAYER_TYPES.index("input")] == 1
        assert type_block[3, LAYER_TYPES.index("residual")] == 1

    def test_ratios(self):
        rows = encode_chain(CHAIN, META).rows
        assert rows[1, column("height_ratio")] == 1.0
        assert rows[1, column("depth_ratio")] == pytest.approx(16 / 3)
        assert rows[2, column("height_ratio")] == pytest.approx(3 / 8)
        assert rows[3, column("depth_ratio")] == pytest.approx(0.5)
        assert (rows[:, column("height_ratio")] > 0).all()
        assert (rows[:, column("depth_ratio")] > 0).all()

    def test_costs_match_the_graph(self):
        rows = encode_chain(CHAIN, META).rows
        decoded = decode_chain(CHAIN, META, initialize=False)
        for i in range(len(CHAIN)):
            costs = count_costs(decoded.graph, decoded.output_of(i))
            assert rows[i + 1, column("inference_flops")] == costs.inference_flops
            assert rows[i + 1, column("inference_memory")] == costs.inference_memory
        total_weights = rows[:, column("weights")].sum()
        assert total_weights == count_costs(decoded.graph, decoded.output_of(3)).params

    def test_pooling_adds_no_weights(self):
        rows = encode_chain(CHAIN, META).rows
        assert rows[2, column("weights")] == 0
        assert rows[0, column("weights")] == 0

    def test_text_chains(self):
        meta = GraphMeta(input_shape=(12,), n_classes=2, domain="text", vocab_size=40)
        rng = np.random.default_rng(0)
        for _ in range(20):
            chain = sample_chain(meta, rng)
            assert len(encode_chain(chain, meta)) == len(chain)


class TestPair:
    def test_accuracy_fields(self):
        encoding = encode_chain(CHAIN, META)
        pair = encoding.pair(0, initial_accuracy(10))
        assert pair.shape == (2, N_FEATURES)
        assert pair[0, ACCURACY] == pytest.approx(0.1)
        assert pair[1, ACCURACY] == 0
        np.testing.assert_array_equal(pair[1, :ACCURACY], encoding.rows[1, :ACCURACY])

    def test_pair_leaves_the_encoding_untouched(self):
        encoding = encode_chain(CHAIN, META)
        encoding.pair(2, 0.7)
        assert (encoding.rows[:, ACCURACY] == 0).all()

    def test_flattened(self):
        encoding = encode_chain(CHAIN, META)
        flat = encode_pair(encoding, 1, 0.3)
        assert flat.shape == (2 * N_FEATURES,)
        assert flat[ACCURACY] == pytest.approx(0.3)
