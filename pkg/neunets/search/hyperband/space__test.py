import numpy as np
import pytest

from neunets.arch.graph import GraphMeta
from neunets.arch.layers import LayerKind
from neunets.arch.ordering import ancestors
from neunets.codec import from_dto, to_dto
from neunets.search.hyperband.space import (
    Hierarchy,
    HyperbandConfig,
    HyperbandSpace,
    LearningConfig,
    Motif,
    MotifEdge,
    Representation,
    decode_config,
    sample_config,
    sample_network,
)
from neunets.tensor.optim import OptimizerKind

META = GraphMeta(input_shape=(8, 8, 3), n_classes=4)
TEXT_META = GraphMeta(input_shape=(10,), n_classes=2, domain="text", vocab_size=30)
SPACE = HyperbandSpace(channels=(4, 8))


def pools_before(graph, lid):
    return sum(graph.layer(a).kind == LayerKind.MAX_POOL for a in ancestors(graph.dependencies(), lid) if a != lid)


@pytest.mark.parametrize("representation", list(Representation))
def test_every_sample_decodes(representation):
    rng = np.random.default_rng(0)
    for _ in range(25):
        graph, optimizer = sample_network(SPACE, representation, META, rng)
        graph.validate()
        assert optimizer.kind == OptimizerKind.SGD_MOMENTUM
        assert 1e-3 <= optimizer.learning_rate <= 1e-1
        assert 0.5 <= optimizer.momentum <= 0.95
        assert optimizer.weight_decay in SPACE.weight_decay


@pytest.mark.parametrize("representation", list(Representation))
def test_text_networks(representation):
    rng = np.random.default_rng(1)
    for _ in range(10):
        graph, _ = sample_network(SPACE, representation, TEXT_META, rng)
        graph.validate()
        assert graph.layer(1).kind == LayerKind.EMBEDDING


def test_plain_chain_pools_close_components():
    rng = np.random.default_rng(2)
    for _ in range(30):
        config = sample_config(SPACE, Representation.PLAIN_CHAIN, rng)
        graph = decode_config(config, META)
        ordered = [spec.kind for spec in graph.ordered_layers()]
        body = [kind for kind in ordered if kind not in (LayerKind.INPUT,)][: -3]
        convs = (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION)
        assert set(body) <= set(convs) | {LayerKind.MAX_POOL}
        # every pool follows the last stack of its component
        expected = []
        for component in config.components:
            expected += [LayerKind(stack.kind) for stack in component.stacks] + [LayerKind.MAX_POOL]
        assert [k for k in body if k != LayerKind.MAX_POOL] == [k for k in expected if k != LayerKind.MAX_POOL]
        assert body.count(LayerKind.MAX_POOL) <= len(config.components)


def test_skips_stay_inside_components():
    rng = np.random.default_rng(3)
    skips = 0
    for _ in range(40):
        config = sample_config(SPACE, Representation.SKIP_CHAIN, rng)
        for component in config.components:
            for skip in component.skips:
                assert 0 <= skip.source < skip.target < len(component.stacks)
        graph = decode_config(config, META)
        for spec in graph.layers:
            if spec.kind == LayerKind.ADD:
                skips += 1
                a, b = spec.inputs
                assert pools_before(graph, a) == pools_before(graph, b)
    assert skips > 0


def test_multi_branch_cells_repeat():
    rng = np.random.default_rng(4)
    config = sample_config(SPACE, Representation.MULTI_BRANCH, rng)
    graph = decode_config(config, META)
    adds = sum(spec.kind == LayerKind.ADD for spec in graph.layers)
    assert adds == config.repeats * len(config.cell.nodes)


def test_hierarchy_expands_motifs_bottom_up():
    # level 2: motif 0 is conv3 then conv1, motif 1 sums identity and separable3
    motif0 = Motif(nodes=3, edges=[MotifEdge(0, 1, 2), MotifEdge(1, 2, 1)])
    motif1 = Motif(nodes=2, edges=[MotifEdge(0, 1, 0), MotifEdge(0, 1, 3)])
    # level 3: motif 0 then motif 1, with motif 1 also applied to the input
    top = Motif(nodes=3, edges=[MotifEdge(0, 1, 0), MotifEdge(1, 2, 1), MotifEdge(0, 2, 1)])
    config = HyperbandConfig(
        Representation.HIERARCHY,
        LearningConfig(0.01, 0.0, 0.9),
        hierarchy=Hierarchy(channels=4, level2=[motif0, motif1], level3=top),
        repeats=1,
    )
    graph = decode_config(config, META)
    kinds = [spec.kind for spec in graph.ordered_layers()]
    # stem + motif0 (2 convs) + two copies of motif1 (1 separable + 1 add each) + the final add
    assert kinds.count(LayerKind.CONVOLUTION) == 3
    assert kinds.count(LayerKind.SEPARABLE_CONVOLUTION) == 2
    assert kinds.count(LayerKind.ADD) == 3
    assert kinds.count(LayerKind.MAX_POOL) == 1
    graph.validate()

    stem = next(spec for spec in graph.ordered_layers() if spec.kind == LayerKind.CONVOLUTION)
    assert stem.kernel == (1, 1)
    convs = [spec for spec in graph.ordered_layers() if spec.kind == LayerKind.CONVOLUTION][1:]
    assert [c.kernel for c in convs] == [(3, 3), (1, 1)]
    assert convs[0].inputs == (stem.id,)
    assert convs[1].inputs == (convs[0].id,)


def test_configs_survive_json():
    rng = np.random.default_rng(5)
    for representation in Representation:
        config = sample_config(SPACE, representation, rng)
        assert from_dto(HyperbandConfig, to_dto(config)) == config


def test_seeded():
    assert sample_config(SPACE, Representation.HIERARCHY, 9) == sample_config(SPACE, Representation.HIERARCHY, 9)


def test_space_validation():
    with pytest.raises(ValueError):
        HyperbandSpace(components=(2, 1))
    with pytest.raises(ValueError):
        HyperbandSpace(level2_nodes=1)
