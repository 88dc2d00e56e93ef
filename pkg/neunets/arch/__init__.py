from neunets.arch.costs import Costs, count_costs, total_costs
from neunets.arch.graph import (
    GraphMeta,
    InvalidGraphError,
    NetworkGraph,
    build_graph,
    evaluate,
    initialize_weights,
    logits,
    predict,
    run_graph,
)
from neunets.arch.layers import ForwardContext, LayerKind, LayerSpec, UnknownLayerError, get_layer, layer_registry
from neunets.arch.ordering import CyclicGraphError, topological_order
from neunets.arch.serialization import ModelFormatError, deserialize, load_model, save_model, serialize
from neunets.arch.template import CELL_INPUT, ConstructionError, NeuroCell, TemplateConfig, instantiate_template
