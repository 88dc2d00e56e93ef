"""Networks produced by function-preserving transformations must keep learning"""
import numpy as np

from neunets.arch.graph import logits
from neunets.data.datasets import Dataset, Split
from neunets.morphisms import deepen, insert_skip, widen_layer
from neunets.morphisms.properties__test import random_network
from neunets.tensor import ops
from neunets.tensor.autograd import Tensor
from neunets.tensor.optim import OptimizerConfig
from neunets.training.trainer import TrainJob, train


def training_loss(graph, split):
    return float(ops.softmax_cross_entropy(Tensor(logits(graph, split.x)), split.y).data)


def transformed(graph, trial, rng):
    first_conv = min(spec.id for spec in graph.layers if spec.cell == 0)
    if trial % 3 == 0:
        return deepen(graph, first_conv)
    if trial % 3 == 1:
        return insert_skip(graph, first_conv)
    return widen_layer(graph, first_conv, graph.layer(first_conv).channels + 2, rng)


def test_one_epoch_decreases_training_loss():
    decreased = 0
    trials = 20
    for trial in range(trials):
        rng = np.random.default_rng(trial)
        graph = transformed(random_network(trial), trial, rng)
        x = rng.normal(size=(64,) + graph.meta.input_shape).astype(np.float32)
        if graph.meta.nonnegative_inputs:
            x = np.abs(x)
        split = Split(x, rng.integers(0, graph.meta.n_classes, size=64))
        data = Dataset("image", [str(c) for c in range(graph.meta.n_classes)], split, split, nonnegative=graph.meta.nonnegative_inputs)
        job = TrainJob(graph, data, OptimizerConfig(learning_rate=0.01, batch_size=8), epochs=1, seed=trial)
        before = training_loss(graph, split)
        after = training_loss(train(job).graph, split)
        decreased += after < before
    assert decreased >= 0.9 * trials
