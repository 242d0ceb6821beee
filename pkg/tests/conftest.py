import numpy as np
import pytest

from graph_unlearn import AttributedGraph


def make_graph(num_nodes, edges, labels=None, train=None, test=None,
               features=None, num_classes=None, feature_dim=3, seed=0):
    """Small-graph builder with sensible defaults for tests."""
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = rng.integers(0, 2, size=num_nodes)
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 1
    if features is None:
        features = rng.normal(size=(num_nodes, feature_dim))
    if train is None:
        train = np.ones(num_nodes, dtype=bool)
    train = np.asarray(train, dtype=bool)
    if test is None:
        test = ~train
    return AttributedGraph.from_edges(
        num_nodes=num_nodes, edges=edges, features=features, labels=labels,
        train_mask=train, test_mask=np.asarray(test, dtype=bool),
        num_classes=num_classes)


@pytest.fixture
def path_graph():
    """a-b-c-d path, everything in the training set."""
    return make_graph(4, [(0, 1), (1, 2), (2, 3)], labels=[0, 1, 0, 1])


@pytest.fixture
def triangle_graph():
    return make_graph(3, [(0, 1), (1, 2), (0, 2)], labels=[0, 1, 1])
