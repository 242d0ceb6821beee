"""Evaluation axes: utility (micro-F1), efficiency (wall time), and
unlearning effectiveness through deterministic membership-inference proxies
and the zeroed-attribute loss."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .graph import AttributedGraph, delete
from .models import Objective
from .requests import UnlearnRequest


class EvaluationError(ValueError):
    """Evaluation preconditions violated."""


def f1_micro(obj: Objective, theta: np.ndarray) -> float:
    """Micro-averaged F1 over the test mask.

    With one label per node, micro-F1 equals plain accuracy: every
    prediction is exactly one true-or-false positive, so precision and
    recall coincide.
    """
    test = obj.graph.test_nodes()
    if len(test) == 0:
        raise EvaluationError("test set is empty")
    pred = obj.predictions(theta)[test]
    return float(np.mean(pred == obj.graph.labels[test]))


def rank_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """ROC-AUC of positives against negatives, ties averaged by rank."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise EvaluationError("AUC needs nonempty score sets")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def mi_proxy_auc(obj: Objective, theta: np.ndarray, unlearned,
                 holdout) -> float:
    """Membership-inference proxy for node unlearning.

    Scores each node by its negative cross-entropy loss under the model on
    the original graph (members tend to be fit better, hence score higher)
    and returns the AUC of unlearned nodes against a same-sized holdout of
    never-trained nodes. 0.5 means the model leaks nothing.
    """
    unlearned = np.asarray(unlearned, dtype=np.int64)
    holdout = np.asarray(holdout, dtype=np.int64)
    if len(unlearned) == 0 or len(holdout) == 0:
        raise EvaluationError("membership sets must be nonempty")
    if len(unlearned) != len(holdout):
        raise EvaluationError("membership sets must be balanced")
    pos = -obj.per_node_losses(theta, unlearned)
    neg = -obj.per_node_losses(theta, holdout)
    return rank_auc(pos, neg)


def mi_proxy_auc_edges(obj: Objective, theta: np.ndarray, unlearned_edges,
                       negative_edges) -> float:
    """Membership-inference proxy for edge unlearning.

    Scores an edge by the cosine similarity of its endpoints' softmax
    outputs; linked training pairs tend to be smoothed toward each other.
    Negative edges must be absent from the graph and balanced in count.
    """
    pos_e = np.asarray(unlearned_edges, dtype=np.int64).reshape(-1, 2)
    neg_e = np.asarray(negative_edges, dtype=np.int64).reshape(-1, 2)
    if len(pos_e) == 0 or len(neg_e) == 0:
        raise EvaluationError("edge sets must be nonempty")
    if len(pos_e) != len(neg_e):
        raise EvaluationError("edge sets must be balanced")
    for u, v in neg_e:
        if obj.graph.has_edge(int(u), int(v)):
            raise EvaluationError(
                f"negative edge ({u}, {v}) exists in the graph")
    probs = obj.probabilities(theta)

    def cosine(edges):
        a = probs[edges[:, 0]]
        b = probs[edges[:, 1]]
        denom = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        return (a * b).sum(axis=1) / np.maximum(denom, 1e-300)

    return rank_auc(cosine(pos_e), cosine(neg_e))


def attr_unlearn_loss(obj_kind_settings: Objective, g: AttributedGraph,
                      req: UnlearnRequest, theta: np.ndarray) -> float:
    """Mean cross-entropy over the attribute owners, evaluated on the graph
    with exactly the requested attribute entries zeroed. Lower means the
    model behaves more like one trained without those attribute values."""
    owners = np.union1d(req.attrs_full, req.partial_owners())
    if len(owners) == 0:
        raise EvaluationError("request carries no attribute entries")
    attrs_only = UnlearnRequest.make(attrs_full=req.attrs_full,
                                     attrs_partial=req.attrs_partial)
    g_zeroed = delete(g, attrs_only)
    obj = Objective(g_zeroed, kind=obj_kind_settings.kind,
                    k=obj_kind_settings.k,
                    reg_lambda=obj_kind_settings.reg_lambda,
                    hidden=obj_kind_settings.hidden or 16)
    return float(obj.per_node_losses(theta, owners).mean())


def timed(label: str, fn, *args, **kwargs):
    """Run ``fn`` under a monotonic clock; returns (result, seconds)."""
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def sample_holdout(g: AttributedGraph, count: int, seed: int,
                   exclude=()) -> np.ndarray:
    """Deterministic sample of never-trained test nodes."""
    pool = np.setdiff1d(g.test_nodes(), np.asarray(exclude, dtype=np.int64))
    if len(pool) < count:
        raise EvaluationError(
            f"need {count} holdout nodes but only {len(pool)} test nodes remain")
    rng = np.random.Generator(np.random.PCG64(seed))
    return np.sort(rng.choice(pool, size=count, replace=False))


def sample_negative_edges(g: AttributedGraph, count: int, seed: int
                          ) -> np.ndarray:
    """Rejection-sample node pairs absent from the graph, fixed seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = g.num_nodes
    out = []
    seen = set()
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise EvaluationError("negative-edge sampling is not terminating")
        u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in seen or g.has_edge(*key):
            continue
        seen.add(key)
        out.append(key)
    return np.array(out, dtype=np.int64)


@dataclass
class EvalReport:
    """One evaluation run's metrics plus the configuration that produced it."""

    f1_micro: float | None = None
    mi_auc: float | None = None
    attr_unlearn_loss: float | None = None
    wall_times: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "f1_micro": self.f1_micro,
            "mi_auc": self.mi_auc,
            "attr_unlearn_loss": self.attr_unlearn_loss,
            "wall_times": self.wall_times,
            "config": self.config,
        }
