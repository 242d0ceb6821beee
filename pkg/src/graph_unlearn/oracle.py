"""Ground-truth machinery: retraining on the retained graph, the weighted
intermediate objective used to verify that the correction terms reproduce
the retained objective, and distance measurement between the three
parameter vectors (original, retrained, approximated)."""

from __future__ import annotations

import numpy as np

from .graph import AttributedGraph, delete
from .models import Objective, TrainedModel, train
from .requests import AffectedSets, UnlearnRequest, require_valid


def retrain(model: TrainedModel, g: AttributedGraph, req: UnlearnRequest,
            tol: float = 1e-8, max_iters: int = 2000
            ) -> tuple[TrainedModel, AttributedGraph]:
    """Optimize the retained-graph objective, warm-started from the trained
    parameters. Continuing from the previous optimum avoids re-initialization
    variance, and for the strongly convex sgc objective the result is the
    unique retained optimum regardless of the start point."""
    require_valid(g, req)
    g_minus = delete(g, req)
    obj = Objective(g_minus, kind=model.kind, k=model.k,
                    reg_lambda=model.reg_lambda, hidden=model.hidden or 16)
    retrained = train(obj, init=np.array(model.theta), tol=tol,
                      max_iters=max_iters, seed=model.seed)
    return retrained, g_minus


class InterpolatedObjective:
    """Original objective plus ``weight * (add-side - sub-side)`` correction.

    At weight 0 this is the original training objective. At weight 1/m the
    correction terms exactly swap the changed per-node losses, and the
    regularizer weight (interpolated as ``1 - weight * |deleted training
    nodes|``) rescales in step with the shrinking data term, so the whole
    expression becomes a positive multiple of the retained-graph objective:
    its minimizer coincides with the retrained optimum. Exposes the
    ``loss``/``gradient`` protocol the trainer consumes.
    """

    def __init__(self, obj_original: Objective, obj_retained: Objective,
                 sets: AffectedSets, weight: float):
        self.obj_original = obj_original
        self.obj_retained = obj_retained
        self.weight = float(weight)
        self.add_nodes = np.intersect1d(sets.add_union(),
                                        obj_retained.train_ids)
        self.sub_nodes = np.intersect1d(sets.sub_union(),
                                        obj_original.train_ids)
        removed_train = obj_original.m - obj_retained.m
        self.reg_weight = 1.0 - self.weight * removed_train
        self.kind = obj_original.kind
        self.k = obj_original.k
        self.reg_lambda = obj_original.reg_lambda
        self.hidden = obj_original.hidden
        self.num_params = obj_original.num_params

    def _data_mean(self, theta: np.ndarray) -> float:
        obj = self.obj_original
        if obj.m == 0:
            return 0.0
        return obj.data_loss_sum(theta, obj.train_ids) / obj.m

    def loss(self, theta: np.ndarray) -> float:
        add = self.obj_retained.data_loss_sum(theta, self.add_nodes)
        sub = self.obj_original.data_loss_sum(theta, self.sub_nodes)
        reg = 0.5 * self.obj_original.reg_lambda * float(theta @ theta)
        return (self._data_mean(theta) + self.weight * (add - sub)
                + self.reg_weight * reg)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        obj = self.obj_original
        base = np.zeros_like(theta) if obj.m == 0 \
            else obj.gradient_sum(theta, obj.train_ids) / obj.m
        add = self.obj_retained.gradient_sum(theta, self.add_nodes)
        sub = obj.gradient_sum(theta, self.sub_nodes)
        return (base + self.weight * (add - sub)
                + self.reg_weight * obj.reg_lambda * theta)


def interpolated_objective(obj_original: Objective, obj_retained: Objective,
                           sets: AffectedSets, weight: float,
                           theta: np.ndarray) -> float:
    """Value of the weighted intermediate objective at ``theta``."""
    return InterpolatedObjective(obj_original, obj_retained, sets,
                                 weight).loss(theta)


def parameter_distances(theta_original: np.ndarray,
                        theta_retrained: np.ndarray,
                        theta_approx: np.ndarray
                        ) -> tuple[float, float, float]:
    """l2 distances (original-retrained, retrained-approx, original-approx)."""
    if not (len(theta_original) == len(theta_retrained) == len(theta_approx)):
        raise ValueError("parameter vectors must have equal length")
    return (
        float(np.linalg.norm(theta_original - theta_retrained)),
        float(np.linalg.norm(theta_retrained - theta_approx)),
        float(np.linalg.norm(theta_original - theta_approx)),
    )
