"""Trainable graph models and their calculus.

Two model kinds share one objective interface:

* ``sgc``: k rounds of random-walk-normalized feature propagation followed by
  L2-regularized multinomial regression. Loss, gradient, and Hessian-vector
  products are exact and the objective is strongly convex, so this is the
  path that carries certification guarantees.
* ``gcn2``: a small two-layer graph convolution network with ReLU, the
  flexibility path. Gradients are exact; Hessian-vector products use central
  finite differences of the gradient.

Propagation uses S = D^-1 (A + I), the random-walk normalization with self
loops. Each row of S depends only on that node's own neighbor list, so a
node's propagated features are a function of its k-hop neighborhood alone.
That locality is what makes the loss of a far-away node bit-identical before
and after a deletion, which the affected-set calculus relies on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import AttributedGraph, GraphError, UNLABELED

SGC = "sgc"
GCN2 = "gcn2"
MODEL_KINDS = (SGC, GCN2)

_CHECKPOINT_MAGIC = b"GULM"
_CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during optimization."""


class UnlabeledNodeError(ValueError):
    """Per-node loss requested for a node without a label."""


def propagation_matrix(g: AttributedGraph) -> sp.csr_matrix:
    """Random-walk normalized adjacency with self-loops, D^-1 (A + I)."""
    n = g.num_nodes
    a = g.to_csr() + sp.identity(n, format="csr")
    a.sort_indices()
    deg = np.asarray(a.sum(axis=1)).ravel()
    a.data = a.data / np.repeat(deg, np.diff(a.indptr))
    return a

def propagate(g: AttributedGraph, k: int) -> np.ndarray:
    """k-step propagated features S^k X (dense n x d)."""
    if k < 1:
        raise GraphError("propagation depth k must be >= 1")
    s = propagation_matrix(g)
    z = np.asarray(g.features, dtype=np.float64)
    for _ in range(k):
        z = s @ z
    return z


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _onehot(labels: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((len(labels), c))
    out[np.arange(len(labels)), labels] = 1.0
    return out


class Objective:
    """Mean training loss plus L2 regularizer for one (graph, model) pair.

    The value is ``(1/m) sum cross_entropy(v) + (reg_lambda/2) ||theta||^2``
    over the graph's current training nodes. Per-node losses and per-node
    gradient sums exclude the regularizer, which enters once at the
    objective level. All methods are pure in (theta,) and safe to call
    concurrently.
    """

    def __init__(self, g: AttributedGraph, kind: str = SGC, k: int = 2,
                 reg_lambda: float = 0.05, hidden: int = 16):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        if kind == SGC and reg_lambda <= 0:
            raise ValueError("sgc requires reg_lambda > 0 for strong convexity")
        if kind == GCN2 and k != 2:
            raise ValueError("gcn2 uses exactly two propagation layers (k=2)")
        self.graph = g
        self.kind = kind
        self.k = int(k)
        self.reg_lambda = float(reg_lambda)
        self.hidden = int(hidden) if kind == GCN2 else 0
        self.train_ids = g.train_nodes()
        if kind == SGC:
            self._z = propagate(g, k)
        else:
            self._s = propagation_matrix(g)
            self._st = self._s.T.tocsr()
            self._sx = self._s @ np.asarray(g.features, dtype=np.float64)

    # -- shapes -----------------------------------------------------------

    @property
    def num_params(self) -> int:
        d, c = self.graph.feature_dim, self.graph.num_classes
        if self.kind == SGC:
            return d * c
        return d * self.hidden + self.hidden * c

    @property
    def m(self) -> int:
        """Current training-set size."""
        return len(self.train_ids)

    def _split(self, theta: np.ndarray):
        d, c = self.graph.feature_dim, self.graph.num_classes
        if self.kind == SGC:
            return theta.reshape(d, c)
        h = self.hidden
        w1 = theta[:d * h].reshape(d, h)
        w2 = theta[d * h:].reshape(h, c)
        return w1, w2

    def zero_theta(self) -> np.ndarray:
        return np.zeros(self.num_params)

    def init_theta(self, seed: int = 0) -> np.ndarray:
        """Training start point: zeros for sgc, scaled normal for gcn2
        (an all-zero gcn2 is a stationary point of ReLU backprop)."""
        if self.kind == SGC:
            return self.zero_theta()
        rng = np.random.Generator(np.random.PCG64(seed))
        d, c = self.graph.feature_dim, self.graph.num_classes
        h = self.hidden
        w1 = rng.normal(0.0, np.sqrt(2.0 / (d + h)), size=(d, h))
        w2 = rng.normal(0.0, np.sqrt(2.0 / (h + c)), size=(h, c))
        return np.concatenate([w1.ravel(), w2.ravel()])

    # -- forward ------------------------------------------------------------

    def logits(self, theta: np.ndarray) -> np.ndarray:
        if self.kind == SGC:
            return self._z @ self._split(theta)
        w1, w2 = self._split(theta)
        hidden = np.maximum(self._sx @ w1, 0.0)
        return (self._s @ hidden) @ w2

    def probabilities(self, theta: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(theta))

    def predictions(self, theta: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(theta), axis=1)

    # -- losses ---------------------------------------------------------

    def per_node_losses(self, theta: np.ndarray, nodes) -> np.ndarray:
        """Cross-entropy of each requested node, regularizer excluded."""
        nodes = np.asarray(nodes, dtype=np.int64)
        labels = self.graph.labels[nodes]
        if np.any(labels == UNLABELED):
            bad = nodes[labels == UNLABELED]
            raise UnlabeledNodeError(f"node {int(bad[0])} carries no label")
        logp = _log_softmax(self.logits(theta)[nodes])
        return -logp[np.arange(len(nodes)), labels]

    def loss_per_node(self, theta: np.ndarray, v: int) -> float:
        return float(self.per_node_losses(theta, [v])[0])

    def data_loss_sum(self, theta: np.ndarray, nodes) -> float:
        nodes = np.asarray(nodes, dtype=np.int64)
        if len(nodes) == 0:
            return 0.0
        return float(self.per_node_losses(theta, nodes).sum())

    def loss(self, theta: np.ndarray) -> float:
        reg = 0.5 * self.reg_lambda * float(theta @ theta)
        if self.m == 0:
            return reg
        return self.data_loss_sum(theta, self.train_ids) / self.m + reg

    # -- gradients --------------------------------------------------------

    def gradient_sum(self, theta: np.ndarray, nodes) -> np.ndarray:
        """Sum of per-node cross-entropy gradients, regularizer excluded."""
        nodes = np.asarray(nodes, dtype=np.int64)
        if len(nodes) == 0:
            return np.zeros(self.num_params)
        labels = self.graph.labels[nodes]
        if np.any(labels == UNLABELED):
            bad = nodes[labels == UNLABELED]
            raise UnlabeledNodeError(f"node {int(bad[0])} carries no label")
        c = self.graph.num_classes
        if self.kind == SGC:
            z = self._z[nodes]
            resid = _softmax(z @ self._split(theta)) - _onehot(labels, c)
            return (z.T @ resid).ravel()
        w1, w2 = self._split(theta)
        pre = self._sx @ w1
        hidden = np.maximum(pre, 0.0)
        agg = self._s @ hidden
        dlogits = np.zeros((self.graph.num_nodes, c))
        dlogits[nodes] = _softmax(agg[nodes] @ w2) - _onehot(labels, c)
        g2 = agg.T @ dlogits
        dhidden = (self._st @ (dlogits @ w2.T)) * (pre > 0.0)
        g1 = self._sx.T @ dhidden
        return np.concatenate([g1.ravel(), g2.ravel()])

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        grad = self.reg_lambda * theta
        if self.m:
            grad = grad + self.gradient_sum(theta, self.train_ids) / self.m
        return grad

    def per_node_grad_norms(self, theta: np.ndarray, nodes) -> np.ndarray:
        """Norm of each node's cross-entropy gradient (no regularizer).

        For sgc the per-node gradient is the outer product of the propagated
        feature row and the softmax residual, so its norm factorizes; gcn2
        falls back to one backward pass per node.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        if len(nodes) == 0:
            return np.zeros(0)
        if self.kind == SGC:
            labels = self.graph.labels[nodes]
            z = self._z[nodes]
            resid = _softmax(z @ self._split(theta)) \
                - _onehot(labels, self.graph.num_classes)
            return np.linalg.norm(z, axis=1) * np.linalg.norm(resid, axis=1)
        return np.array([np.linalg.norm(self.gradient_sum(theta, [v]))
                         for v in nodes])

    # -- curvature --------------------------------------------------------

    def hvp(self, theta: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """Hessian-vector product of the full objective.

        Exact for sgc (per-node softmax curvature plus reg_lambda * I). For
        gcn2 it is a central finite difference of the gradient with step
        1e-4 * (1 + ||theta||) / max(||vec||, 1e-12).
        """
        if self.kind == SGC:
            if self.m == 0:
                return self.reg_lambda * vec
            v = vec.reshape(self.graph.feature_dim, self.graph.num_classes)
            z = self._z[self.train_ids]
            p = _softmax(z @ self._split(theta))
            u = z @ v
            w = p * u - p * (p * u).sum(axis=1, keepdims=True)
            return (z.T @ w).ravel() / self.m + self.reg_lambda * vec
        norm_v = float(np.linalg.norm(vec))
        if norm_v == 0.0:
            return np.zeros_like(vec)
        eps = 1e-4 * (1.0 + float(np.linalg.norm(theta))) / max(norm_v, 1e-12)
        gp = self.gradient(theta + eps * vec)
        gm = self.gradient(theta - eps * vec)
        return (gp - gm) / (2.0 * eps)

    def explicit_hessian(self, theta: np.ndarray) -> np.ndarray:
        """Dense objective Hessian. sgc only; meant for modest p."""
        if self.kind != SGC:
            raise NotImplementedError("explicit Hessian is only assembled for sgc")
        d, c = self.graph.feature_dim, self.graph.num_classes
        p = d * c
        hess = np.zeros((p, p))
        if self.m:
            z = self._z[self.train_ids]
            prob = _softmax(z @ self._split(theta))
            for t in range(c):
                for u in range(c):
                    w = prob[:, t] * ((t == u) - prob[:, u])
                    hess[t::c, u::c] = (z.T * w) @ z / self.m
        hess[np.diag_indices(p)] += self.reg_lambda
        return hess


@dataclass(frozen=True)
class TrainedModel:
    """Flat parameter vector plus the settings and diagnostics of its fit."""

    kind: str
    theta: np.ndarray
    k: int
    reg_lambda: float
    hidden: int
    seed: int
    iterations: int
    grad_norm: float
    converged: bool

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta)):
            raise TrainingDivergedError("model parameters contain NaN/Inf")
        self.theta.setflags(write=False)

    def objective(self, g: AttributedGraph) -> Objective:
        return Objective(g, kind=self.kind, k=self.k,
                         reg_lambda=self.reg_lambda, hidden=self.hidden or 16)


def train(obj, init: np.ndarray | None = None, tol: float = 1e-8,
          max_iters: int = 2000, seed: int = 0) -> TrainedModel:
    """Deterministic full-batch gradient descent with backtracking.

    Runs until the gradient norm drops to ``tol`` or ``max_iters`` steps.
    Line search is Armijo with c = 1e-4 and shrink factor 0.5; the accepted
    step size seeds the next iteration (doubled) so well-scaled problems
    settle into full steps. For the strongly convex sgc objective the result
    is the unique optimum to within tolerance. ``obj`` may be any object
    with ``loss``/``gradient`` (and model metadata when it is an
    :class:`Objective`).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    theta = obj.init_theta(seed) if init is None and hasattr(obj, "init_theta") \
        else (np.zeros(obj.num_params) if init is None else np.array(init, dtype=np.float64))
    value = obj.loss(theta)
    grad = obj.gradient(theta)
    if not np.isfinite(value):
        raise TrainingDivergedError("non-finite loss at the starting point")
    step = 1.0
    iterations = 0
    for iterations in range(max_iters + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol or iterations == max_iters:
            break
        gsq = gnorm * gnorm
        t = min(step * 2.0, 1e6)
        while True:
            cand = theta - t * grad
            cand_value = obj.loss(cand)
            if np.isfinite(cand_value) and cand_value <= value - 1e-4 * t * gsq:
                break
            t *= 0.5
            if t < 1e-20:
                raise TrainingDivergedError(
                    f"line search failed at iteration {iterations} "
                    f"(loss {value:.6g}, grad norm {gnorm:.6g})")
        if np.array_equal(cand, theta):
            break  # step underflowed: the numerical floor for this objective
        theta = cand
        value = cand_value
        grad = obj.gradient(theta)
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"loss became non-finite at iteration {iterations}")
        step = t
    gnorm = float(np.linalg.norm(grad))
    return TrainedModel(
        kind=getattr(obj, "kind", SGC),
        theta=theta,
        k=getattr(obj, "k", 0),
        reg_lambda=getattr(obj, "reg_lambda", 0.0),
        hidden=getattr(obj, "hidden", 0),
        seed=seed,
        iterations=iterations,
        grad_norm=gnorm,
        converged=gnorm <= tol,
    )


# -- checkpoint IO -----------------------------------------------------------
#
# Layout (little-endian), see README for the field-by-field byte table:
#   magic "GULM" | u32 version | u8 kind | u32 k | u64 p | f64 reg_lambda |
#   i64 seed | u32 feature_dim | u32 num_classes | u32 hidden |
#   u32 iterations | f64 grad_norm | u8 converged | p * f64 theta

_HEADER = struct.Struct("<4sIBIQdqIIIIdB")


def save_model(model: TrainedModel, path, feature_dim: int, num_classes: int
               ) -> None:
    kind_code = MODEL_KINDS.index(model.kind)
    header = _HEADER.pack(
        _CHECKPOINT_MAGIC, _CHECKPOINT_VERSION, kind_code, model.k,
        len(model.theta), model.reg_lambda, model.seed, feature_dim,
        num_classes, model.hidden, model.iterations, model.grad_norm,
        int(model.converged))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())


def load_model(path) -> tuple[TrainedModel, dict]:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise GraphError(f"{path}: truncated checkpoint header")
        (magic, version, kind_code, k, p, reg_lambda, seed, feature_dim,
         num_classes, hidden, iterations, grad_norm, converged) = _HEADER.unpack(raw)
        if magic != _CHECKPOINT_MAGIC:
            raise GraphError(f"{path}: not a model checkpoint")
        if version != _CHECKPOINT_VERSION:
            raise GraphError(f"{path}: unsupported checkpoint version {version}")
        theta = np.frombuffer(fh.read(8 * p), dtype="<f8").astype(np.float64)
        if len(theta) != p:
            raise GraphError(f"{path}: truncated parameter payload")
    model = TrainedModel(
        kind=MODEL_KINDS[kind_code], theta=theta, k=k, reg_lambda=reg_lambda,
        hidden=hidden, seed=seed, iterations=iterations, grad_norm=grad_norm,
        converged=bool(converged))
    dims = {"feature_dim": feature_dim, "num_classes": num_classes}
    return model, dims
