"""Immutable attributed graph with CSR adjacency, plus the deletion operator
and k-hop neighborhood machinery that every affected-set computation uses."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph structure or invalid graph operation."""


class InvalidNodeError(GraphError):
    """Node id out of range."""


class InvalidAttributeError(GraphError):
    """Attribute dimension out of range."""


UNLABELED = -1


def node_set(ids) -> np.ndarray:
    """Canonical node set: sorted, deduplicated int64 vector."""
    arr = np.asarray(ids, dtype=np.int64).ravel()
    return np.unique(arr)


def empty_node_set() -> np.ndarray:
    return np.empty(0, dtype=np.int64)


def canonical_edges(edges) -> np.ndarray:
    """Canonical undirected edge list: (E, 2) int64, u < v, lexicographically
    sorted, deduplicated. Self-loops are rejected."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if np.any(arr[:, 0] == arr[:, 1]):
        raise GraphError("self-loops are not representable as undirected edges")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    pairs = np.stack([lo, hi], axis=1)
    return np.unique(pairs, axis=0)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Node-attributed undirected graph.

    Adjacency is stored as a canonical CSR pair (row offsets ``indptr``,
    column indices ``indices``) holding both directions of every edge, no
    self-loops. Features are a dense ``n x d`` float matrix; labels are class
    indices in ``[0, num_classes)`` with ``-1`` meaning unlabeled. The train
    and test masks are disjoint boolean vectors.

    Instances are immutable after construction; all arrays are marked
    read-only and safe to share across threads.
    """

    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int

    def __post_init__(self):
        n = len(self.indptr) - 1
        if n < 0:
            raise GraphError("indptr must have length num_nodes + 1")
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise GraphError("row offsets must start at 0 and be nondecreasing")
        if self.indptr[-1] != len(self.indices):
            raise GraphError("row offsets do not cover the index array")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise GraphError("edge references a node id outside [0, num_nodes)")
        for arr, name in ((self.features, "features"), (self.labels, "labels"),
                          (self.train_mask, "train_mask"), (self.test_mask, "test_mask")):
            if len(arr) != n:
                raise GraphError(f"{name} must have one row per node")
        if self.num_classes < 1:
            raise GraphError("num_classes must be positive")
        bad = (self.labels >= self.num_classes) | (self.labels < UNLABELED)
        if np.any(bad):
            raise GraphError("labels must lie in [0, num_classes) or be -1")
        if np.any(self.train_mask & self.test_mask):
            raise GraphError("train and test masks must be disjoint")
        if np.any((self.train_mask | self.test_mask) & (self.labels == UNLABELED)):
            raise GraphError("masked nodes must carry a label")
        self._validate_csr(n)
        for arr in (self.indptr, self.indices, self.features, self.labels,
                    self.train_mask, self.test_mask):
            _freeze(arr)

    def _validate_csr(self, n: int) -> None:
        for v in range(n):
            row = self.indices[self.indptr[v]:self.indptr[v + 1]]
            if len(row) == 0:
                continue
            if np.any(np.diff(row) <= 0):
                raise GraphError(f"row {v}: column indices must be strictly increasing")
            if np.any(row == v):
                raise GraphError(f"row {v}: self-loop stored in adjacency")
        # symmetry: (u, v) present iff (v, u) present
        a = self.to_csr()
        if (a != a.T).nnz != 0:
            raise GraphError("adjacency must be symmetric")

    # -- basic views ----------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        if not 0 <= v < self.num_nodes:
            raise InvalidNodeError(f"node {v} out of range")
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as a canonical (E, 2) array with u < v."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64),
                         np.diff(self.indptr))
        mask = rows < self.indices
        return np.stack([rows[mask], self.indices[mask]], axis=1)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def to_csr(self) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.num_nodes, self.num_nodes))

    def train_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.train_mask).astype(np.int64)

    def test_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.test_mask).astype(np.int64)

    def equals(self, other: "AttributedGraph") -> bool:
        """Bitwise equality on every field."""
        return (self.num_classes == other.num_classes
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.train_mask, other.train_mask)
                and np.array_equal(self.test_mask, other.test_mask))

    # -- construction ---------------------------------------------------

    @classmethod
    def from_edges(cls, num_nodes, edges, features, labels, train_mask,
                   test_mask, num_classes) -> "AttributedGraph":
        """Build a graph from an undirected edge list.

        Edges are symmetrized and deduplicated; self-loops are rejected.
        """
        pairs = canonical_edges(edges)
        if len(pairs) and pairs.max() >= num_nodes:
            raise GraphError("edge references a node id outside [0, num_nodes)")
        both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(indptr, both[:, 0] + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(
            indptr=indptr,
            indices=both[:, 1].copy(),
            features=np.array(features, dtype=np.float64),
            labels=np.array(labels, dtype=np.int64),
            train_mask=np.array(train_mask, dtype=bool),
            test_mask=np.array(test_mask, dtype=bool),
            num_classes=int(num_classes),
        )


# -- neighborhood machinery ---------------------------------------------


def k_hop_neighbors(g: AttributedGraph, v: int, k: int) -> np.ndarray:
    """Nodes at shortest-path distance 1..k from ``v`` (``v`` excluded)."""
    if not 0 <= v < g.num_nodes:
        raise InvalidNodeError(f"node {v} out of range")
    if k < 1:
        raise GraphError("neighborhood depth k must be >= 1")
    seen = np.zeros(g.num_nodes, dtype=bool)
    seen[v] = True
    frontier = np.array([v], dtype=np.int64)
    for _ in range(k):
        if len(frontier) == 0:
            break
        nxt = np.unique(np.concatenate([g.neighbors(u) for u in frontier]))
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    seen[v] = False
    return np.flatnonzero(seen).astype(np.int64)


def k_hop_union(g: AttributedGraph, sources, k: int) -> np.ndarray:
    """Union of ``k_hop_neighbors(g, v, k)`` over every source ``v``.

    A source may appear in the result when it lies within k hops of another
    source, matching the per-node definition.
    """
    srcs = node_set(sources)
    out = np.zeros(g.num_nodes, dtype=bool)
    for v in srcs:
        out[k_hop_neighbors(g, int(v), k)] = True
    return np.flatnonzero(out).astype(np.int64)


def k_hop_ball(g: AttributedGraph, sources, k: int) -> np.ndarray:
    """All nodes within distance 0..k of any source (sources included)."""
    srcs = node_set(sources)
    if len(srcs) == 0:
        return empty_node_set()
    seen = np.zeros(g.num_nodes, dtype=bool)
    seen[srcs] = True
    frontier = srcs
    for _ in range(k):
        if len(frontier) == 0:
            break
        nxt = np.unique(np.concatenate([g.neighbors(u) for u in frontier]))
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return np.flatnonzero(seen).astype(np.int64)


def edge_endpoints(edges, num_nodes: int | None = None) -> np.ndarray:
    """Distinct endpoints of an edge list, sorted and deduplicated."""
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2) if np.size(edges) \
        else np.empty((0, 2), dtype=np.int64)
    out = node_set(arr.ravel())
    if num_nodes is not None and len(out) and (out[0] < 0 or out[-1] >= num_nodes):
        raise InvalidNodeError("edge endpoint out of range")
    return out


def attribute_owners(entries, num_nodes: int | None = None,
                     feature_dim: int | None = None) -> np.ndarray:
    """Distinct node ids appearing in (node, dim) attribute entries."""
    owners = []
    for node, dim in entries:
        if num_nodes is not None and not 0 <= node < num_nodes:
            raise InvalidNodeError(f"attribute entry references node {node}")
        if feature_dim is not None and not 0 <= dim < feature_dim:
            raise InvalidAttributeError(
                f"attribute dimension {dim} out of range [0, {feature_dim})")
        owners.append(node)
    return node_set(owners)


# -- the deletion operator ----------------------------------------------


def delete(g: AttributedGraph, req, warnings: list[str] | None = None
           ) -> AttributedGraph:
    """Remove the entities named by an unlearning request from ``g``.

    Deleted nodes stay in place as isolated, zero-featured, mask-cleared
    placeholders so node ids remain stable. Requested edges (plus every edge
    incident to a deleted node) are dropped from the adjacency; requested
    attribute entries are overwritten with 0.0. Entities that are already
    gone are skipped and reported through ``warnings``.
    """
    nodes = node_set(req.nodes)
    edges = canonical_edges(req.edges)
    full = node_set(req.attrs_full)
    if len(nodes) and (nodes[0] < 0 or nodes[-1] >= g.num_nodes):
        raise InvalidNodeError("delete request references node out of range")
    if len(full) and (full[0] < 0 or full[-1] >= g.num_nodes):
        raise InvalidNodeError("delete request references node out of range")

    if warnings is not None:
        for v in nodes:
            already = (not g.train_mask[v] and not g.test_mask[v]
                       and g.indptr[v] == g.indptr[v + 1]
                       and not g.features[v].any())
            if already:
                warnings.append(f"node {v} already removed")
        for u, v in edges:
            if not g.has_edge(int(u), int(v)):
                warnings.append(f"edge ({u}, {v}) not present")
        for v in full:
            if not g.features[v].any():
                warnings.append(f"attributes of node {v} already zero")

    # drop edges incident to deleted nodes and explicitly requested edges
    n = g.num_nodes
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(g.indptr))
    cols = g.indices
    keep = np.ones(len(cols), dtype=bool)
    if len(nodes):
        gone = np.zeros(n, dtype=bool)
        gone[nodes] = True
        keep &= ~(gone[rows] | gone[cols])
    if len(edges):
        key = np.minimum(rows, cols) * n + np.maximum(rows, cols)
        kill = edges[:, 0] * n + edges[:, 1]
        keep &= ~np.isin(key, kill)
    new_indices = cols[keep].copy()
    counts = np.zeros(n + 1, dtype=np.int64)
    np.add.at(counts, rows[keep] + 1, 1)
    new_indptr = np.cumsum(counts)

    feats = g.features.copy()
    if len(nodes):
        feats[nodes] = 0.0
    if len(full):
        feats[full] = 0.0
    for node, dims in req.attrs_partial:
        if warnings is not None and not g.features[node, list(dims)].any():
            warnings.append(f"partial attributes of node {node} already zero")
        feats[node, list(dims)] = 0.0

    train = g.train_mask.copy()
    test = g.test_mask.copy()
    if len(nodes):
        train[nodes] = False
        test[nodes] = False

    return replace(g, indptr=new_indptr, indices=new_indices, features=feats,
                   train_mask=train, test_mask=test)
