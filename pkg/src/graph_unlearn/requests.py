"""Unlearning requests: the four request categories, validation, affected
node sets, and splitting of overlapping mixtures into serial passes."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import (
    AttributedGraph,
    GraphError,
    attribute_owners,
    canonical_edges,
    edge_endpoints,
    empty_node_set,
    k_hop_ball,
    k_hop_neighbors,
    k_hop_union,
    node_set,
)


class RequestError(ValueError):
    """Invalid unlearning request."""


@dataclass(frozen=True)
class UnlearnRequest:
    """What to remove: nodes, edges, and full or partial attribute vectors.

    ``nodes`` are removed entirely (their incident edges and attributes go
    implicitly). ``attrs_full`` lists nodes whose whole attribute vector is
    unlearned; ``attrs_partial`` holds (node, dims) entries that must leave
    at least one dimension untouched.
    """

    nodes: np.ndarray
    edges: np.ndarray
    attrs_full: np.ndarray
    attrs_partial: tuple[tuple[int, tuple[int, ...]], ...]

    @classmethod
    def make(cls, nodes=(), edges=(), attrs_full=(), attrs_partial=()
             ) -> "UnlearnRequest":
        partial = []
        for node, dims in attrs_partial:
            dims = tuple(sorted(set(int(d) for d in dims)))
            partial.append((int(node), dims))
        partial.sort(key=lambda e: e[0])
        return cls(
            nodes=node_set(nodes),
            edges=canonical_edges(edges),
            attrs_full=node_set(attrs_full),
            attrs_partial=tuple(partial),
        )

    @property
    def is_empty(self) -> bool:
        return (len(self.nodes) == 0 and len(self.edges) == 0
                and len(self.attrs_full) == 0 and len(self.attrs_partial) == 0)

    @property
    def has_nodes(self) -> bool:
        return len(self.nodes) > 0

    @property
    def has_full_attrs(self) -> bool:
        return len(self.attrs_full) > 0

    @property
    def has_partial_attrs(self) -> bool:
        return len(self.attrs_partial) > 0

    @property
    def has_edges(self) -> bool:
        return len(self.edges) > 0

    def partial_owners(self) -> np.ndarray:
        return node_set([node for node, _ in self.attrs_partial])

    def to_dict(self) -> dict:
        return {
            "nodes": [int(v) for v in self.nodes],
            "edges": [[int(u), int(v)] for u, v in self.edges],
            "attrs_full": [int(v) for v in self.attrs_full],
            "attrs_partial": [{"node": int(n), "dims": [int(d) for d in dims]}
                              for n, dims in self.attrs_partial],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UnlearnRequest":
        return cls.make(
            nodes=data.get("nodes", ()),
            edges=data.get("edges", ()),
            attrs_full=data.get("attrs_full", ()),
            attrs_partial=[(e["node"], e["dims"])
                           for e in data.get("attrs_partial", ())],
        )


def load_request(path) -> UnlearnRequest:
    with open(path, encoding="utf-8") as fh:
        return UnlearnRequest.from_dict(json.load(fh))


def save_request(req: UnlearnRequest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(req.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def validate(g: AttributedGraph, req: UnlearnRequest) -> list[str]:
    """List every violated request invariant; an empty list means valid."""
    problems: list[str] = []
    n, d = g.num_nodes, g.feature_dim
    for v in req.nodes:
        if not 0 <= v < n:
            problems.append(f"unknown node {v}")
    for v in req.attrs_full:
        if not 0 <= v < n:
            problems.append(f"unknown node {v} in full-attribute entries")
    for u, v in req.edges:
        if not (0 <= u < n and 0 <= v < n):
            problems.append(f"edge ({u}, {v}) references an unknown node")
        elif not g.has_edge(int(u), int(v)):
            problems.append(f"unknown edge ({u}, {v})")
    seen_partial = set()
    full = set(int(v) for v in req.attrs_full)
    for node, dims in req.attrs_partial:
        if not 0 <= node < n:
            problems.append(f"unknown node {node} in partial-attribute entries")
            continue
        if node in seen_partial:
            problems.append(f"duplicate partial-attribute entry for node {node}")
        seen_partial.add(node)
        if node in full:
            problems.append(
                f"node {node} appears in both full and partial attribute entries")
        if len(dims) == 0:
            problems.append(f"partial-attribute entry for node {node} names no dims")
        if any(not 0 <= dim < d for dim in dims):
            problems.append(f"attribute dimension out of range for node {node}")
        if len(set(dims)) >= d:
            problems.append(
                f"partial entry for node {node} must retain >= 1 dim; "
                "declare it as a full-attribute entry instead")
    return problems


def require_valid(g: AttributedGraph, req: UnlearnRequest) -> None:
    problems = validate(g, req)
    if problems:
        raise RequestError("; ".join(problems))


@dataclass(frozen=True)
class AffectedSets:
    """Node sets whose losses enter the correction terms of an unlearning
    update, one pair (retained-graph side, original-graph side) per request
    category, plus the union reach set used by the distance bounds.

    ``add_*`` sets index losses evaluated on the retained graph, ``sub_*``
    sets index losses on the original graph. The edge category is identical
    on both sides by construction.
    """

    add_nodes: np.ndarray
    add_full: np.ndarray
    add_partial: np.ndarray
    add_edges: np.ndarray
    sub_nodes: np.ndarray
    sub_full: np.ndarray
    sub_partial: np.ndarray
    sub_edges: np.ndarray
    reach: np.ndarray
    has_nodes: bool
    has_full_attrs: bool
    has_partial_attrs: bool
    has_edges: bool
    category_overlap: bool

    def add_union(self) -> np.ndarray:
        return node_set(np.concatenate(
            [self.add_nodes, self.add_full, self.add_partial, self.add_edges]))

    def sub_union(self) -> np.ndarray:
        return node_set(np.concatenate(
            [self.sub_nodes, self.sub_full, self.sub_partial, self.sub_edges]))

    def sizes(self) -> dict:
        return {
            "add_nodes": len(self.add_nodes),
            "add_full": len(self.add_full),
            "add_partial": len(self.add_partial),
            "add_edges": len(self.add_edges),
            "sub_nodes": len(self.sub_nodes),
            "sub_full": len(self.sub_full),
            "sub_partial": len(self.sub_partial),
            "sub_edges": len(self.sub_edges),
            "reach": len(self.reach),
        }


def compute_affected_sets(g: AttributedGraph, req: UnlearnRequest, k: int
                          ) -> AffectedSets:
    """Derive the per-category affected node sets for a request.

    All neighborhood expansions run on the original topology: attribute
    removal never changes edges, and for node or edge removal the retained
    graph's neighborhoods are subsets of the original ones.
    """
    if k < 1:
        raise GraphError("neighborhood depth k must be >= 1")
    train = g.train_mask

    def hop_train(sources) -> np.ndarray:
        hood = k_hop_union(g, sources, k)
        return hood[train[hood]] if len(hood) else hood

    empty = empty_node_set()

    add_nodes = hop_train(req.nodes) if req.has_nodes else empty
    sub_nodes = node_set(np.concatenate([add_nodes, req.nodes])) \
        if req.has_nodes else empty

    owners_full = req.attrs_full
    add_full = node_set(np.concatenate([owners_full, hop_train(owners_full)])) \
        if req.has_full_attrs else empty
    sub_full = add_full

    owners_partial = req.partial_owners()
    add_partial = node_set(np.concatenate(
        [owners_partial, hop_train(owners_partial)])) \
        if req.has_partial_attrs else empty
    sub_partial = add_partial

    endpoints = edge_endpoints(req.edges, g.num_nodes) if req.has_edges else empty
    add_edges = hop_train(endpoints) if req.has_edges else empty
    sub_edges = add_edges

    owners_all = node_set(np.concatenate([owners_full, owners_partial]))
    reach = node_set(np.concatenate(
        [add_nodes, add_edges,
         hop_train(owners_all) if len(owners_all) else empty]))

    overlap = False
    for sources, combined in ((req.nodes, add_nodes), (endpoints, add_edges)):
        if len(sources) < 2:
            continue
        total = sum(len(np.intersect1d(k_hop_neighbors(g, int(v), k),
                                       np.flatnonzero(train)))
                    for v in sources)
        if total > len(combined):
            overlap = True

    return AffectedSets(
        add_nodes=add_nodes, add_full=add_full, add_partial=add_partial,
        add_edges=add_edges, sub_nodes=sub_nodes, sub_full=sub_full,
        sub_partial=sub_partial, sub_edges=sub_edges, reach=reach,
        has_nodes=req.has_nodes, has_full_attrs=req.has_full_attrs,
        has_partial_attrs=req.has_partial_attrs, has_edges=req.has_edges,
        category_overlap=overlap,
    )


def affected_entities(g: AttributedGraph, req: UnlearnRequest) -> np.ndarray:
    """Every node that directly carries removed information: deleted nodes,
    endpoints of removed edges (including edges removed implicitly with a
    deleted node), and attribute owners."""
    parts = [req.nodes, req.attrs_full, req.partial_owners()]
    if req.has_edges:
        parts.append(edge_endpoints(req.edges, g.num_nodes))
    for v in req.nodes:
        parts.append(g.neighbors(int(v)))
    return node_set(np.concatenate([np.asarray(p, dtype=np.int64).ravel()
                                    for p in parts]) if parts else ())


def unaffected_train_nodes(g: AttributedGraph, req: UnlearnRequest, k: int
                           ) -> np.ndarray:
    """Training nodes farther than k hops from every affected entity."""
    entities = affected_entities(g, req)
    zone = k_hop_ball(g, entities, k)
    excluded = np.zeros(g.num_nodes, dtype=bool)
    excluded[zone] = True
    keep = g.train_mask & ~excluded
    return np.flatnonzero(keep).astype(np.int64)


@dataclass(frozen=True)
class RequestBatch:
    """Ordered unlearning passes that together realize one request."""

    requests: tuple[UnlearnRequest, ...]
    was_split: bool
    reason: str


def _pairwise_disjoint(sets: AffectedSets) -> bool:
    adds = [sets.add_nodes, sets.add_full, sets.add_partial, sets.add_edges]
    subs = [sets.sub_nodes, sets.sub_full, sets.sub_partial, sets.sub_edges]
    for group in (adds, subs):
        for i in range(4):
            for j in range(i + 1, 4):
                if len(np.intersect1d(group[i], group[j])):
                    return False
    return True


def split_for_serializability(g: AttributedGraph, req: UnlearnRequest, k: int
                              ) -> RequestBatch:
    """Split a mixed request into serial passes whose per-category affected
    sets are pairwise disjoint.

    A request already satisfying the disjointness condition stays whole.
    Otherwise it is broken into at most four single-category requests in a
    fixed order (nodes, full attributes, partial attributes, edges); each of
    those is trivially disjoint because only one category is populated.
    """
    active = sum([req.has_nodes, req.has_full_attrs, req.has_partial_attrs,
                  req.has_edges])
    if active <= 1:
        return RequestBatch((req,), False, "single category")
    sets = compute_affected_sets(g, req, k)
    if _pairwise_disjoint(sets):
        return RequestBatch((req,), False, "affected sets pairwise disjoint")
    passes = []
    if req.has_nodes:
        passes.append(UnlearnRequest.make(nodes=req.nodes))
    if req.has_full_attrs:
        passes.append(UnlearnRequest.make(attrs_full=req.attrs_full))
    if req.has_partial_attrs:
        passes.append(UnlearnRequest.make(attrs_partial=req.attrs_partial))
    if req.has_edges:
        passes.append(UnlearnRequest.make(edges=req.edges))
    return RequestBatch(tuple(passes), True, "category affected sets overlap")
