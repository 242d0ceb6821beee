"""Dataset directory IO.

A dataset directory holds two tab-separated files with header rows:

* ``nodes.tsv``: columns ``id``, ``label``, ``split`` (train / test / none),
  then ``f0`` .. ``f{d-1}`` feature columns.
* ``edges.tsv``: columns ``src``, ``dst``, one undirected edge per row.

The loader symmetrizes directed input, collapses duplicate edges, drops
self-loops, and validates ids; all such repairs are reported as warnings.
``convert`` turns generic edge-list plus feature files into this layout.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .graph import AttributedGraph


class DatasetError(ValueError):
    """Malformed dataset files."""


SPLIT_NAMES = {"train": 0, "test": 1, "none": 2}


def save_dataset(g: AttributedGraph, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = g.feature_dim
    header = ["id", "label", "split"] + [f"f{j}" for j in range(d)]
    with open(out / "nodes.tsv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(header)
        for v in range(g.num_nodes):
            split = "train" if g.train_mask[v] else \
                "test" if g.test_mask[v] else "none"
            writer.writerow([v, int(g.labels[v]), split]
                            + [repr(float(x)) for x in g.features[v]])
    with open(out / "edges.tsv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["src", "dst"])
        for u, v in g.edge_list():
            writer.writerow([int(u), int(v)])


def load_dataset(dir_path, num_classes: int | None = None,
                 warnings: list[str] | None = None) -> AttributedGraph:
    """Read a dataset directory into an attributed graph."""
    root = Path(dir_path)
    nodes_path = root / "nodes.tsv"
    edges_path = root / "edges.tsv"
    for path in (nodes_path, edges_path):
        if not path.exists():
            raise DatasetError(f"missing dataset file {path}")

    ids, labels, splits, feats = [], [], [], []
    with open(nodes_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{nodes_path}: empty file") from None
        if header[:3] != ["id", "label", "split"]:
            raise DatasetError(
                f"{nodes_path}:1: header must start with id, label, split")
        d = len(header) - 3
        if d < 1 or header[3:] != [f"f{j}" for j in range(d)]:
            raise DatasetError(
                f"{nodes_path}:1: feature columns must be f0..f{{d-1}}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3 + d:
                raise DatasetError(
                    f"{nodes_path}:{lineno}: expected {3 + d} columns, "
                    f"got {len(row)}")
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                feats.append([float(x) for x in row[3:]])
            except ValueError as exc:
                raise DatasetError(f"{nodes_path}:{lineno}: {exc}") from None
            if row[2] not in SPLIT_NAMES:
                raise DatasetError(
                    f"{nodes_path}:{lineno}: split must be one of "
                    f"{sorted(SPLIT_NAMES)}")
            splits.append(row[2])

    n = len(ids)
    if sorted(ids) != list(range(n)):
        raise DatasetError(f"{nodes_path}: node ids must be exactly 0..{n - 1}")
    order = np.argsort(ids)
    labels_arr = np.asarray(labels, dtype=np.int64)[order]
    feats_arr = np.asarray(feats, dtype=np.float64)[order]
    splits_arr = np.asarray(splits, dtype=object)[order]
    train = splits_arr == "train"
    test = splits_arr == "test"

    edges = []
    with open(edges_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{edges_path}: empty file") from None
        if header != ["src", "dst"]:
            raise DatasetError(f"{edges_path}:1: header must be src, dst")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DatasetError(
                    f"{edges_path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                u, v = int(row[0]), int(row[1])
            except ValueError as exc:
                raise DatasetError(f"{edges_path}:{lineno}: {exc}") from None
            if not (0 <= u < n and 0 <= v < n):
                raise DatasetError(
                    f"{edges_path}:{lineno}: edge ({u}, {v}) references an "
                    "unknown node")
            if u == v:
                if warnings is not None:
                    warnings.append(f"{edges_path}:{lineno}: dropped self-loop "
                                    f"on node {u}")
                continue
            edges.append((u, v))

    raw = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(raw):
        canon = np.unique(np.sort(raw, axis=1), axis=0)
        if warnings is not None and len(canon) < len(raw):
            warnings.append(f"{edges_path}: collapsed "
                            f"{len(raw) - len(canon)} duplicate or mirrored "
                            "edge rows")
    else:
        canon = raw

    c = num_classes if num_classes is not None else int(labels_arr.max()) + 1
    return AttributedGraph.from_edges(
        num_nodes=n, edges=canon, features=feats_arr, labels=labels_arr,
        train_mask=train, test_mask=test, num_classes=c)


def dataset_stats(g: AttributedGraph) -> dict:
    return {
        "num_nodes": g.num_nodes,
        "num_edges": g.num_edges,
        "feature_dim": g.feature_dim,
        "num_classes": g.num_classes,
        "num_train": int(g.train_mask.sum()),
        "num_test": int(g.test_mask.sum()),
    }


def _sniff_split(line: str) -> str:
    return "," if "," in line else None


def convert(edges_file, features_file, out_dir, train_fraction: float = 0.9,
            stratified: bool = True, seed: int = 0) -> dict:
    """Convert generic edge-list and feature files into the native layout.

    ``features_file`` rows are ``id label f0 f1 ...`` (comma or whitespace
    separated; a non-numeric first line is skipped as a header). The split is
    drawn here, stratified by class unless disabled, and recorded in the
    manifest alongside the seed so converted datasets are reproducible.
    """
    feats, labels, ids = [], [], []
    with open(features_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",") if _sniff_split(line) else line.split()
            try:
                node, label = int(parts[0]), int(parts[1])
                row = [float(x) for x in parts[2:]]
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header line
                raise DatasetError(
                    f"{features_file}:{lineno}: expected 'id label f0 ...'")
            ids.append(node)
            labels.append(label)
            feats.append(row)
    if not ids:
        raise DatasetError(f"{features_file}: no feature rows found")
    n = len(ids)
    if sorted(ids) != list(range(n)):
        raise DatasetError(f"{features_file}: node ids must be exactly 0..{n-1}")
    order = np.argsort(ids)
    labels_arr = np.asarray(labels, dtype=np.int64)[order]
    feats_arr = np.asarray(feats, dtype=np.float64)[order]
    if feats_arr.ndim != 2 or len({len(f) for f in feats}) != 1:
        raise DatasetError(f"{features_file}: inconsistent feature widths")

    edges = []
    with open(edges_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",") if _sniff_split(line) else line.split()
            try:
                u, v = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise DatasetError(
                    f"{edges_file}:{lineno}: expected 'src dst'")
            if u == v:
                continue
            edges.append((u, v))

    rng = np.random.Generator(np.random.PCG64(seed))
    train = np.zeros(n, dtype=bool)
    if stratified:
        for cls in np.unique(labels_arr):
            members = np.flatnonzero(labels_arr == cls)
            take = int(round(train_fraction * len(members)))
            train[rng.permutation(members)[:take]] = True
    else:
        take = int(round(train_fraction * n))
        train[rng.permutation(n)[:take]] = True

    g = AttributedGraph.from_edges(
        num_nodes=n, edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        features=feats_arr, labels=labels_arr, train_mask=train,
        test_mask=~train, num_classes=int(labels_arr.max()) + 1)
    save_dataset(g, out_dir)
    manifest = {
        "source_edges": str(edges_file),
        "source_features": str(features_file),
        "train_fraction": train_fraction,
        "stratified": stratified,
        "seed": seed,
        "stats": dataset_stats(g),
    }
    with open(Path(out_dir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
