"""Louvain community detection and modularity.

Both orientations share one optimizer over a weighted directed matrix W:

    Q = (1/m) * sum_ij [W_ij - gamma * kout_i * kin_j / m] * [c_i == c_j]

with m = sum(W). The undirected case uses the symmetrized simple graph with
each edge stored in both directions, which makes Q equal to the usual
undirected modularity.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .graph import FederatedNode, FollowGraph, GraphError, structural_order
from .metrics import summarize_values

log = logging.getLogger(__name__)

ORIENTATIONS = ("directed", "undirected")


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray = field(repr=False)
    count: int
    modularity: float
    orientation: str
    levels: tuple[float, ...] = ()

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.count)

    def as_dict(self, g: FollowGraph) -> dict[FederatedNode, int]:
        return dict(zip(g.nodes, self.labels.tolist()))


def weight_matrix(g: FollowGraph, orientation: str) -> sp.csr_matrix:
    if orientation == "directed":
        return g.adjacency()
    if orientation == "undirected":
        indptr, indices = g.undirected()
        return sp.csr_matrix((np.ones(len(indices)), indices, indptr),
                             shape=(g.n_nodes, g.n_nodes))
    raise ValueError(f"orientation must be one of {ORIENTATIONS}, not {orientation!r}")


def canonical_labels(labels) -> np.ndarray:
    """Relabel communities 0..k-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse.ravel()]


def _modularity(w: sp.csr_matrix, labels: np.ndarray, resolution: float) -> float:
    m = w.sum()
    if m == 0:
        return 0.0
    coo = w.tocoo()
    internal = coo.data[labels[coo.row] == labels[coo.col]].sum()
    k = labels.max() + 1
    tot_out = np.bincount(labels, weights=np.asarray(w.sum(axis=1)).ravel(), minlength=k)
    tot_in = np.bincount(labels, weights=np.asarray(w.sum(axis=0)).ravel(), minlength=k)
    return float(internal / m - resolution * np.dot(tot_out, tot_in) / m ** 2)


def modularity(g: FollowGraph, partition, orientation: str = "undirected",
               resolution: float = 1.0) -> float:
    """Modularity of ``partition`` (a :class:`Partition`, label array or node mapping)."""
    labels = partition_labels(g, partition)
    return _modularity(weight_matrix(g, orientation), canonical_labels(labels), resolution)


def partition_labels(g: FollowGraph, partition) -> np.ndarray:
    if isinstance(partition, Partition):
        partition = partition.labels
    if isinstance(partition, Mapping):
        missing = [node for node in g.nodes if node not in partition]
        if missing:
            shown = ", ".join(f"{u}@{i}" for u, i in missing[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            raise GraphError(f"partition misses {len(missing)} nodes: {shown}{more}")
        return np.asarray([partition[node] for node in g.nodes])
    labels = np.asarray(partition)
    if labels.shape != (g.n_nodes,):
        raise GraphError(f"partition labels {labels.shape[0] if labels.ndim else 0} nodes, "
                         f"graph has {g.n_nodes}")
    return labels


def _one_level(w: sp.csr_matrix, rng: np.random.Generator, resolution: float):
    """Local moving phase; returns community labels and whether anything moved."""
    n = w.shape[0]
    m = w.sum()
    wt = w.T.tocsr()
    kout = np.asarray(w.sum(axis=1)).ravel()
    kin = np.asarray(w.sum(axis=0)).ravel()
    labels = np.arange(n)
    tot_out = kout.copy()
    tot_in = kin.copy()
    out_ptr, out_idx, out_w = w.indptr, w.indices, w.data
    in_ptr, in_idx, in_w = wt.indptr, wt.indices, wt.data
    gamma = resolution / m
    moved_any = False
    while True:
        moved = 0
        for i in rng.permutation(n).tolist():
            ci = labels[i]
            links: dict[int, float] = {}
            for ptr, idx, wts in ((out_ptr, out_idx, out_w), (in_ptr, in_idx, in_w)):
                for k in range(ptr[i], ptr[i + 1]):
                    j = idx[k]
                    if j != i:
                        c = labels[j]
                        links[c] = links.get(c, 0.0) + wts[k]
            tot_out[ci] -= kout[i]
            tot_in[ci] -= kin[i]
            best_c = ci
            best = links.get(ci, 0.0) - gamma * (kout[i] * tot_in[ci] + kin[i] * tot_out[ci])
            stay = best
            for c in sorted(links):
                gain = links[c] - gamma * (kout[i] * tot_in[c] + kin[i] * tot_out[c])
                if gain > best + 1e-12 * max(1.0, abs(best)) and gain > stay:
                    best, best_c = gain, c
            tot_out[best_c] += kout[i]
            tot_in[best_c] += kin[i]
            if best_c != ci:
                labels[i] = best_c
                moved += 1
        if not moved:
            break
        moved_any = True
    return canonical_labels(labels), moved_any


def louvain(g: FollowGraph, orientation: str = "undirected", seed: int = 0,
            resolution: float = 1.0) -> Partition:
    """Multi-level Louvain optimization of (directed or undirected) modularity.

    Node visit order in each pass is shuffled with ``seed``; among equal gains
    the lowest community id wins, and a node only moves on a strict gain.
    Nodes are first put in a structural (colour refinement) order, so the
    result does not depend on user identifiers, and community ids are
    numbered by first appearance in that order.
    """
    w = weight_matrix(g, orientation)
    if w.nnz == 0:
        raise GraphError("louvain needs at least one edge")
    order = structural_order(g)
    wp = w[order][:, order].tocsr()
    rng = np.random.default_rng(seed)
    labels = np.arange(g.n_nodes)
    current = wp
    levels = [_modularity(wp, labels, resolution)]
    while True:
        level_labels, moved = _one_level(current, rng, resolution)
        if not moved:
            break
        labels = level_labels[labels]
        q = _modularity(wp, labels, resolution)
        if q < levels[-1] - 1e-12:
            raise AssertionError(f"modularity decreased across levels: {levels[-1]} -> {q}")
        levels.append(q)
        k = level_labels.max() + 1
        agg = sp.csr_matrix((np.ones(len(level_labels)), (np.arange(len(level_labels)),
                                                           level_labels)), shape=(len(level_labels), k))
        current = (agg.T @ current @ agg).tocsr()
        log.debug("louvain level %d: %d communities, Q=%.6f", len(levels) - 1, k, q)
    out = np.empty(g.n_nodes, dtype=np.int64)
    out[order] = canonical_labels(labels)
    q = _modularity(w, out, resolution)
    return Partition(out, int(out.max()) + 1, q, orientation, tuple(levels))


@dataclass(frozen=True)
class CommunityCounts:
    total: int
    meaningful: int
    min_size: int
    size_histogram: dict[int, int]
    size_summary: dict[str, float]


def meaningful_communities(partition, min_size: int = 10) -> CommunityCounts:
    """Count communities with at least ``min_size`` members plus the size distribution.

    ``partition`` is a :class:`Partition` or a plain sequence of community sizes.
    """
    sizes = partition.sizes() if isinstance(partition, Partition) else np.asarray(partition)
    sizes = sizes[sizes > 0]
    hist = Counter(sizes.tolist())
    return CommunityCounts(int(len(sizes)), int(np.count_nonzero(sizes >= min_size)), min_size,
                           dict(sorted(hist.items())), summarize_values(sizes))
