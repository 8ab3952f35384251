"""Directed topological overlap and node-centric bridge scores.

For an edge ``u -> v`` the directed topological overlap is::

    DTO(u, v) = |out(u) & in(v)| / ((|out(u)| - 1) + (|in(v)| - 1) - |out(u) & in(v)|)

and is 0 for an isolated dyad (``|out(u)| <= 1`` and ``|in(v)| <= 1``). The
node score ``nDTO(u)`` averages DTO over all edges touching ``u``, divided by
the number of distinct neighbors. Low nDTO means strong bridging; nDTO = 0
marks a strong bridge.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import intersect_counts
from .graph import FederatedNode, FollowGraph, GraphError
from .scores import AT_OR_BELOW, RoleSet, ScoreVector, percentile_role_set

BRIDGE_PERCENTILES = (5, 10, 25)


def edge_dto(g: FollowGraph) -> np.ndarray:
    """DTO of every edge, aligned with ``g.edges()``."""
    src, dst = g.edges()
    common = intersect_counts(g.out_indptr, g.out_indices, g.in_indptr, g.in_indices,
                              src, dst).astype(np.float64)
    a = g.out_degree[src].astype(np.float64) - 1
    b = g.in_degree[dst].astype(np.float64) - 1
    denom = a + b - common
    out = np.zeros(len(src))
    ok = denom > 0
    out[ok] = common[ok] / denom[ok]
    return out


def dto(g: FollowGraph, u, v) -> float:
    """DTO of the edge ``u -> v`` (node indices or ``(user, instance)`` pairs)."""
    u = u if isinstance(u, (int, np.integer)) else g.index(u)
    v = v if isinstance(v, (int, np.integer)) else g.index(v)
    if not g.has_edge(u, v):
        raise GraphError(f"no edge {g.node(u)} -> {g.node(v)}")
    out_u, in_v = g.out_neighbors(u), g.in_neighbors(v)
    common = len(np.intersect1d(out_u, in_v, assume_unique=True))
    denom = (len(out_u) - 1) + (len(in_v) - 1) - common
    return common / denom if denom > 0 else 0.0


def neighbor_counts(g: FollowGraph) -> np.ndarray:
    """``|in(u) | out(u)|`` per node (mutual neighbors counted once)."""
    indptr, _ = g.undirected()
    return np.diff(indptr)


def node_dto(g: FollowGraph, edge_scores: np.ndarray | None = None) -> np.ndarray:
    """nDTO per node; NaN for nodes without edges."""
    if edge_scores is None:
        edge_scores = edge_dto(g)
    src, dst = g.edges()
    total = np.bincount(src, weights=edge_scores, minlength=g.n_nodes)
    total += np.bincount(dst, weights=edge_scores, minlength=g.n_nodes)
    k = neighbor_counts(g)
    out = np.full(g.n_nodes, np.nan)
    out[k > 0] = total[k > 0] / k[k > 0]
    return out


def ndto(g: FollowGraph, u) -> float:
    """nDTO of a single node; isolated nodes raise."""
    u = u if isinstance(u, (int, np.integer)) else g.index(u)
    ins, outs = g.in_neighbors(u), g.out_neighbors(u)
    k = len(np.union1d(ins, outs))
    if k == 0:
        raise GraphError(f"nDTO undefined for isolated node {g.node(u)}")
    total = sum(dto(g, int(v), u) for v in ins) + sum(dto(g, u, int(v)) for v in outs)
    return total / k


def ndto_scores(g: FollowGraph) -> ScoreVector:
    return ScoreVector(g, node_dto(g), "ndto")


@dataclass(frozen=True)
class BridgeReport:
    scores: ScoreVector = field(repr=False)
    strong_bridges: frozenset = field(repr=False)
    strong_bridges_no_source_sink: frozenset = field(repr=False)
    n_nodes: int = 0
    n_non_source_sink: int = 0

    def bridge_sets(self, percentiles=BRIDGE_PERCENTILES) -> dict[float, RoleSet]:
        return {p: percentile_role_set(self.scores, p, AT_OR_BELOW, kind="bridge")
                for p in percentiles}

    def summary(self, percentiles=BRIDGE_PERCENTILES) -> dict:
        sets = self.bridge_sets(percentiles)
        n = self.n_nodes
        return {
            "scope": self.scores.scope,
            "nodes": n,
            "strong_bridges": len(self.strong_bridges),
            "strong_bridges_pct": 100 * len(self.strong_bridges) / n if n else 0.0,
            "strong_bridges_no_source_sink": len(self.strong_bridges_no_source_sink),
            "strong_bridges_no_source_sink_pct":
                100 * len(self.strong_bridges_no_source_sink) / n if n else 0.0,
            "ndto_percentiles": {f"{p:g}": 100 * len(s) / n if n else 0.0
                                 for p, s in sets.items()},
        }


def bridge_report(g: FollowGraph) -> BridgeReport:
    """nDTO vector plus strong bridges, with and without sources and sinks.

    nDTO is computed on the full graph; the source/sink exclusion only
    filters the reported set.
    """
    scores = ndto_scores(g)
    strong = scores.values == 0
    indeg, outdeg = g.in_degree, g.out_degree
    source_or_sink = (indeg == 0) != (outdeg == 0)

    def to_nodes(mask) -> frozenset[FederatedNode]:
        return frozenset(g.node(i) for i in np.flatnonzero(mask).tolist())

    return BridgeReport(scores, to_nodes(strong), to_nodes(strong & ~source_or_sink),
                        g.n_nodes, int(np.count_nonzero(~source_or_sink)))
