"""Structural statistics of follow graphs.

Statistics marked "undirected" run on the symmetrized simple graph, where a
mutual pair collapses to one edge. Statistics that are undefined on a given
graph return ``None`` rather than a placeholder number.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from ._kernels import intersect_counts
from .graph import FollowGraph, GraphError

ASSORTATIVITY_MODES = ("undirected", "out_in", "in_in", "out_out", "in_out")


def density(g: FollowGraph) -> float:
    n = g.n_nodes
    return g.n_edges / (n * (n - 1)) if n > 1 else 0.0


def source_sink_fractions(g: FollowGraph) -> tuple[float, float]:
    """Fractions of nodes with only outgoing (sources) and only incoming (sinks) edges."""
    indeg, outdeg = g.in_degree, g.out_degree
    n = g.n_nodes
    sources = int(np.count_nonzero((indeg == 0) & (outdeg > 0)))
    sinks = int(np.count_nonzero((outdeg == 0) & (indeg > 0)))
    return sources / n, sinks / n


def undirected_degree(g: FollowGraph) -> np.ndarray:
    indptr, _ = g.undirected()
    return np.diff(indptr)


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    if len(x) == 0 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    return float(dx @ dy / math.sqrt(float(dx @ dx) * float(dy @ dy)))


def degree_assortativity(g: FollowGraph, mode: str = "out_in") -> float | None:
    """Pearson correlation of endpoint degrees over edges.

    ``mode`` is ``"undirected"`` (total degree on the symmetrized graph, each
    edge taken in both orientations) or ``"<src>_<dst>"`` naming which degree
    of the source and target enters, e.g. ``"out_in"``. Returns ``None`` when
    either side has zero variance.
    """
    if mode == "undirected":
        indptr, indices = g.undirected()
        deg = np.diff(indptr)
        rows = np.repeat(np.arange(g.n_nodes), deg)
        return _pearson(deg[rows], deg[indices])
    if mode not in ASSORTATIVITY_MODES:
        raise ValueError(f"unknown assortativity mode {mode!r}; choose from {ASSORTATIVITY_MODES}")
    a, b = mode.split("_")
    deg = {"in": g.in_degree, "out": g.out_degree}
    src, dst = g.edges()
    return _pearson(deg[a][src], deg[b][dst])


def _edge_triangles(g: FollowGraph) -> np.ndarray:
    """Per node, twice the number of triangles it belongs to (undirected)."""
    indptr, indices = g.undirected()
    rows = np.repeat(np.arange(g.n_nodes, dtype=np.int64), np.diff(indptr))
    upper = rows < indices
    us, vs = rows[upper], indices[upper].astype(np.int64)
    common = intersect_counts(indptr, indices, indptr, indices, us, vs)
    per_node = np.bincount(us, weights=common, minlength=g.n_nodes)
    per_node += np.bincount(vs, weights=common, minlength=g.n_nodes)
    return per_node


def transitivity(g: FollowGraph) -> float:
    """Global clustering: 3 x triangles / connected triples (0 when no triples)."""
    deg = undirected_degree(g).astype(np.float64)
    triples = float(np.sum(deg * (deg - 1) / 2))
    if triples == 0:
        return 0.0
    # sum over nodes of 2*T_v equals 6 * triangles
    closed = float(np.sum(_edge_triangles(g))) / 2
    return closed / triples


def local_clustering(g: FollowGraph) -> np.ndarray:
    """Local clustering per node; nodes of degree <= 1 get 0."""
    deg = undirected_degree(g).astype(np.float64)
    tri2 = _edge_triangles(g)
    out = np.zeros(g.n_nodes)
    ok = deg > 1
    out[ok] = tri2[ok] / (deg[ok] * (deg[ok] - 1))
    return out


def clustering_coefficient(g: FollowGraph, averaging: str = "deg_gt1") -> float | None:
    """Average local clustering.

    ``"full"`` averages over all nodes (degree <= 1 counts as 0);
    ``"deg_gt1"`` only over nodes of degree > 1 and is ``None`` if there are none.
    """
    local = local_clustering(g)
    if averaging == "full":
        return float(local.mean()) if g.n_nodes else None
    if averaging != "deg_gt1":
        raise ValueError(f"unknown averaging {averaging!r}")
    mask = undirected_degree(g) > 1
    return float(local[mask].mean()) if mask.any() else None


def reciprocity(g: FollowGraph) -> float | None:
    """Fraction of directed edges whose reverse edge also exists."""
    if g.n_edges == 0:
        return None
    n = g.n_nodes
    src, dst = g.edges()
    key = src.astype(np.int64) * n + dst
    rev = dst.astype(np.int64) * n + src
    pos = np.searchsorted(key, rev)
    pos[pos == len(key)] = 0
    return float(np.count_nonzero(key[pos] == rev)) / g.n_edges


@dataclass(frozen=True)
class Components:
    count: int
    labels: np.ndarray = field(repr=False)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.count)


def connected_components(g: FollowGraph, kind: str = "strong") -> Components:
    if kind not in ("strong", "weak"):
        raise ValueError(f"kind must be 'strong' or 'weak', not {kind!r}")
    count, labels = csgraph.connected_components(g.adjacency(np.int8), directed=True,
                                                 connection=kind)
    # relabel by first appearance so labels are stable across library versions
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(count, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(count)
    return Components(int(count), rank[inverse])


@dataclass(frozen=True)
class PathLength:
    value: float | None
    method: str
    reachable_pairs: int | None = None
    connected: bool | None = None
    sources: int | None = None


def approx_path_length(n: int) -> float:
    """Random-graph estimate ln(N) / ln(ln(N))."""
    if n < 3:
        raise GraphError(f"ln(N)/ln(ln(N)) needs N >= 3 (ln ln N > 0); got N={n}")
    return math.log(n) / math.log(math.log(n))


def _bfs_distance_sums(g: FollowGraph, sources: np.ndarray, batch_bytes: int = 64 << 20):
    indptr, indices = g.undirected()
    n = g.n_nodes
    mat = csr_matrix((np.ones(len(indices), dtype=np.int8), indices, indptr), shape=(n, n))
    batch = max(1, batch_bytes // (8 * max(n, 1)))
    total = 0
    pairs = 0
    for start in range(0, len(sources), batch):
        dist = csgraph.shortest_path(mat, method="D", directed=True, unweighted=True,
                                     indices=sources[start:start + batch])
        finite = np.isfinite(dist) & (dist > 0)
        total += int(dist[finite].sum())
        pairs += int(np.count_nonzero(finite))
    return total, pairs


def average_path_length(g: FollowGraph, mode: str = "exact", samples: int | None = None,
                        seed: int = 0) -> PathLength:
    """Mean shortest-path length over reachable ordered pairs of the symmetrized graph.

    ``mode`` is ``"exact"`` (BFS from every node), ``"sampled"`` (BFS from
    ``samples`` random sources drawn with ``seed``) or ``"approx"``.
    """
    n = g.n_nodes
    if mode == "approx":
        return PathLength(approx_path_length(n), "approx")
    if n < 2:
        raise GraphError("path length needs at least 2 nodes")
    if mode == "exact":
        sources = np.arange(n)
    elif mode == "sampled":
        if not samples or samples < 1:
            raise ValueError("sampled mode needs samples >= 1")
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, size=min(samples, n), replace=False))
    else:
        raise ValueError(f"unknown path-length mode {mode!r}")
    total, pairs = _bfs_distance_sums(g, sources)
    value = total / pairs if pairs else None
    connected = pairs == len(sources) * (n - 1)
    return PathLength(value, mode, pairs, connected, len(sources))


@dataclass(frozen=True)
class DegreeDistribution:
    kind: str
    degrees: np.ndarray
    counts: np.ndarray
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def quartiles(self) -> dict[str, float]:
        return {"min": self.minimum, "q1": self.q1, "median": self.median,
                "q3": self.q3, "max": self.maximum}


def summarize_values(values) -> dict[str, float]:
    """Five-number summary (linear-interpolated quartiles) of a sample."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return {k: None for k in ("min", "q1", "median", "q3", "max")}
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


def degree_distribution(g: FollowGraph, kind: str = "in") -> DegreeDistribution:
    deg = {"in": g.in_degree, "out": g.out_degree}.get(kind)
    if kind == "total":
        deg = g.in_degree + g.out_degree
    if deg is None:
        raise ValueError(f"kind must be in, out or total, not {kind!r}")
    values, counts = np.unique(deg, return_counts=True)
    s = summarize_values(deg)
    return DegreeDistribution(kind, values, counts, s["min"], s["q1"], s["median"],
                              s["q3"], s["max"])


@dataclass(frozen=True)
class StructuralSummary:
    node_count: int
    edge_count: int
    density: float
    pct_sources: float
    pct_sinks: float
    avg_degree_undirected: float
    avg_in_degree: float
    assortativity_directed: float | None
    assortativity_undirected: float | None
    transitivity_undirected: float
    clustering_deg_gt1: float | None
    clustering_full: float | None
    reciprocity_pct: float | None
    scc_count: int
    wcc_count: int
    avg_path_length: PathLength

    def as_dict(self) -> dict:
        return asdict(self)

    def table(self) -> dict:
        """Rows keyed by their conventional report names (``*`` = orientation discarded)."""
        apl = self.avg_path_length
        return {
            "#nodes": self.node_count,
            "#edges": self.edge_count,
            "density": self.density,
            "% sources": self.pct_sources,
            "% sinks": self.pct_sinks,
            "average degree*": self.avg_degree_undirected,
            "average in-degree": self.avg_in_degree,
            "degree assortativity*": self.assortativity_undirected,
            "degree assortativity": self.assortativity_directed,
            "transitivity*": self.transitivity_undirected,
            "clustering coefficient*": self.clustering_deg_gt1,
            "clustering coefficient (full averaging)*": self.clustering_full,
            "reciprocity": self.reciprocity_pct,
            "average path length": {"value": apl.value, "method": apl.method,
                                    "connected": apl.connected},
            "#strongly connected components": self.scc_count,
            "#weakly connected components*": self.wcc_count,
        }


def structural_summary(g: FollowGraph, path_length: str = "approx", samples: int | None = None,
                       seed: int = 0, assortativity_mode: str = "out_in") -> StructuralSummary:
    if g.n_nodes == 0:
        raise GraphError("empty graph")
    src_frac, sink_frac = source_sink_fractions(g)
    indptr, _ = g.undirected()
    rec = reciprocity(g)
    return StructuralSummary(
        node_count=g.n_nodes,
        edge_count=g.n_edges,
        density=density(g),
        pct_sources=100 * src_frac,
        pct_sinks=100 * sink_frac,
        avg_degree_undirected=float(indptr[-1]) / g.n_nodes,
        avg_in_degree=g.n_edges / g.n_nodes,
        assortativity_directed=degree_assortativity(g, assortativity_mode),
        assortativity_undirected=degree_assortativity(g, "undirected"),
        transitivity_undirected=transitivity(g),
        clustering_deg_gt1=clustering_coefficient(g, "deg_gt1"),
        clustering_full=clustering_coefficient(g, "full"),
        reciprocity_pct=None if rec is None else 100 * rec,
        scc_count=connected_components(g, "strong").count,
        wcc_count=connected_components(g, "weak").count,
        avg_path_length=average_path_length(g, path_length, samples, seed),
    )
