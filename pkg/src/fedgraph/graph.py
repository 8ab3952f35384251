"""Federated follow graph: data model and network views.

A node is a ``(user, instance)`` pair; an edge ``u -> v`` means "u follows v".
Graphs are immutable and stored as sorted CSR arrays in both directions so
that every downstream vector is aligned to one deterministic node order,
lexicographic by ``(instance, user)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed input records or invalid graph queries."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FederatedNode(NamedTuple):
    user: str
    instance: str


def _csr(n: int, rows: np.ndarray, cols: np.ndarray):
    """Sorted CSR (indptr, indices) of the pairs (rows[k], cols[k])."""
    order = np.lexsort((cols, rows))
    indices = cols[order].astype(np.int32, copy=False)
    counts = np.bincount(rows, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


class FollowGraph:
    """Immutable directed follow graph over federated nodes.

    Use :func:`build_graph` or :meth:`from_arrays` to construct one; the
    initializer trusts its arguments (sorted nodes, deduplicated edges).
    """

    def __init__(self, users, node_instance, instances, src, dst, duplicates_dropped=0):
        self.users = np.asarray(users, dtype=object)
        self.node_instance = np.asarray(node_instance, dtype=np.int32)
        self.instances: tuple[str, ...] = tuple(instances)
        n = len(self.users)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        self.out_indptr, self.out_indices = _csr(n, src, dst)
        self.in_indptr, self.in_indices = _csr(n, dst, src)
        self.duplicates_dropped = int(duplicates_dropped)
        self._index: dict[FederatedNode, int] | None = None
        self._undirected: tuple[np.ndarray, np.ndarray] | None = None
        for arr in (self.users, self.node_instance, self.out_indptr, self.out_indices,
                    self.in_indptr, self.in_indices):
            arr.flags.writeable = False

    @classmethod
    def from_arrays(cls, users: Sequence[str], instances: Sequence[str],
                    src: np.ndarray, dst: np.ndarray) -> "FollowGraph":
        """Build from per-node identifiers and integer edge endpoints.

        Nodes are reordered lexicographically by ``(instance, user)``;
        duplicate edges are dropped and counted, self-loops rejected.
        """
        users = np.asarray(users, dtype=object)
        inst = np.asarray(instances, dtype=object)
        if len(users) != len(inst):
            raise GraphError("users and instances must have equal length")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if np.any(src == dst):
            raise GraphError("self-edge: a node cannot follow itself")
        pairs = list(zip(inst.tolist(), users.tolist()))
        if len(set(pairs)) != len(pairs):
            raise GraphError("duplicate (user, instance) node")
        order = sorted(range(len(pairs)), key=pairs.__getitem__)
        order = np.asarray(order, dtype=np.int64)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        instance_names = sorted(set(inst.tolist()))
        code = {name: k for k, name in enumerate(instance_names)}
        node_instance = np.fromiter((code[x] for x in inst[order]), dtype=np.int32,
                                    count=len(order))
        return cls._from_sorted(users[order], node_instance, instance_names,
                                rank[src], rank[dst])

    @classmethod
    def _from_sorted(cls, users, node_instance, instances, src, dst) -> "FollowGraph":
        n = len(users)
        key = np.unique(src.astype(np.int64) * max(n, 1) + dst)
        dropped = len(src) - len(key)
        return cls(users, node_instance, instances, key // max(n, 1), key % max(n, 1),
                   duplicates_dropped=dropped)

    # -- basic accessors -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.users)

    @property
    def n_edges(self) -> int:
        return len(self.out_indices)

    def __len__(self) -> int:
        return self.n_nodes

    def __repr__(self) -> str:
        return (f"FollowGraph(nodes={self.n_nodes}, edges={self.n_edges}, "
                f"instances={len(self.instances)})")

    @property
    def nodes(self) -> list[FederatedNode]:
        inst = self.instances
        return [FederatedNode(u, inst[k]) for u, k in zip(self.users.tolist(),
                                                           self.node_instance.tolist())]

    def node(self, i: int) -> FederatedNode:
        return FederatedNode(self.users[i], self.instances[self.node_instance[i]])

    def index(self, node: FederatedNode | tuple[str, str]) -> int:
        if self._index is None:
            self._index = {v: k for k, v in enumerate(self.nodes)}
        try:
            return self._index[FederatedNode(*node)]
        except KeyError:
            raise GraphError(f"unknown node {tuple(node)!r}") from None

    def __contains__(self, node) -> bool:
        try:
            self.index(node)
        except GraphError:
            return False
        return True

    def out_neighbors(self, i: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[i]:self.out_indptr[i + 1]]

    def in_neighbors(self, i: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[i]:self.in_indptr[i + 1]]

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoint arrays ``(src, dst)`` sorted by source then target."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int32), self.out_degree)
        return src, self.out_indices

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.out_neighbors(u)
        k = np.searchsorted(nbrs, v)
        return bool(k < len(nbrs) and nbrs[k] == v)

    def adjacency(self, dtype=np.float64) -> sp.csr_matrix:
        """Followship adjacency as a CSR matrix, ``A[u, v] = 1`` iff u follows v."""
        data = np.ones(self.n_edges, dtype=dtype)
        return sp.csr_matrix((data, self.out_indices, self.out_indptr),
                             shape=(self.n_nodes, self.n_nodes))

    def instance_index(self) -> dict[str, np.ndarray]:
        """Map each instance to the sorted node indices it hosts."""
        order = np.argsort(self.node_instance, kind="stable")
        bounds = np.searchsorted(self.node_instance[order],
                                 np.arange(len(self.instances) + 1))
        return {name: order[bounds[k]:bounds[k + 1]]
                for k, name in enumerate(self.instances)}

    def instance_sizes(self) -> dict[str, int]:
        counts = np.bincount(self.node_instance, minlength=len(self.instances))
        return dict(zip(self.instances, counts.tolist()))

    def inter_instance_mask(self) -> np.ndarray:
        """Boolean mask over :meth:`edges` marking cross-instance edges."""
        src, dst = self.edges()
        return self.node_instance[src] != self.node_instance[dst]

    def edge_records(self) -> Iterable[tuple[str, str, str, str]]:
        src, dst = self.edges()
        users, inst, names = self.users, self.node_instance, self.instances
        for u, v in zip(src.tolist(), dst.tolist()):
            yield users[u], names[inst[u]], users[v], names[inst[v]]

    def subgraph(self, mask: np.ndarray, drop_isolated: bool = False,
                 keep_instances=()) -> "FollowGraph":
        """Induced subgraph on the nodes selected by ``mask``.

        With ``drop_isolated`` nodes left without any edge are removed too.
        Instances listed by code in ``keep_instances`` stay registered even
        when none of their users remain.
        """
        mask = np.asarray(mask, dtype=bool).copy()
        src, dst = self.edges()
        keep = mask[src] & mask[dst]
        src, dst = src[keep], dst[keep]
        if drop_isolated:
            touched = np.zeros(self.n_nodes, dtype=bool)
            touched[src] = True
            touched[dst] = True
            mask &= touched
        new_id = np.full(self.n_nodes, -1, dtype=np.int64)
        new_id[mask] = np.arange(int(mask.sum()))
        used = np.union1d(self.node_instance[mask],
                          np.asarray(keep_instances, dtype=np.int32)).astype(np.int64)
        remap = np.full(len(self.instances), -1, dtype=np.int32)
        remap[used] = np.arange(len(used), dtype=np.int32)
        return FollowGraph(self.users[mask], remap[self.node_instance[mask]],
                           [self.instances[k] for k in used], new_id[src], new_id[dst])

    def undirected(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted CSR ``(indptr, indices)`` of the symmetrized simple graph.

        Orientation is discarded and a mutual pair becomes one undirected edge.
        """
        if self._undirected is None:
            n = max(self.n_nodes, 1)
            src, dst = self.edges()
            src = src.astype(np.int64)
            dst = dst.astype(np.int64)
            key = np.unique(np.concatenate([src * n + dst, dst * n + src]))
            rows = key // n
            indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=self.n_nodes), out=indptr[1:])
            indices = (key % n).astype(np.int32)
            indptr.flags.writeable = False
            indices.flags.writeable = False
            self._undirected = (indptr, indices)
        return self._undirected

    def reversed(self) -> "FollowGraph":
        """Same nodes with every edge flipped (followship -> consumption)."""
        src, dst = self.edges()
        return FollowGraph(self.users, self.node_instance, self.instances, dst, src)


@dataclass(frozen=True)
class InstanceGraph:
    """Instance-level projection: ``weights[(i, j)]`` user edges from i to j, i != j."""

    instances: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    @property
    def weights(self) -> dict[tuple[str, str], int]:
        names = self.instances
        return {(names[a], names[b]): int(w)
                for a, b, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())}

    def pointing_instances(self) -> dict[str, int]:
        """Number of distinct instances with at least one edge into each instance."""
        counts = np.bincount(self.dst, minlength=len(self.instances))
        return dict(zip(self.instances, counts.tolist()))


def build_graph(edge_records: Iterable[Sequence[str]]) -> FollowGraph:
    """Build a :class:`FollowGraph` from ``(src_user, src_instance, dst_user, dst_instance)``.

    Duplicate records collapse into one edge (the number dropped is kept in
    ``duplicates_dropped``). Errors name the 1-based record number.
    """
    index: dict[tuple[str, str], int] = {}
    src: list[int] = []
    dst: list[int] = []
    for line, rec in enumerate(edge_records, start=1):
        if len(rec) != 4:
            raise GraphError(f"expected 4 fields, got {len(rec)}", line)
        su, si, du, di = rec
        for field in rec:
            if not isinstance(field, str) or not field:
                raise GraphError("empty or non-string identifier", line)
        if su == du and si == di:
            raise GraphError(f"self-edge on ({su!r}, {si!r})", line)
        a = index.setdefault((si, su), len(index))
        b = index.setdefault((di, du), len(index))
        src.append(a)
        dst.append(b)
    if not src:
        raise GraphError("no edge records")
    keys = list(index)
    return FollowGraph.from_arrays([k[1] for k in keys], [k[0] for k in keys],
                                   np.asarray(src), np.asarray(dst))


def _instance_code(g: FollowGraph, instance: str) -> int:
    try:
        return g.instances.index(instance)
    except ValueError:
        raise GraphError(f"unknown instance {instance!r}") from None


def instance_subnetwork(g: FollowGraph, instance: str, include_isolated: bool = False) -> FollowGraph:
    """Users of ``instance`` and the follow edges among them.

    Users whose every edge leaves the instance are dropped unless
    ``include_isolated`` is set.
    """
    code = _instance_code(g, instance)
    return g.subgraph(g.node_instance == code, drop_isolated=not include_isolated,
                      keep_instances=[code])


def merged_network(g: FollowGraph, instances: Iterable[str],
                   include_isolated: bool = False) -> FollowGraph:
    """Induced subgraph on all users of the selected instances.

    Intra- and inter-instance edges among them are kept. Users left without
    edges by the restriction are dropped unless ``include_isolated`` is set.
    """
    selected = sorted(set(instances))
    if not selected:
        raise GraphError("merged network needs at least one instance")
    codes = [_instance_code(g, name) for name in selected]
    return g.subgraph(np.isin(g.node_instance, codes), drop_isolated=not include_isolated,
                      keep_instances=codes)


def top_instances(g: FollowGraph, k: int = 5) -> list[str]:
    """The ``k`` instances hosting the most users (ties by name)."""
    sizes = g.instance_sizes()
    return sorted(sizes, key=lambda name: (-sizes[name], name))[:k]


def _intra_incident(g: FollowGraph) -> tuple[np.ndarray, np.ndarray]:
    src, dst = g.edges()
    inter = g.node_instance[src] != g.node_instance[dst]
    has_intra = np.zeros(g.n_nodes, dtype=bool)
    has_intra[src[~inter]] = True
    has_intra[dst[~inter]] = True
    has_any = (g.out_degree + g.in_degree) > 0
    return has_any, has_intra


def shell_mask(g: FollowGraph) -> np.ndarray:
    """Boolean mask of shell nodes: incident edges exist and all cross instances."""
    has_any, has_intra = _intra_incident(g)
    return has_any & ~has_intra


def shell_nodes(g: FollowGraph) -> set[FederatedNode]:
    return {g.node(i) for i in np.flatnonzero(shell_mask(g)).tolist()}


def inter_instance_edges(g: FollowGraph) -> set[tuple[FederatedNode, FederatedNode]]:
    src, dst = g.edges()
    mask = g.node_instance[src] != g.node_instance[dst]
    return {(g.node(u), g.node(v)) for u, v in zip(src[mask].tolist(), dst[mask].tolist())}


def project_instance_graph(g: FollowGraph) -> InstanceGraph:
    src, dst = g.edges()
    a = g.node_instance[src].astype(np.int64)
    b = g.node_instance[dst].astype(np.int64)
    cross = a != b
    k = len(g.instances)
    keys, counts = np.unique(a[cross] * max(k, 1) + b[cross], return_counts=True)
    return InstanceGraph(g.instances, (keys // max(k, 1)).astype(np.int32),
                         (keys % max(k, 1)).astype(np.int32), counts.astype(np.int64))


def filter_noisy_instances(g: FollowGraph, min_pointing_instances: int = 51) -> FollowGraph:
    """Drop every instance pointed to by fewer than ``min_pointing_instances`` others.

    The count is over distinct pointing instances, not user edges. Users of
    kept instances stay even if all their edges went to removed instances.
    """
    if min_pointing_instances < 0:
        raise GraphError("threshold must be non-negative")
    if min_pointing_instances == 0:
        return g
    proj = project_instance_graph(g)
    pointing = np.bincount(proj.dst, minlength=len(g.instances))
    keep = pointing >= min_pointing_instances
    return g.subgraph(keep[g.node_instance])


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = x.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def structural_colors(g: FollowGraph, max_rounds: int = 32) -> np.ndarray:
    """Colour refinement (1-WL) classes of the nodes, numbered by sorted hash.

    Colours depend only on structure and instance names, never on user
    identifiers, so renaming users leaves them unchanged.
    """
    n = g.n_nodes
    src, dst = g.edges()
    _, color = np.unique(g.node_instance, return_inverse=True)
    color = color.ravel().astype(np.int64)
    n_colors = int(color.max()) + 1 if n else 0
    with np.errstate(over="ignore"):
        for _ in range(max_rounds):
            h = _mix64(color)
            out_sum = np.zeros(n, dtype=np.uint64)
            in_sum = np.zeros(n, dtype=np.uint64)
            np.add.at(out_sum, src, _mix64(color[dst] * 2 + 1))
            np.add.at(in_sum, dst, _mix64(color[src] * 2 + 2))
            h = _mix64(h ^ _mix64(out_sum)) + _mix64(in_sum ^ np.uint64(0x5851F42D4C957F2D))
            _, new = np.unique(h, return_inverse=True)
            new = new.ravel().astype(np.int64)
            k = int(new.max()) + 1 if n else 0
            color = new
            if k == n_colors:
                break
            n_colors = k
    return color


def structural_order(g: FollowGraph) -> np.ndarray:
    """Node permutation sorted by structural colour (ties by node index)."""
    color = structural_colors(g)
    return np.lexsort((np.arange(g.n_nodes), color))
