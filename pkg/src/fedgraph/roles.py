"""Role analytics combining lurker and bridge scores.

Flow is always counted in the consumption orientation: a follow edge
``a -> b`` ("a follows b") is information produced by ``b`` and consumed by
``a``. "Edges to lurkers" therefore have a lurking consumer (the follower)
and "edges from lurkers" a lurking producer (the followed user).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .bridging import BRIDGE_PERCENTILES, ndto_scores
from .graph import FollowGraph, GraphError, instance_subnetwork, shell_mask
from .lurking import LURKER_PERCENTILES, LurkerRankConfig, lurker_rank
from .scores import AT_OR_ABOVE, AT_OR_BELOW, RoleSet, ScoreVector, percentile_role_set

PAIRED_PERCENTILES = tuple(zip(LURKER_PERCENTILES, BRIDGE_PERCENTILES))
LURKER_LOCAL_BRIDGE_GLOBAL = "lurkerLocal_bridgeGlobal"
BRIDGE_LOCAL_LURKER_GLOBAL = "bridgeLocal_lurkerGlobal"


@dataclass(frozen=True)
class RoleScores:
    """LurkerRank and nDTO vectors computed on the same network view."""

    lurker: ScoreVector
    bridge: ScoreVector

    @property
    def graph(self) -> FollowGraph:
        return self.lurker.graph

    @property
    def scope(self) -> str:
        return self.lurker.scope

    def lurkers(self, percentile: float) -> RoleSet:
        return percentile_role_set(self.lurker, percentile, AT_OR_ABOVE, kind="lurker")

    def bridges(self, percentile: float) -> RoleSet:
        return percentile_role_set(self.bridge, percentile, AT_OR_BELOW, kind="bridge")


def role_scores(g: FollowGraph, cfg: LurkerRankConfig | None = None,
                scope: str | None = None) -> RoleScores:
    lr = lurker_rank(g, cfg)
    nd = ndto_scores(g)
    if scope is not None:
        lr = _rescope(lr, scope)
        nd = _rescope(nd, scope)
    return RoleScores(lr, nd)


def _rescope(s: ScoreVector, scope: str) -> ScoreVector:
    return ScoreVector(s.graph, s.values, s.method, s.params, s.iterations, s.converged,
                       s.residual, scope)


def local_role_scores(g_merged: FollowGraph, instances: Iterable[str] | None = None,
                      cfg: LurkerRankConfig | None = None,
                      include_isolated: bool = False) -> dict[str, RoleScores]:
    """Role scores of every instance subnetwork of ``g_merged``."""
    names = g_merged.instances if instances is None else list(instances)
    out = {}
    for name in names:
        sub = instance_subnetwork(g_merged, name, include_isolated)
        if sub.n_nodes == 0:
            empty = np.zeros(0)
            out[name] = RoleScores(ScoreVector(sub, empty, "lurkerrank", scope=name),
                                   ScoreVector(sub, empty, "ndto", scope=name))
        else:
            out[name] = role_scores(sub, cfg, scope=name)
    return out


def lurker_sets_by_instance(g_merged: FollowGraph, scope: str = "instance",
                            cfg: LurkerRankConfig | None = None,
                            percentiles=LURKER_PERCENTILES,
                            include_isolated: bool = False) -> dict[str, dict[float, RoleSet]]:
    """Lurker role sets for each instance, scored per instance or on the merged graph."""
    if scope == "merged":
        scores = lurker_rank(g_merged, cfg)
        sets = {p: percentile_role_set(scores, p, AT_OR_ABOVE, kind="lurker")
                for p in percentiles}
        return {name: sets for name in g_merged.instances}
    if scope != "instance":
        raise ValueError(f"scope must be 'instance' or 'merged', not {scope!r}")
    out = {}
    for name in g_merged.instances:
        sub = instance_subnetwork(g_merged, name, include_isolated)
        if sub.n_nodes == 0:
            out[name] = {p: RoleSet("lurker", p, name, frozenset()) for p in percentiles}
            continue
        scores = lurker_rank(sub, cfg)
        out[name] = {p: percentile_role_set(scores, p, AT_OR_ABOVE, kind="lurker")
                     for p in percentiles}
    return out


@dataclass(frozen=True)
class FlowCell:
    producer: str
    consumer: str
    edges: int
    to_lurkers: dict[float, float]
    from_lurkers: dict[float, float]


@dataclass(frozen=True)
class FlowMatrix:
    instances: tuple[str, ...]
    percentiles: tuple[float, ...]
    cells: dict[tuple[str, str], FlowCell] = field(repr=False)

    def rows(self) -> list[dict]:
        out = []
        for (i, j), cell in self.cells.items():
            row = {"source_instance": i, "target_instance": j, "edges": cell.edges}
            for p in self.percentiles:
                row[f"to_lurkers_{p:g}"] = cell.to_lurkers[p]
            for p in self.percentiles:
                row[f"from_lurkers_{p:g}"] = cell.from_lurkers[p]
            out.append(row)
        return out

    def total_edges(self) -> int:
        return sum(cell.edges for cell in self.cells.values())

    def to_dot(self, percentile: float | None = None, include_self: bool = False) -> str:
        """Instance flow digraph, producer -> consumer, labeled with lurker shares."""
        p = self.percentiles[0] if percentile is None else percentile
        lines = ["digraph flow {", "  rankdir=LR;"]
        for name in self.instances:
            lines.append(f'  "{name}";')
        for (i, j), cell in self.cells.items():
            if (i == j and not include_self) or cell.edges == 0:
                continue
            label = (f"{cell.edges} edges\\nto lurkers {cell.to_lurkers[p]:.1f}%"
                     f"\\nfrom lurkers {cell.from_lurkers[p]:.1f}%")
            lines.append(f'  "{i}" -> "{j}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _membership_mask(g: FollowGraph, sets: Mapping[str, Mapping[float, RoleSet]],
                     p: float) -> np.ndarray:
    mask = np.zeros(g.n_nodes, dtype=bool)
    for k, node in enumerate(g.nodes):
        mask[k] = node in sets[node.instance][p]
    return mask


def flow_matrix(g_merged: FollowGraph, lurker_sets: Mapping[str, Mapping[float, RoleSet]],
                percentiles=LURKER_PERCENTILES) -> FlowMatrix:
    """Edge counts and lurker shares for every ordered (producer, consumer) instance pair.

    ``lurker_sets[instance][percentile]`` gives the lurkers of each instance.
    """
    missing = [name for name in g_merged.instances if name not in lurker_sets]
    if missing:
        raise GraphError(f"no lurker sets for instances: {', '.join(missing)}")
    percentiles = tuple(percentiles)
    follower, followed = g_merged.edges()
    consumer_inst = g_merged.node_instance[follower].astype(np.int64)
    producer_inst = g_merged.node_instance[followed].astype(np.int64)
    k = len(g_merged.instances)
    cell = producer_inst * k + consumer_inst
    counts = np.bincount(cell, minlength=k * k)
    to_l, from_l = {}, {}
    for p in percentiles:
        lurker = _membership_mask(g_merged, lurker_sets, p)
        to_l[p] = np.bincount(cell, weights=lurker[follower], minlength=k * k)
        from_l[p] = np.bincount(cell, weights=lurker[followed], minlength=k * k)
    names = g_merged.instances
    cells = {}
    for a in range(k):
        for b in range(k):
            c = a * k + b
            n = int(counts[c])

            def pct(x):
                return 100 * float(x[c]) / n if n else 0.0

            cells[(names[a], names[b])] = FlowCell(
                names[a], names[b], n,
                {p: pct(to_l[p]) for p in percentiles},
                {p: pct(from_l[p]) for p in percentiles})
    return FlowMatrix(tuple(names), percentiles, cells)


@dataclass(frozen=True)
class Overlap:
    percentage: float
    nodes: frozenset = field(repr=False)
    universe: int = 0

    def __len__(self) -> int:
        return len(self.nodes)


def dual_role_overlap(lurkers: RoleSet, bridges: RoleSet,
                      universe_size: int | None = None) -> Overlap:
    """Users in both sets, as a share of the scope's node count."""
    if lurkers.scope != bridges.scope:
        raise GraphError(f"scope mismatch: {lurkers.scope!r} vs {bridges.scope!r}")
    universe = lurkers.universe if universe_size is None else universe_size
    both = lurkers.nodes & bridges.nodes
    return Overlap(100 * len(both) / universe if universe else 0.0, both, universe)


def dual_role_table(scores: RoleScores, pairs=PAIRED_PERCENTILES) -> dict[tuple, Overlap]:
    """Dual-role overlap at each ``(lurker, bridge)`` percentile pair."""
    n = scores.graph.n_nodes
    return {(lp, bp): dual_role_overlap(scores.lurkers(lp), scores.bridges(bp), n)
            for lp, bp in pairs}


def alternate_role_overlap(local: Mapping[str, RoleScores], global_scores: RoleScores,
                           pairing: str = LURKER_LOCAL_BRIDGE_GLOBAL,
                           lurker_percentile: float = 75,
                           instances: Iterable[str] | None = None) -> dict[str, Overlap]:
    """Per instance, share of its local users holding one role locally and the other globally.

    The bridge percentile is ``100 - lurker_percentile``. The universe of an
    instance is the node set of its local subnetwork.
    """
    names = list(global_scores.graph.instances if instances is None else instances)
    missing = [name for name in names if name not in local]
    if missing:
        raise GraphError(f"no local scores for instances: {', '.join(missing)}")
    bridge_percentile = 100 - lurker_percentile
    if pairing == LURKER_LOCAL_BRIDGE_GLOBAL:
        global_set = global_scores.bridges(bridge_percentile).nodes
    elif pairing == BRIDGE_LOCAL_LURKER_GLOBAL:
        global_set = global_scores.lurkers(lurker_percentile).nodes
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    out = {}
    for name in names:
        sc = local[name]
        universe = sc.graph.n_nodes
        if universe == 0:
            out[name] = Overlap(0.0, frozenset(), 0)
            continue
        if pairing == LURKER_LOCAL_BRIDGE_GLOBAL:
            local_set = sc.lurkers(lurker_percentile).nodes
        else:
            local_set = sc.bridges(bridge_percentile).nodes
        both = local_set & global_set
        out[name] = Overlap(100 * len(both) / universe, both, universe)
    return out


def shell_distribution(g_merged: FollowGraph) -> dict[str, int]:
    """Shell-node count per membership instance (zeros included)."""
    counts = np.bincount(g_merged.node_instance[shell_mask(g_merged)],
                         minlength=len(g_merged.instances))
    return dict(zip(g_merged.instances, counts.tolist()))
