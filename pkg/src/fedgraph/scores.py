"""Node-aligned score vectors and percentile-based role sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import FederatedNode, FollowGraph

AT_OR_ABOVE = "at_or_above"
AT_OR_BELOW = "at_or_below"


def scope_of(g: FollowGraph) -> str:
    """Scope label of a network view: its instance name if it has one, else ``"merged"``."""
    return g.instances[0] if len(g.instances) == 1 else "merged"


@dataclass(frozen=True)
class ScoreVector:
    """Scores aligned with ``graph`` node order; NaN marks unscored nodes."""

    graph: FollowGraph = field(repr=False)
    values: np.ndarray = field(repr=False)
    method: str
    params: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    scope: str = ""

    def __post_init__(self):
        if not self.scope:
            object.__setattr__(self, "scope", scope_of(self.graph))

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[FederatedNode, float]:
        return dict(zip(self.graph.nodes, self.values.tolist()))

    def ranks(self, descending: bool = True) -> np.ndarray:
        """1-based competition ranks (tied scores share the best rank); NaN ranked last."""
        vals = np.where(np.isnan(self.values), -np.inf if descending else np.inf, self.values)
        key = -vals if descending else vals
        return np.searchsorted(np.sort(key), key, side="left").astype(np.int64) + 1


@dataclass(frozen=True)
class RoleSet:
    kind: str
    percentile: float
    scope: str
    nodes: frozenset = field(repr=False)
    threshold: float = math.nan
    universe: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node) -> bool:
        return node in self.nodes

    @property
    def fraction(self) -> float:
        return len(self.nodes) / self.universe if self.universe else 0.0


def nearest_rank(values: np.ndarray, percentile: float) -> float:
    """Smallest observed value with at least ``percentile`` % of values <= it."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise ValueError("empty score vector")
    k = max(1, math.ceil(percentile / 100 * values.size))
    return float(values[k - 1])


def percentile_mask(scores: ScoreVector, percentile: float, direction: str) -> np.ndarray:
    if not 0 < percentile < 100:
        raise ValueError(f"percentile must lie in (0, 100), got {percentile}")
    vals = scores.values
    finite = ~np.isnan(vals)
    if not finite.any():
        raise ValueError("empty score vector")
    q = nearest_rank(vals[finite], percentile)
    if direction == AT_OR_ABOVE:
        return finite & (vals >= q)
    if direction == AT_OR_BELOW:
        return finite & (vals <= q)
    raise ValueError(f"direction must be {AT_OR_ABOVE!r} or {AT_OR_BELOW!r}")


def percentile_role_set(scores: ScoreVector, percentile: float, direction: str = AT_OR_ABOVE,
                        kind: str | None = None) -> RoleSet:
    """Nodes whose score is at or above (or below) the nearest-rank percentile.

    Ties with the cut-off value are all included, so a set can hold more
    than the nominal share of nodes.
    """
    mask = percentile_mask(scores, percentile, direction)
    finite = scores.values[~np.isnan(scores.values)]
    g = scores.graph
    nodes = frozenset(g.node(i) for i in np.flatnonzero(mask).tolist())
    if kind is None:
        kind = "lurker" if direction == AT_OR_ABOVE else "bridge"
    return RoleSet(kind, percentile, scores.scope, nodes,
                   threshold=nearest_rank(finite, percentile), universe=g.n_nodes)
