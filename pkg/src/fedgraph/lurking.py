"""LurkerRank on follow graphs.

The score is computed on the consumption graph, i.e. the follow graph with
every edge reversed: if ``v`` follows ``u`` then information flows
``u -> v`` and ``v`` consumes from ``u``. In that orientation, for a node v
with in-neighbors (producers it reads) and out-neighbors (its readers)::

    L_in(v)  = 1/|out(v)| * sum_{u in in(v)} |out(u)|/|in(u)| * LR(u)
    L_out(v) = |in(v)| / sum_{u in out(v)} |in(u)|
               * sum_{u in out(v)} |in(u)|/|out(u)| * LR(u)
    LR(v)    = alpha * L_in(v) * (1 + L_out(v)) + (1 - alpha) * p(v)

Every neighborhood size is add-one smoothed. Updates are synchronous and the
vector is L1-normalized after each sweep. Higher score = stronger lurker.

The update is quadratic in LR, so plain repeated sweeps can crawl (contraction
near 0.9 per sweep) or settle into a 2-cycle around an unstable fixed point
(a bidirectional 3-path does this). By default the sweeps are therefore
combined by Anderson mixing over the last few iterates; ``anderson_depth=0``
gives plain sweeps. Either way the stopping test is the residual of one
plain sweep, ``||T(x) - x||_1``, so a converged result is a fixed point of
the equations above whichever scheme produced it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import FollowGraph, GraphError
from .scores import AT_OR_ABOVE, ScoreVector, percentile_role_set  # noqa: F401

LURKER_PERCENTILES = (95, 90, 75)


@dataclass(frozen=True)
class LurkerRankConfig:
    alpha: float = 0.85
    tolerance: float = 1e-8
    max_iterations: int = 100
    personalization: np.ndarray | None = None
    anderson_depth: int = 5

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.anderson_depth < 0:
            raise ValueError("anderson_depth must be >= 0")
        if self.personalization is not None:
            p = np.asarray(self.personalization, dtype=np.float64)
            if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
                raise ValueError("personalization must be non-negative and sum to 1")

    def params(self) -> dict:
        return {"alpha": self.alpha, "tolerance": self.tolerance,
                "max_iterations": self.max_iterations, "anderson_depth": self.anderson_depth,
                "personalization": "uniform" if self.personalization is None else "custom"}


def lurker_rank(g: FollowGraph, cfg: LurkerRankConfig | None = None,
                callback: Callable[[int, np.ndarray], None] | None = None) -> ScoreVector:
    """Score every node of the follow graph ``g`` by LurkerRank.

    ``callback(iteration, scores)`` is invoked after each normalized sweep.
    Non-convergence is reported through ``converged`` and ``residual``.
    """
    cfg = cfg or LurkerRankConfig()
    n = g.n_nodes
    if n == 0:
        raise GraphError("empty graph")
    if cfg.personalization is None:
        p = np.full(n, 1.0 / n)
    else:
        p = np.asarray(cfg.personalization, dtype=np.float64)
        if len(p) != n:
            raise ValueError(f"personalization has {len(p)} entries for {n} nodes")

    # consumption in-degree = followees, consumption out-degree = followers
    din = g.out_degree.astype(np.float64) + 1
    dout = g.in_degree.astype(np.float64) + 1
    follows = g.adjacency()  # row v: the producers v consumes from
    followed_by = follows.T.tocsr()  # row v: the consumers of v
    in_weight = dout / din
    out_weight = din / dout
    out_mass = followed_by @ din
    has_out = g.in_degree > 0
    out_scale = np.zeros(n)
    out_scale[has_out] = din[has_out] / out_mass[has_out]

    alpha = cfg.alpha
    depth = cfg.anderson_depth

    def sweep(x):
        l_in = (follows @ (in_weight * x)) / dout
        l_out = out_scale * (followed_by @ (out_weight * x))
        y = alpha * l_in * (1 + l_out) + (1 - alpha) * p
        total = y.sum()
        return y / total if total > 0 else p.copy()

    lr = np.full(n, 1.0 / n)
    xs: list[np.ndarray] = []  # recent iterates and their sweeps, for mixing
    ys: list[np.ndarray] = []
    residual = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        y = sweep(lr)
        residual = float(np.abs(y - lr).sum())
        if residual < cfg.tolerance or depth == 0:
            lr = y
        else:
            xs.append(lr)
            ys.append(y)
            if len(xs) > depth + 1:
                del xs[0], ys[0]
            lr = y
            if len(xs) > 1:
                gs = np.array(ys)
                fs = gs - np.array(xs)
                gamma = np.linalg.lstsq(np.diff(fs, axis=0).T, fs[-1], rcond=None)[0]
                mixed = y - np.diff(gs, axis=0).T @ gamma
                if np.all(mixed >= 0) and mixed.sum() > 0:
                    lr = mixed / mixed.sum()
                else:  # extrapolated out of the simplex: restart the history
                    del xs[:-1], ys[:-1]
        if callback is not None:
            callback(iterations, lr)
        if residual < cfg.tolerance:
            break
    return ScoreVector(g, lr, "lurkerrank", cfg.params(), iterations,
                       residual < cfg.tolerance, residual)


def lurker_sets(scores: ScoreVector, percentiles=LURKER_PERCENTILES) -> dict:
    """Lurker role sets keyed by percentile."""
    return {p: percentile_role_set(scores, p, AT_OR_ABOVE, kind="lurker") for p in percentiles}
