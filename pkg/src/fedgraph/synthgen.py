"""Seeded generator of multi-instance follow networks with planted structure.

Sampling is a directed degree-corrected block model: within an instance,
followers and followees are drawn in proportion to lognormal out/in
propensities; across instances, the mixing matrix gives the expected number
of follow edges from users of instance i to users of instance j. Post-passes
then plant

* shell nodes: users with cross-instance edges only;
* lurkers: users following many others and followed by nobody;
* reciprocity: each edge is mirrored with the configured probability,
  except edges whose mirror would give a lurker a follower.

Every core user is guaranteed at least one intra-instance edge, so shells
detected by :func:`fedgraph.graph.shell_nodes` are exactly the planted ones.
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .graph import FederatedNode, FollowGraph

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


def _per_instance(value, k: int, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * k
    value = [float(v) for v in value]
    if len(value) != k:
        raise ConfigError(f"{name} needs {k} entries, got {len(value)}")
    return value


@dataclass
class GeneratorConfig:
    instance_sizes: Sequence[int]
    mean_degree: float | Sequence[float] = 8.0
    mixing: Sequence[Sequence[float]] | None = None
    reciprocity: float = 0.0
    shell_fraction: float | Sequence[float] = 0.0
    lurker_fraction: float | Sequence[float] = 0.0
    lurker_followees: int = 10
    degree_dispersion: float = 0.8
    instance_names: Sequence[str] | None = None
    seed: int = 0

    def __post_init__(self):
        k = len(self.instance_sizes)
        if k == 0:
            raise ConfigError("need at least one instance")
        if any(int(s) < 1 for s in self.instance_sizes):
            raise ConfigError("instance sizes must be >= 1")
        self.instance_sizes = [int(s) for s in self.instance_sizes]
        self.mean_degree = _per_instance(self.mean_degree, k, "mean_degree")
        self.shell_fraction = _per_instance(self.shell_fraction, k, "shell_fraction")
        self.lurker_fraction = _per_instance(self.lurker_fraction, k, "lurker_fraction")
        if self.mixing is None:
            self.mixing = [[0.0] * k for _ in range(k)]
        self.mixing = [[float(x) for x in row] for row in self.mixing]
        if len(self.mixing) != k or any(len(row) != k for row in self.mixing):
            raise ConfigError(f"mixing must be a {k}x{k} matrix")
        if any(x < 0 for row in self.mixing for x in row):
            raise ConfigError("mixing entries must be non-negative")
        if not 0 <= self.reciprocity <= 1:
            raise ConfigError("reciprocity must lie in [0, 1]")
        if any(d < 0 for d in self.mean_degree):
            raise ConfigError("mean_degree must be non-negative")
        for s, l in zip(self.shell_fraction, self.lurker_fraction):
            if not (0 <= s < 1 and 0 <= l < 1):
                raise ConfigError("shell and lurker fractions must lie in [0, 1)")
        if self.lurker_followees < 1:
            raise ConfigError("lurker_followees must be >= 1")
        if self.instance_names is None:
            width = len(str(k - 1))
            self.instance_names = [f"i{n:0{width}d}.example" for n in range(k)]
        self.instance_names = [str(x) for x in self.instance_names]
        if len(set(self.instance_names)) != k:
            raise ConfigError("instance names must be distinct")
        self._check_feasible()

    def _check_feasible(self):
        k = len(self.instance_sizes)
        for i, size in enumerate(self.instance_sizes):
            shells, lurkers = self.counts(i)
            active = size - shells - lurkers
            if active < 2:
                raise ConfigError(f"instance {self.instance_names[i]!r} keeps {active} "
                                  "non-shell non-lurker users; need at least 2")
            if shells and k == 1:
                raise ConfigError("shell nodes need a second instance to link to")
            if shells and not any(self.mixing[i][j] + self.mixing[j][i] > 0
                                  for j in range(k) if j != i):
                raise ConfigError(f"instance {self.instance_names[i]!r} plants shell nodes "
                                  "but has no cross-instance mixing")

    def counts(self, i: int) -> tuple[int, int]:
        size = self.instance_sizes[i]
        return int(round(self.shell_fraction[i] * size)), int(round(self.lurker_fraction[i] * size))

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "GeneratorConfig":
        path = Path(path)
        text = path.read_bytes()
        if path.suffix == ".toml":
            return cls.from_dict(tomllib.loads(text.decode("utf-8")))
        return cls.from_dict(json.loads(text))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticNetwork:
    """Generated network with node identities, edges and planted roles."""

    users: np.ndarray = field(repr=False)
    node_instance: np.ndarray = field(repr=False)
    instances: tuple[str, ...]
    src: np.ndarray = field(repr=False)
    dst: np.ndarray = field(repr=False)
    shell_mask: np.ndarray = field(repr=False)
    lurker_mask: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def graph(self) -> FollowGraph:
        return FollowGraph(self.users, self.node_instance, self.instances, self.src, self.dst)

    def records(self) -> Iterator[tuple[str, str, str, str]]:
        users, inst, names = self.users, self.node_instance, self.instances
        for u, v in zip(self.src.tolist(), self.dst.tolist()):
            yield users[u], names[inst[u]], users[v], names[inst[v]]

    def _nodes(self, mask) -> set[FederatedNode]:
        return {FederatedNode(self.users[i], self.instances[self.node_instance[i]])
                for i in np.flatnonzero(mask).tolist()}

    @property
    def shells(self) -> set[FederatedNode]:
        return self._nodes(self.shell_mask)

    @property
    def lurkers(self) -> set[FederatedNode]:
        return self._nodes(self.lurker_mask)


def _draw(rng, candidates: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    p = weights / weights.sum()
    return candidates[rng.choice(len(candidates), size=size, p=p)]


def generate(cfg: GeneratorConfig) -> SyntheticNetwork:
    """Sample a network; identical configs (including seed) give identical output."""
    rng = np.random.default_rng(cfg.seed)
    k = len(cfg.instance_sizes)
    # nodes are laid out in lexicographic (instance, user) order
    order = sorted(range(k), key=lambda i: cfg.instance_names[i])
    offsets = np.zeros(k + 1, dtype=np.int64)
    for pos, i in enumerate(order):
        offsets[pos + 1] = offsets[pos] + cfg.instance_sizes[i]
    start = {i: int(offsets[pos]) for pos, i in enumerate(order)}
    n = int(offsets[-1])

    users = np.empty(n, dtype=object)
    node_instance = np.empty(n, dtype=np.int32)
    shell = np.zeros(n, dtype=bool)
    lurker = np.zeros(n, dtype=bool)
    out_prop = rng.lognormal(0.0, cfg.degree_dispersion, n)
    in_prop = rng.lognormal(0.0, cfg.degree_dispersion, n)
    for pos, i in enumerate(order):
        size = cfg.instance_sizes[i]
        width = len(str(size - 1))
        lo = start[i]
        users[lo:lo + size] = [f"u{x:0{width}d}" for x in range(size)]
        node_instance[lo:lo + size] = pos
        n_shell, n_lurk = cfg.counts(i)
        picked = lo + rng.permutation(size)[:n_shell + n_lurk]
        shell[picked[:n_shell]] = True
        lurker[picked[n_shell:]] = True
    in_prop[lurker] = 0.0
    active = ~shell & ~lurker

    srcs, dsts = [], []
    for i in range(k):
        lo, size = start[i], cfg.instance_sizes[i]
        idx = np.arange(lo, lo + size)
        act = idx[active[idx]]
        m = int(round(cfg.mean_degree[i] * len(act)))
        if m:
            srcs.append(_draw(rng, act, out_prop[act], m))
            dsts.append(_draw(rng, act, in_prop[act], m))
        lurks = idx[lurker[idx]]
        if len(lurks):
            srcs.append(np.repeat(lurks, cfg.lurker_followees))
            dsts.append(_draw(rng, act, in_prop[act], len(lurks) * cfg.lurker_followees))

    for i in range(k):
        src_pool = np.arange(start[i], start[i] + cfg.instance_sizes[i])
        for j in range(k):
            if i == j or cfg.mixing[i][j] == 0:
                continue
            count = int(rng.poisson(cfg.mixing[i][j]))
            if not count:
                continue
            dst_pool = np.arange(start[j], start[j] + cfg.instance_sizes[j])
            dst_pool = dst_pool[~lurker[dst_pool]]
            srcs.append(_draw(rng, src_pool, out_prop[src_pool], count))
            dsts.append(_draw(rng, dst_pool, in_prop[dst_pool], count))

    src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
    src, dst = _fix_isolation(rng, cfg, start, node_instance, shell, lurker, active,
                              in_prop, src, dst)

    if cfg.reciprocity > 0:
        flip = rng.random(len(src)) < cfg.reciprocity
        flip &= ~lurker[src]
        src, dst = np.concatenate([src, dst[flip]]), np.concatenate([dst, src[flip]])

    keep = src != dst
    key = np.unique(src[keep].astype(np.int64) * n + dst[keep])
    names = tuple(cfg.instance_names[i] for i in order)
    return SyntheticNetwork(users, node_instance, names, key // n, key % n, shell, lurker)


def _fix_isolation(rng, cfg, start, node_instance, shell, lurker, active, in_prop, src, dst):
    """Drop shell intra edges, then give every user its required edge kinds."""
    intra = node_instance[src] == node_instance[dst]
    bad = intra & (shell[src] | shell[dst])
    src, dst = src[~bad], dst[~bad]
    intra = intra[~bad]
    keep = src != dst
    src, dst, intra = src[keep], dst[keep], intra[keep]

    n = len(shell)
    has_intra = np.zeros(n, dtype=bool)
    has_intra[src[intra]] = True
    has_intra[dst[intra]] = True
    has_cross = np.zeros(n, dtype=bool)
    has_cross[src[~intra]] = True
    has_cross[dst[~intra]] = True

    extra_src, extra_dst = [], []
    k = len(cfg.instance_sizes)
    for i in range(k):
        lo, size = start[i], cfg.instance_sizes[i]
        idx = np.arange(lo, lo + size)
        act = idx[active[idx]]
        lacking = idx[active[idx] & ~has_intra[idx]]
        partner = lacking.copy()
        clash = np.ones(len(lacking), dtype=bool)
        while clash.any():
            partner[clash] = act[rng.integers(len(act), size=int(clash.sum()))]
            clash = partner == lacking
        extra_src.append(lacking)
        extra_dst.append(partner)

        lonely = idx[shell[idx] & ~has_cross[idx]]
        if not len(lonely):
            continue
        weights = np.array([cfg.mixing[i][j] + cfg.mixing[j][i] if j != i else 0.0
                            for j in range(k)])
        target_inst = rng.choice(k, size=len(lonely), p=weights / weights.sum())
        outgoing = rng.random(len(lonely)) < 0.5
        for j in np.unique(target_inst).tolist():
            sel = target_inst == j
            jdx = np.arange(start[j], start[j] + cfg.instance_sizes[j])
            jact = jdx[active[jdx]]
            other = _draw(rng, jact, in_prop[jact], int(sel.sum()))
            mine = lonely[sel]
            out = outgoing[sel]
            extra_src.append(np.where(out, mine, other))
            extra_dst.append(np.where(out, other, mine))
    src = np.concatenate([src, *extra_src]).astype(np.int64)
    dst = np.concatenate([dst, *extra_dst]).astype(np.int64)
    return src, dst
