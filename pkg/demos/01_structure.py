# %% [markdown]
# Structure of a synthetic three-instance follow network:
# summary statistics, degree spread and Louvain communities.

# %%
import numpy as np

from fedgraph import louvain, meaningful_communities, metrics, synthgen

cfg = synthgen.GeneratorConfig([400, 250, 150], mean_degree=8,
                               mixing=[[0, 120, 40], [90, 0, 30], [20, 25, 0]],
                               reciprocity=0.35, shell_fraction=0.03, lurker_fraction=0.05,
                               seed=42)
g = synthgen.generate(cfg).graph()
g

# %%
s = metrics.structural_summary(g, "exact")
for row, value in s.table().items():
    print(f"{row:35s} {value}")

# %%
# in-degree is heavy on the producers, out-degree on the planted lurkers
for kind in ("in", "out"):
    d = metrics.degree_distribution(g, kind)
    print(kind, "median", d.median, "q3", d.q3, "max", d.maximum)

# %%
for orientation in ("undirected", "directed"):
    p = louvain(g, orientation, seed=0)
    sizes = np.bincount(p.labels)
    c = meaningful_communities(sizes)
    print(f"{orientation:10s} Q={p.modularity:.3f} communities={c.total} "
          f"with >=10 members={c.meaningful}")
