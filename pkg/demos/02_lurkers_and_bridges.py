# %% [markdown]
# Lurkers (LurkerRank) and local bridges (nDTO) on the same network,
# how much the two roles overlap, and where lurkers receive content from.

# %%
from fedgraph import bridge_report, lurker_rank, synthgen
from fedgraph.roles import dual_role_table, flow_matrix, lurker_sets_by_instance, role_scores

net = synthgen.generate(synthgen.GeneratorConfig(
    [300, 200], mean_degree=6, mixing=[[0, 80], [60, 0]], reciprocity=0.3,
    lurker_fraction=0.06, seed=7))
g = net.graph()

# %%
lr = lurker_rank(g)
print("sweeps:", lr.iterations, "residual:", lr.residual)
top = sorted(zip(lr.values, g.nodes), reverse=True)[:5]
for score, node in top:
    print(f"{score:.5f}  {node}  planted={node in net.lurkers}")

# %%
bridges = bridge_report(g)
print(bridges.summary())

# %%
# dual roles: lurker at the P-th percentile and bridge at the (100-P)-th
for (lp, bp), ov in dual_role_table(role_scores(g, scope="merged")).items():
    print(f"LR@{lp} & nDTO@{bp}: {ov.percentage:.2f}% ({len(ov.nodes)} users)")

# %%
# consumption orientation: producer instance -> consumer instance
fm = flow_matrix(g, lurker_sets_by_instance(g))
for row in fm.rows():
    print(row)
