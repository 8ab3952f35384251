import json
import math

import numpy as np
import pytest

from fedgraph import inter_instance_edges, lurker_rank, metrics, shell_nodes
from fedgraph.scores import AT_OR_ABOVE, percentile_role_set
from fedgraph.synthgen import ConfigError, GeneratorConfig, generate


def test_deterministic_for_seed():
    cfg = GeneratorConfig([50, 30], mixing=[[0, 10], [5, 0]], reciprocity=0.3,
                          shell_fraction=0.1, lurker_fraction=0.1, seed=11)
    assert list(generate(cfg).records()) == list(generate(cfg).records())
    other = GeneratorConfig(**{**cfg.as_dict(), "seed": 12})
    assert list(generate(other).records()) != list(generate(cfg).records())


def test_zero_mixing_has_no_inter_edges():
    g = generate(GeneratorConfig([10, 10], seed=1)).graph()
    assert len(inter_instance_edges(g)) == 0


def test_planted_shells_detected_exactly():
    net = generate(GeneratorConfig([100, 50], mixing=[[0, 20], [20, 0]], shell_fraction=0.1,
                                   seed=4))
    found = shell_nodes(net.graph())
    assert found == net.shells
    assert sum(n.instance == net.instances[0] for n in found) == 10


def test_full_reciprocity():
    g = generate(GeneratorConfig([60, 40], mixing=[[0, 8], [8, 0]], reciprocity=1.0,
                                 seed=2)).graph()
    assert metrics.reciprocity(g) == 1.0


def test_lurkers_follow_far_more_than_followed():
    net = generate(GeneratorConfig([80, 40], mixing=[[0, 10], [10, 0]], lurker_fraction=0.1,
                                   reciprocity=0.5, seed=3))
    g = net.graph()
    for node in net.lurkers:
        k = g.index(node)
        assert g.out_degree[k] >= 5 * g.in_degree[k]


def test_planted_lurkers_rank_high():
    hits = 0
    for seed in range(10):
        net = generate(GeneratorConfig([120, 60], mixing=[[0, 15], [15, 0]],
                                       lurker_fraction=0.08, reciprocity=0.2, seed=seed))
        top = percentile_role_set(lurker_rank(net.graph()), 75, AT_OR_ABOVE).nodes
        hits += net.lurkers <= top
    assert hits >= 9


def test_mixing_counts_within_three_sigma():
    cfg = GeneratorConfig([300, 300], mixing=[[0, 150], [60, 0]], seed=8)
    g = generate(cfg).graph()
    src, dst = g.edges()
    a, b = g.node_instance[src], g.node_instance[dst]
    for i, j in ((0, 1), (1, 0)):
        mean = cfg.mixing[i][j]
        got = int(np.sum((a == i) & (b == j)))
        assert abs(got - mean) <= 3 * math.sqrt(mean) + 2


def test_no_self_loops_or_duplicates():
    net = generate(GeneratorConfig([30, 30, 20], mixing=np.full((3, 3), 9.0).tolist(),
                                   reciprocity=0.6, shell_fraction=0.1, lurker_fraction=0.1,
                                   seed=5))
    recs = list(net.records())
    assert len(recs) == len(set(recs))
    assert all((su, si) != (du, di) for su, si, du, di in recs)


@pytest.mark.parametrize("kwargs", [
    {"instance_sizes": []},
    {"instance_sizes": [0, 5]},
    {"instance_sizes": [10], "reciprocity": 1.5},
    {"instance_sizes": [10], "shell_fraction": 1.0},
    {"instance_sizes": [10, 10], "shell_fraction": 0.5},  # shells but no mixing
    {"instance_sizes": [10], "shell_fraction": 0.2},  # nowhere to link shells
    {"instance_sizes": [10, 10], "mixing": [[0, -1], [0, 0]]},
    {"instance_sizes": [10, 10], "mixing": [[0, 1]]},
    {"instance_sizes": [3], "lurker_fraction": 0.5},
])
def test_infeasible_configs_rejected(kwargs):
    with pytest.raises(ConfigError):
        GeneratorConfig(**kwargs)


def test_config_files(tmp_path):
    data = {"instance_sizes": [20, 10], "mixing": [[0, 4], [4, 0]], "seed": 9}
    (tmp_path / "c.json").write_text(json.dumps(data))
    (tmp_path / "c.toml").write_text('instance_sizes = [20, 10]\nmixing = [[0, 4], [4, 0]]\n'
                                     'seed = 9\n')
    a = GeneratorConfig.load(tmp_path / "c.json")
    b = GeneratorConfig.load(tmp_path / "c.toml")
    assert a == b
    with pytest.raises(ConfigError, match="colour"):
        GeneratorConfig.from_dict({**data, "colour": 1})
