import csv
import json
import subprocess
import sys

import networkx as nx
import numpy as np
import pytest

from fedgraph import build_graph, graph, read_edge_list
from fedgraph.bridging import ndto_scores
from fedgraph.cli import SUBCOMMANDS, main
from fedgraph.lurking import lurker_rank
from fedgraph.metrics import structural_summary
from fedgraph.roles import dual_role_overlap, role_scores

from mock_mastodon import MockFediverse

GEN = ["--sizes", "120", "60", "40", "--mixing", "10", "--shell-fraction", "0.05",
       "--lurker-fraction", "0.08", "--reciprocity", "0.3"]


@pytest.fixture(scope="module")
def edges(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "net.csv"
    assert main(["generate", "--seed", "7", *GEN, "--out", str(path)]) == 0
    return path


def _read(path):
    return path.read_text(encoding="utf-8")


def _csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_generate_pipe_into_stats_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        gen = subprocess.run([sys.executable, "-m", "fedgraph", "generate", "--seed", "7", *GEN],
                             capture_output=True, check=True)
        out = tmp_path / f"run{k}"
        res = subprocess.run([sys.executable, "-m", "fedgraph", "stats", "-", "--out", str(out)],
                             input=gen.stdout, capture_output=True)
        assert res.returncode == 0, res.stderr
        outs.append(out)
    for name in ("stats.json", "degree_in.csv", "degree_out.csv", "degree_total.csv"):
        assert _read(outs[0] / name) == _read(outs[1] / name)
    m0, m1 = (json.loads(_read(o / "manifest.json")) for o in outs)
    assert m0["input_digests"] == m1["input_digests"]


def test_stats_on_empty_file_is_a_data_error(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_bytes(b"")
    assert main(["stats", str(empty), "--out", str(tmp_path / "o")]) == 2
    assert "header" in capsys.readouterr().err


def test_header_only_file_is_a_data_error(tmp_path, capsys):
    p = tmp_path / "h.csv"
    p.write_text("source_user,source_instance,target_user,target_instance\n")
    assert main(["stats", str(p), "--out", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    assert main(["stats", "x.csv", "--out", "o", "--bogus"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_missing_input_is_a_data_error(tmp_path):
    assert main(["stats", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2


def test_roles_dual_matches_library(edges, tmp_path):
    out = tmp_path / "roles"
    assert main(["roles", str(edges), "--out", str(out), "--dual", "--percentile", "75"]) == 0
    report = json.loads(_read(out / "roles.json"))
    assert "alternate" not in report
    g = build_graph(read_edge_list(edges))
    merged = graph.merged_network(g, graph.top_instances(g, 5))
    sc = role_scores(merged, scope="merged")
    ov = dual_role_overlap(sc.lurkers(75), sc.bridges(25), merged.n_nodes)
    entry = report["dual"]["merged"]["LR@75 & nDTO@25"]
    assert entry["count"] == len(ov)
    assert entry["pct"] == pytest.approx(ov.percentage, rel=1e-9)


def test_artifacts_equal_library_calls(edges, tmp_path):
    g = build_graph(read_edge_list(edges))
    assert main(["stats", str(edges), "--out", str(tmp_path / "s"), "--path-length", "exact"]) == 0
    table = json.loads(_read(tmp_path / "s" / "stats.json"))["table"]
    lib = structural_summary(g, "exact").table()
    for key, val in lib.items():
        if isinstance(val, float):
            assert table[key] == pytest.approx(val, rel=1e-9), key
        elif isinstance(val, dict):
            assert table[key]["value"] == pytest.approx(val["value"], rel=1e-9)
        else:
            assert table[key] == val, key

    assert main(["lurkers", str(edges), "--out", str(tmp_path / "l")]) == 0
    rows = _csv(tmp_path / "l" / "lurker_scores.csv")
    lr = lurker_rank(g)  # all instances selected: merged network == g
    assert [(r["user"], r["instance"]) for r in rows] == [tuple(n) for n in g.nodes]
    assert np.allclose([float(r["score"]) for r in rows], lr.values, rtol=1e-9, atol=0)

    assert main(["bridges", str(edges), "--out", str(tmp_path / "b")]) == 0
    rows = _csv(tmp_path / "b" / "ndto.csv")
    nd = ndto_scores(g).values
    assert np.allclose([float(r["ndto"]) for r in rows], nd, rtol=1e-9, atol=1e-300)
    assert [int(r["is_strong_bridge"]) for r in rows] == (nd == 0).astype(int).tolist()


def test_every_subcommand_writes_a_manifest(edges, tmp_path):
    for cmd in ("stats", "communities", "lurkers", "bridges", "roles", "flow", "filter", "merge"):
        out = tmp_path / cmd
        assert main([cmd, str(edges), "--out", str(out)]) == 0, cmd
        m = json.loads(_read(out / "manifest.json"))
        assert m["subcommand"] == cmd
        assert set(m) == {"subcommand", "config", "input_digests", "seed", "tool_version",
                          "wall_time_s"}
        assert list(m["input_digests"].values())[0] and m["config"]["input"] == str(edges)
    assert set(SUBCOMMANDS) >= {"generate", "crawl", "export"}


def test_thread_count_does_not_change_outputs(edges, tmp_path):
    for n in (1, 2):
        assert main(["--threads", str(n), "bridges", str(edges), "--out", str(tmp_path / f"t{n}")]) == 0
    assert _read(tmp_path / "t1" / "ndto.csv") == _read(tmp_path / "t2" / "ndto.csv")


def test_flow_scopes(edges, tmp_path):
    for scope in ("instance", "merged"):
        out = tmp_path / scope
        assert main(["flow", str(edges), "--out", str(out), "--scope", scope]) == 0
        rows = _csv(out / "flow.csv")
        assert sum(int(r["edges"]) for r in rows) == json.loads(_read(out / "flow.json"))["total_edges"]
        assert (out / "flow.dot").read_text().startswith("digraph")


def test_merge_reports_identities(edges, tmp_path):
    assert main(["merge", str(edges), "--out", str(tmp_path), "--top", "2"]) == 0
    rep = json.loads(_read(tmp_path / "merge.json"))
    assert rep["identities"] == {"nodes": True, "edges": True}
    merged = build_graph(read_edge_list(tmp_path / "merged.csv"))
    assert merged.n_nodes == rep["merged"]["nodes"] and merged.n_edges == rep["merged"]["edges"]


def test_filter_writes_pruned_edges(edges, tmp_path):
    assert main(["filter", str(edges), "--out", str(tmp_path), "--min-pointing", "2"]) == 0
    rep = json.loads(_read(tmp_path / "filter.json"))
    assert rep["removed_instances"] == []
    assert main(["filter", str(edges), "--out", str(tmp_path / "x"), "--min-pointing", "3"]) == 0
    rep = json.loads(_read(tmp_path / "x" / "filter.json"))
    assert rep["instances"]["after"] == 0


def test_communities_and_partition_import(edges, tmp_path):
    assert main(["communities", str(edges), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    rep = json.loads(_read(tmp_path / "c" / "communities.json"))
    part = tmp_path / "c" / "partition_undirected.csv"
    assert main(["communities", str(edges), "--out", str(tmp_path / "d"), "--partition", str(part),
                 "--orientation", "undirected"]) == 0
    again = json.loads(_read(tmp_path / "d" / "communities.json"))
    assert again["undirected"]["modularity"] == rep["undirected"]["modularity"]
    assert again["undirected"]["source"] == "external"


def test_export_formats(edges, tmp_path):
    g = build_graph(read_edge_list(edges))
    assert main(["export", str(edges), "--format", "graphml", "--out", str(tmp_path / "g.graphml")]) == 0
    h = nx.read_graphml(tmp_path / "g.graphml")
    assert h.number_of_nodes() == g.n_nodes and h.number_of_edges() == g.n_edges
    assert {d["instance"] for _, d in h.nodes(data=True)} == set(g.instances)
    assert main(["export", str(edges), "--format", "dot", "--out", str(tmp_path / "g.dot")]) == 0
    assert _read(tmp_path / "g.dot").count("->") == g.n_edges
    assert (tmp_path / "g.dot.manifest.json").exists()


def test_generate_from_toml(tmp_path):
    cfg = tmp_path / "gen.toml"
    cfg.write_text('instance_sizes = [30, 20]\nmixing = [[0, 5], [5, 0]]\nseed = 3\n')
    out = tmp_path / "g.csv"
    assert main(["generate", "--config", str(cfg), "--out", str(out),
                 "--planted", str(tmp_path / "planted.json")]) == 0
    man = json.loads(_read(tmp_path / "g.csv.manifest.json"))
    assert str(cfg) in man["input_digests"]
    assert main(["generate", "--config", str(tmp_path / "none.toml"), "--out", str(out)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"instance_sizes": [3], "lurker_fraction": 0.9}')
    assert main(["generate", "--config", str(bad), "--out", str(out)]) == 2


def test_crawl_subcommand(tmp_path, monkeypatch):
    monkeypatch.setenv("SALT", "pepper")
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        out = tmp_path / "crawl.csv"
        code = main(["crawl", "--seed-account", "a@one.test", "--rate", "100", "--out", str(out),
                     "--instance-url", f"one.test={mock.url('one.test')}", "--salt-env", "SALT",
                     "--resume", str(tmp_path / "ck.ndjson")])
    assert code == 0
    (rec,) = list(read_edge_list(out))
    assert rec[1] == rec[3] == "one.test" and len(rec[0]) == 16 and rec[0] != "a"
    assert (tmp_path / "ck.ndjson").exists()
