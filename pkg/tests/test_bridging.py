import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgraph import (FederatedNode, GraphError, bridge_report, build_graph, dto, edge_dto,
                      instance_subnetwork, ndto, ndto_scores)
from fedgraph.bridging import node_dto

import oracles
from conftest import Case, intra

# u -> v, u -> w, w -> v
UVW = intra(("u", "v"), ("u", "w"), ("w", "v"))
X = lambda user: FederatedNode(user, "X")  # noqa: E731


def test_dto_examples():
    # oracle ids: u=0, v=1, w=2
    e = {(0, 1), (0, 2), (2, 1)}
    assert oracles.dto(3, e, 0, 1) == 1.0 and oracles.dto(3, e, 0, 2) == 0.0
    assert dto(UVW, X("u"), X("v")) == 1.0
    assert dto(UVW, X("u"), X("w")) == 0.0


def test_isolated_dyad_is_zero():
    assert dto(intra(("a", "b")), X("a"), X("b")) == 0.0


def test_dto_requires_edge():
    with pytest.raises(GraphError):
        dto(UVW, X("v"), X("u"))


def test_ndto_examples():
    assert ndto(UVW, X("w")) == 0.0
    assert ndto(UVW, X("u")) == 0.5
    tri = intra(*[(a, b) for a in "abc" for b in "abc" if a != b])
    assert ndto(tri, X("a")) > 0


def test_ndto_isolated_node_is_an_error():
    g = instance_subnetwork(build_graph([("a", "X", "c", "Y")]), "X", include_isolated=True)
    with pytest.raises(GraphError):
        ndto(g, X("a"))
    assert math.isnan(ndto_scores(g).values[0])


def test_bridge_report_examples():
    r = bridge_report(UVW)
    assert r.strong_bridges == {X("w")}
    assert r.strong_bridges_no_source_sink == {X("w")}
    tri = intra(*[(a, b) for a in "abc" for b in "abc" if a != b])
    assert bridge_report(tri).strong_bridges == set()


def test_matches_set_oracle_on_corpus_sample():
    for seed in range(0, 200, 5):
        c = Case(seed)
        src, dst = c.g.edges()
        got = edge_dto(c.g)
        inv = np.argsort(c.perm)  # fedgraph index -> oracle id
        ref = oracles.all_dto(c.n, c.edges)
        for u, v, val in zip(inv[src], inv[dst], got):
            assert abs(val - ref[(int(u), int(v))]) <= 1e-12, seed
        mine = c.aligned(ndto_scores(c.g).values)
        theirs = np.array(oracles.ndto(c.n, c.edges))
        assert np.allclose(mine, theirs, rtol=0, atol=1e-12, equal_nan=True), seed


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 12))
    pairs = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                         .filter(lambda e: e[0] != e[1]), min_size=1, max_size=50))
    return pairs


def _graph(pairs):
    return intra(*[(f"v{u:02d}", f"v{v:02d}") for u, v in pairs])


@settings(max_examples=200, deadline=None)
@given(small_graphs())
def test_dto_ranges_and_strong_bridge_equivalence(pairs):
    g = _graph(pairs)
    d = edge_dto(g)
    assert np.all((d >= 0) & (d <= 1))
    scores = node_dto(g, d)
    src, dst = g.edges()
    for x in range(g.n_nodes):
        incident = d[(src == x) | (dst == x)]
        assert (scores[x] == 0) == bool(np.all(incident == 0))
    r = bridge_report(g)
    assert r.strong_bridges == {g.node(x) for x in np.flatnonzero(scores == 0)}


@settings(max_examples=150, deadline=None)
@given(small_graphs(), st.tuples(st.integers(0, 11), st.integers(0, 11)))
def test_edge_without_new_common_neighbor_never_raises_numerators(pairs, extra):
    """Adding an edge leaves every existing overlap numerator unchanged or lower."""
    u, v = extra
    if u == v or (u, v) in pairs:
        return
    n = max(max(max(e) for e in pairs), u, v) + 1
    before = {e: len(oracles.out_sets(n, pairs)[e[0]] & oracles.in_sets(n, pairs)[e[1]])
              for e in pairs}
    grown = set(pairs) | {(u, v)}
    outs, ins = oracles.out_sets(n, grown), oracles.in_sets(n, grown)
    for e, c in before.items():
        gained = len(outs[e[0]] & ins[e[1]])
        # only the new edge itself can create a common neighbor
        creates = (e[0] == u and v in ins[e[1]]) or (e[1] == v and u in outs[e[0]])
        if not creates:
            assert gained <= c


def test_summary_percentages():
    # both shares are over all nodes of the network, sources and sinks included
    s = bridge_report(UVW).summary()
    assert s["strong_bridges"] == 1 and math.isclose(s["strong_bridges_pct"], 100 / 3)
    assert math.isclose(s["strong_bridges_no_source_sink_pct"], 100 / 3)
