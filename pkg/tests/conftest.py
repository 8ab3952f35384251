import numpy as np
import pytest

from fedgraph import FederatedNode, build_graph

import oracles

CORPUS_SEEDS = range(200)

# criterion number -> (passed, title, note); filled by test_acceptance
ACCEPTANCE = {}


class Case:
    """One random digraph with its fedgraph twin and the id mapping between them."""

    def __init__(self, seed):
        self.seed = seed
        self.n, self.edges, self.inst = oracles.random_digraph(seed)
        self.g = build_graph(oracles.records_of(self.n, self.edges, self.inst))
        # perm[v] = fedgraph index of oracle node v
        self.perm = np.array([self.g.index(FederatedNode(u, i))
                              for i, u in oracles.node_key(self.n, self.inst)])

    def aligned(self, values):
        """Reorder a fedgraph node vector into oracle node order."""
        return np.asarray(values)[self.perm]


@pytest.fixture(scope="session")
def corpus():
    return [Case(s) for s in CORPUS_SEEDS]


def graph_of(*edges):
    """Follow graph from ``(user, instance, user, instance)`` tuples."""
    return build_graph(list(edges))


def intra(*pairs, instance="X"):
    """Single-instance graph from ``(follower, followed)`` user pairs."""
    return build_graph([(a, instance, b, instance) for a, b in pairs])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, note = ACCEPTANCE[num]
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {title}"
        terminalreporter.write_line(line + (f" ({note})" if note else ""))
