"""CSV, GraphML and DOT writers (and the partition reader)."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import quoteattr

import numpy as np

from .graph import FederatedNode, FollowGraph, GraphError
from .scores import ScoreVector


# reports carry 10 significant digits: enough for any use of the numbers, and
# it hides last-bit summation-order noise so relabeled inputs print identically
REPORT_DIGITS = 10


def report_float(x: float) -> float:
    return float(f"{x:.{REPORT_DIGITS}g}")


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(report_float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_scores(scores: ScoreVector, path, descending: bool = True) -> None:
    """``user,instance,score,rank`` per node; rank 1 is the top score."""
    ranks = scores.ranks(descending)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["user", "instance", "score", "rank"])
        for node, s, r in zip(scores.graph.nodes, scores.values.tolist(), ranks.tolist()):
            w.writerow([node.user, node.instance, _num(s), r])


def write_ndto(scores: ScoreVector, path) -> None:
    """``user,instance,ndto,is_strong_bridge`` per node (blank nDTO for isolated nodes)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["user", "instance", "ndto", "is_strong_bridge"])
        for node, s in zip(scores.graph.nodes, scores.values.tolist()):
            w.writerow([node.user, node.instance, _num(s), int(s == 0)])


def write_histogram(degrees, counts, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["degree", "count"])
        w.writerows(zip(np.asarray(degrees).tolist(), np.asarray(counts).tolist()))


def write_partition(g: FollowGraph, labels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["user", "instance", "community_id"])
        for node, c in zip(g.nodes, np.asarray(labels).tolist()):
            w.writerow([node.user, node.instance, c])


def read_partition(path) -> dict[FederatedNode, int]:
    """Read a ``user,instance,community_id`` CSV into a node -> community mapping."""
    out: dict[FederatedNode, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ["user", "instance", "community_id"]:
            raise GraphError("missing header user,instance,community_id", 1)
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise GraphError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                out[FederatedNode(row[0], row[1])] = int(row[2])
            except ValueError:
                raise GraphError(f"community id {row[2]!r} is not an integer", lineno) from None
    return out


def write_rows(rows: list[dict], path) -> None:
    """Write a list of flat dicts as CSV with the first row's keys as header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _num(v) if isinstance(v, float) else v for k, v in row.items()})


def _node_id(k: int) -> str:
    return f"n{k}"


def graphml_lines(g: FollowGraph) -> Iterable[str]:
    yield '<?xml version="1.0" encoding="UTF-8"?>\n'
    yield '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">\n'
    yield '  <key id="user" for="node" attr.name="user" attr.type="string"/>\n'
    yield '  <key id="instance" for="node" attr.name="instance" attr.type="string"/>\n'
    yield '  <graph id="follow" edgedefault="directed">\n'
    for k, node in enumerate(g.nodes):
        yield (f'    <node id="{_node_id(k)}"><data key="user">{_escape(node.user)}</data>'
               f'<data key="instance">{_escape(node.instance)}</data></node>\n')
    src, dst = g.edges()
    for u, v in zip(src.tolist(), dst.tolist()):
        yield f'    <edge source="{_node_id(u)}" target="{_node_id(v)}"/>\n'
    yield "  </graph>\n</graphml>\n"


def _escape(text: str) -> str:
    return quoteattr(text)[1:-1]


def dot_lines(g: FollowGraph) -> Iterable[str]:
    yield "digraph follow {\n"
    for k, node in enumerate(g.nodes):
        yield (f'  {_node_id(k)} [label={_dot_str(node.user)}, '
               f'instance={_dot_str(node.instance)}];\n')
    src, dst = g.edges()
    for u, v in zip(src.tolist(), dst.tolist()):
        yield f"  {_node_id(u)} -> {_node_id(v)};\n"
    yield "}\n"


def _dot_str(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_graph(g: FollowGraph, path, fmt: str | None = None) -> None:
    """Write ``g`` as GraphML or DOT, with the instance as a node attribute."""
    path = Path(path)
    fmt = fmt or {".graphml": "graphml", ".dot": "dot", ".gv": "dot"}.get(path.suffix)
    if fmt not in ("graphml", "dot"):
        raise ValueError(f"unknown graph format {fmt!r}; use graphml or dot")
    lines = graphml_lines(g) if fmt == "graphml" else dot_lines(g)
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines)
