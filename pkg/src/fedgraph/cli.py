"""Command-line entry point: ``fedgraph <subcommand> ...``.

Every subcommand writes its artifacts plus a ``manifest.json`` describing
the run. Exit status is 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import bridging, community, export, graph, ingest, lurking, metrics, roles, synthgen
from ._kernels import set_threads

log = logging.getLogger("fedgraph")

SUBCOMMANDS = ("stats", "communities", "lurkers", "bridges", "roles", "flow", "filter",
               "merge", "generate", "crawl", "export")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def tool_version() -> str:
    try:
        return version("fedgraph")
    except PackageNotFoundError:
        return "0+unknown"


# -- serialization -----------------------------------------------------------

def jsonable(obj):
    if isinstance(obj, dict):
        return {_key(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else export.report_float(x)
    return obj


def _key(k) -> str:
    if isinstance(k, tuple):
        return "|".join(str(x) for x in k)
    if isinstance(k, float) and k.is_integer():
        return str(int(k))
    return str(k)


def dump_json(data, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(data), fh, indent=2, ensure_ascii=False, allow_nan=False)
        fh.write("\n")


# -- input -------------------------------------------------------------------

class Inputs:
    """Loads edge lists while recording their digests for the manifest."""

    def __init__(self):
        self.digests: dict[str, str] = {}

    def records(self, source: str):
        if source == "-":
            data = sys.stdin.buffer.read()
            self.digests["<stdin>"] = hashlib.sha256(data).hexdigest()
            return list(ingest.iter_edge_list(io.BytesIO(data).readlines()))
        path = Path(source)
        if not path.exists():
            raise graph.GraphError(f"input file not found: {source}")
        self.digests[str(path)] = _file_digest(path)
        return list(ingest.read_edge_list(path))

    def graph(self, source: str) -> graph.FollowGraph:
        g = graph.build_graph(self.records(source))
        if g.duplicates_dropped:
            log.info("dropped %d duplicate edges", g.duplicates_dropped)
        return g


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _selection(args, g: graph.FollowGraph) -> list[str]:
    if getattr(args, "instances", None):
        return list(args.instances)
    return graph.top_instances(g, args.top)


def _lr_config(args) -> lurking.LurkerRankConfig:
    return lurking.LurkerRankConfig(alpha=args.alpha, tolerance=args.tol,
                                    max_iterations=args.max_iter,
                                    anderson_depth=args.anderson_depth)


def _pct(part: int, whole: int) -> float:
    return 100 * part / whole if whole else 0.0


# -- subcommands -------------------------------------------------------------

def cmd_stats(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    summary = metrics.structural_summary(g, args.path_length, args.samples, args.seed,
                                         args.assortativity)
    report = {
        "table": summary.table(),
        "assortativity_variants": {m: metrics.degree_assortativity(g, m)
                                   for m in metrics.ASSORTATIVITY_MODES},
        "duplicates_dropped": g.duplicates_dropped,
        "degree_quartiles": {},
    }
    for kind in ("in", "out", "total"):
        dist = metrics.degree_distribution(g, kind)
        report["degree_quartiles"][kind] = dist.quartiles()
        export.write_histogram(dist.degrees, dist.counts, out / f"degree_{kind}.csv")
    dump_json(report, out / "stats.json")
    return report


def cmd_communities(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    orientations = community.ORIENTATIONS if args.orientation == "both" else (args.orientation,)
    report = {}
    external = export.read_partition(args.partition) if args.partition else None
    for orientation in orientations:
        if external is not None:
            labels = community.canonical_labels(community.partition_labels(g, external))
            q = community.modularity(g, labels, orientation, args.resolution)
            part = community.Partition(labels, int(labels.max()) + 1, q, orientation)
        else:
            part = community.louvain(g, orientation, args.seed, args.resolution)
            export.write_partition(g, part.labels, out / f"partition_{orientation}.csv")
        counts = community.meaningful_communities(part, args.min_size)
        report[orientation] = {
            "modularity": part.modularity,
            "communities": counts.total,
            "meaningful_communities": counts.meaningful,
            "min_size": counts.min_size,
            "size_quartiles": counts.size_summary,
            "levels": list(part.levels),
            "source": "external" if external is not None else "louvain",
        }
        export.write_histogram(list(counts.size_histogram), list(counts.size_histogram.values()),
                               out / f"community_sizes_{orientation}.csv")
    dump_json(report, out / "communities.json")
    return report


def _lurker_entry(scores, n: int) -> dict:
    sets = lurking.lurker_sets(scores)
    return {"nodes": n, "iterations": scores.iterations, "converged": scores.converged,
            "residual": float(f"{scores.residual:.3g}"),
            "lurker_pct": {p: _pct(len(s), n) for p, s in sets.items()}}


def cmd_lurkers(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    cfg = _lr_config(args)
    selected = _selection(args, g)
    merged = graph.merged_network(g, selected)
    report = {"instances": selected, "networks": {}}
    for name in selected:
        sub = graph.instance_subnetwork(merged, name, args.include_isolated)
        if sub.n_nodes:
            report["networks"][name] = _lurker_entry(lurking.lurker_rank(sub, cfg), sub.n_nodes)
    scores = lurking.lurker_rank(merged, cfg)
    report["networks"]["merged"] = _lurker_entry(scores, merged.n_nodes)
    export.write_scores(scores, out / "lurker_scores.csv")
    dump_json(report, out / "lurkers.json")
    return report


def cmd_bridges(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    selected = _selection(args, g)
    merged = graph.merged_network(g, selected)
    report = {"instances": selected, "networks": {}}
    for name in selected:
        sub = graph.instance_subnetwork(merged, name, args.include_isolated)
        if sub.n_nodes:
            report["networks"][name] = bridging.bridge_report(sub).summary()
    full = bridging.bridge_report(merged)
    report["networks"]["merged"] = full.summary()
    export.write_ndto(full.scores, out / "ndto.csv")
    dump_json(report, out / "bridges.json")
    return report


def _overlap_entry(ov: roles.Overlap) -> dict:
    return {"pct": ov.percentage, "count": len(ov), "universe": ov.universe}


def cmd_roles(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    cfg = _lr_config(args)
    selected = _selection(args, g)
    merged = graph.merged_network(g, selected)
    pairs = [(p, 100 - p) for p in args.percentile] if args.percentile else roles.PAIRED_PERCENTILES
    do_dual = args.dual or not args.alternate
    do_alt = args.alternate or not args.dual
    local = roles.local_role_scores(merged, selected, cfg, args.include_isolated)
    glob = roles.role_scores(merged, cfg, scope="merged")
    report = {"instances": selected}
    if do_dual:
        dual = {}
        for name, sc in list(local.items()) + [("merged", glob)]:
            if sc.graph.n_nodes == 0:
                continue
            table = roles.dual_role_table(sc, pairs)
            dual[name] = {f"LR@{lp:g} & nDTO@{bp:g}": _overlap_entry(ov)
                          for (lp, bp), ov in table.items()}
        report["dual"] = dual
    if do_alt:
        alt = {}
        for pairing in (roles.LURKER_LOCAL_BRIDGE_GLOBAL, roles.BRIDGE_LOCAL_LURKER_GLOBAL):
            alt[pairing] = {}
            for lp, bp in pairs:
                res = roles.alternate_role_overlap(local, glob, pairing, lp, selected)
                alt[pairing][f"{lp:g}&{bp:g}"] = {k: _overlap_entry(v) for k, v in res.items()}
        report["alternate"] = alt
    dump_json(report, out / "roles.json")
    return report


def cmd_flow(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    selected = _selection(args, g)
    merged = graph.merged_network(g, selected)
    sets = roles.lurker_sets_by_instance(merged, args.scope, _lr_config(args),
                                         include_isolated=args.include_isolated)
    fm = roles.flow_matrix(merged, sets)
    rows = fm.rows()
    export.write_rows(rows, out / "flow.csv")
    (out / "flow.dot").write_text(fm.to_dot(args.dot_percentile), encoding="utf-8")
    report = {"instances": selected, "scope": args.scope, "total_edges": fm.total_edges(),
              "cells": rows}
    dump_json(report, out / "flow.json")
    return report


def cmd_filter(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    filtered = graph.filter_noisy_instances(g, args.min_pointing)
    pointing = graph.project_instance_graph(g).pointing_instances()
    removed = sorted(set(g.instances) - set(filtered.instances))
    ingest.write_edge_list(filtered.edge_records(), out / "filtered.csv")
    report = {"threshold": args.min_pointing,
              "nodes": {"before": g.n_nodes, "after": filtered.n_nodes},
              "edges": {"before": g.n_edges, "after": filtered.n_edges},
              "instances": {"before": len(g.instances), "after": len(filtered.instances)},
              "removed_instances": removed,
              "pointing_instances": pointing}
    dump_json(report, out / "filter.json")
    return report


def cmd_merge(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    out = _outdir(args)
    selected = _selection(args, g)
    merged = graph.merged_network(g, selected, args.include_isolated)
    subs = {name: graph.instance_subnetwork(merged, name) for name in selected}
    shells = int(graph.shell_mask(merged).sum())
    inter = int(merged.inter_instance_mask().sum())
    ingest.write_edge_list(merged.edge_records(), out / "merged.csv")
    report = {
        "instances": selected,
        "merged": {"nodes": merged.n_nodes, "edges": merged.n_edges},
        "per_instance": {k: {"nodes": s.n_nodes, "edges": s.n_edges} for k, s in subs.items()},
        "shell_nodes": shells,
        "inter_instance_edges": inter,
        "shell_distribution": roles.shell_distribution(merged),
        "identities": {
            "nodes": sum(s.n_nodes for s in subs.values()) + shells == merged.n_nodes,
            "edges": sum(s.n_edges for s in subs.values()) + inter == merged.n_edges,
        },
    }
    dump_json(report, out / "merge.json")
    return report


def _generator_config(args) -> synthgen.GeneratorConfig:
    if args.config:
        data = _load_config(args.config)
    else:
        k = len(args.sizes)
        data = {"instance_sizes": args.sizes,
                "mixing": [[0.0 if i == j else args.mixing for j in range(k)] for i in range(k)]}
    for key in ("mean_degree", "reciprocity", "shell_fraction", "lurker_fraction"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    return synthgen.GeneratorConfig.from_dict(data)


def _load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise synthgen.ConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        return synthgen.tomllib.loads(path.read_text(encoding="utf-8"))
    return json.loads(path.read_text(encoding="utf-8"))


def cmd_generate(args, inputs: Inputs) -> dict:
    cfg = _generator_config(args)
    if args.config:
        inputs.digests[str(args.config)] = _file_digest(Path(args.config))
    net = synthgen.generate(cfg)
    if args.out == "-":
        ingest.write_edge_list(net.records(), sys.stdout)
        sys.stdout.flush()
    else:
        ingest.write_edge_list(net.records(), args.out)
    report = {"config": cfg.as_dict(), "nodes": len(net.users), "edges": net.n_edges,
              "planted_shells": int(net.shell_mask.sum()),
              "planted_lurkers": int(net.lurker_mask.sum())}
    if args.planted:
        dump_json({"shells": sorted(net.shells), "lurkers": sorted(net.lurkers)}, args.planted)
    return report


def cmd_crawl(args, inputs: Inputs) -> dict:
    urls = dict(item.split("=", 1) for item in args.instance_url)
    cfg = ingest.CrawlConfig(seed_instances=args.seed_instance, seed_accounts=args.seed_account,
                             rate_limit=args.rate, max_users=args.max_users,
                             token_env=args.token_env, timeout=args.timeout,
                             checkpoint=args.resume, instance_urls=urls)
    records = ingest.crawl(cfg)
    if args.salt_env:
        salt = os.environ.get(args.salt_env)
        if not salt:
            raise ValueError(f"environment variable {args.salt_env} holds no salt")
        records = ingest.anonymize(records, salt)
    ingest.write_edge_list(records, args.out)
    return {"records": len(records), "anonymized": bool(args.salt_env)}


def cmd_export(args, inputs: Inputs) -> dict:
    g = inputs.graph(args.input)
    export.write_graph(g, args.out, args.format)
    return {"nodes": g.n_nodes, "edges": g.n_edges, "format": args.format}


# -- parser ------------------------------------------------------------------

def _add_selection(p):
    p.add_argument("--instances", nargs="+", metavar="NAME",
                   help="instances forming the merged network")
    p.add_argument("--top", type=int, default=5,
                   help="otherwise use the K instances with most users (default 5)")
    p.add_argument("--include-isolated", action="store_true",
                   help="keep users isolated by the instance restriction")


def _add_lurkerrank(p):
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--anderson-depth", type=int, default=5,
                   help="iterates mixed per sweep; 0 = plain sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for compiled kernels (results do not depend on it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def analysis(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("input", help="edge-list CSV (optionally gzipped) or - for stdin")
        p.add_argument("--out", required=True, help="output directory")
        return p

    p = analysis("stats", "structural statistics and degree histograms")
    p.add_argument("--path-length", choices=("exact", "sampled", "approx"), default="approx")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--assortativity", choices=metrics.ASSORTATIVITY_MODES[1:], default="out_in")

    p = analysis("communities", "Louvain communities and modularity")
    p.add_argument("--orientation", choices=("directed", "undirected", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--min-size", type=int, default=10)
    p.add_argument("--partition", help="evaluate this user,instance,community_id CSV instead")

    p = analysis("lurkers", "LurkerRank scores and lurker percentages")
    _add_selection(p)
    _add_lurkerrank(p)

    p = analysis("bridges", "nDTO scores and strong bridges")
    _add_selection(p)

    p = analysis("roles", "dual-role and alternate-role overlaps")
    _add_selection(p)
    _add_lurkerrank(p)
    p.add_argument("--dual", action="store_true")
    p.add_argument("--alternate", action="store_true")
    p.add_argument("--percentile", type=float, nargs="+", choices=(95, 90, 75),
                   help="lurker percentiles (bridge percentile is 100 - P)")

    p = analysis("flow", "edges to/from lurkers between instances")
    _add_selection(p)
    _add_lurkerrank(p)
    p.add_argument("--scope", choices=("instance", "merged"), default="instance")
    p.add_argument("--dot-percentile", type=float, default=95)

    p = analysis("filter", "drop instances pointed to by too few others")
    p.add_argument("--min-pointing", type=int, default=51)

    p = analysis("merge", "merged network, shell nodes and inter-instance edges")
    _add_selection(p)

    p = sub.add_parser("generate", help="seeded synthetic multi-instance network")
    p.add_argument("--config", help="JSON or TOML generator config")
    p.add_argument("--sizes", type=int, nargs="+", default=[200, 100, 50])
    p.add_argument("--mixing", type=float, default=20.0,
                   help="expected cross edges per ordered instance pair (without --config)")
    p.add_argument("--mean-degree", type=float)
    p.add_argument("--reciprocity", type=float)
    p.add_argument("--shell-fraction", type=float)
    p.add_argument("--lurker-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="-", help="edge-list path or - for stdout")
    p.add_argument("--planted", help="also write planted shells/lurkers as JSON here")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("crawl", help="crawl follow relations from Mastodon-compatible APIs")
    p.add_argument("--seed-instance", nargs="*", default=[])
    p.add_argument("--seed-account", nargs="*", default=[], help="user@instance")
    p.add_argument("--rate", type=float, default=1.0, help="requests per second per instance")
    p.add_argument("--max-users", type=int, default=1000)
    p.add_argument("--resume", help="append-only checkpoint file (created if missing)")
    p.add_argument("--token-env", default="MASTODON_TOKEN")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--instance-url", nargs="*", default=[], metavar="INSTANCE=URL",
                   help="override the base URL of an instance")
    p.add_argument("--salt-env", help="anonymize users with the salt in this variable")
    p.add_argument("--out", required=True, help="edge-list output path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("export", help="write the graph as GraphML or DOT")
    p.add_argument("input")
    p.add_argument("--format", choices=("graphml", "dot"), default="graphml")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    return parser


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}
DATA_ERRORS = (graph.GraphError, synthgen.ConfigError, ingest.CrawlError, ValueError, OSError)


def _manifest_path(args) -> Path | None:
    if args.command in ("generate", "crawl", "export"):
        if args.manifest:
            return Path(args.manifest)
        if args.out == "-":
            return None
        return Path(str(args.out) + ".manifest.json")
    return Path(args.out) / "manifest.json"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    set_threads(args.threads)
    inputs = Inputs()
    started = time.perf_counter()
    try:
        COMMANDS[args.command](args, inputs)
    except DATA_ERRORS as exc:
        print(f"fedgraph {args.command}: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "subcommand": args.command,
        "config": {k: v for k, v in vars(args).items() if k not in ("verbose",)},
        "input_digests": inputs.digests,
        "seed": getattr(args, "seed", None),
        "tool_version": tool_version(),
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    path = _manifest_path(args)
    if path is not None:
        dump_json(manifest, path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
