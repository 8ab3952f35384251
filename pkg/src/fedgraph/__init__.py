"""Analysis toolkit for instance-partitioned (federated) follow networks."""
from .bridging import BridgeReport, bridge_report, dto, edge_dto, ndto, ndto_scores
from .community import Partition, louvain, meaningful_communities, modularity
from .graph import (FederatedNode, FollowGraph, GraphError, InstanceGraph, build_graph,
                    filter_noisy_instances, instance_subnetwork, inter_instance_edges,
                    merged_network, project_instance_graph, shell_nodes, top_instances)
from .ingest import CrawlConfig, anonymize, crawl, read_edge_list, write_edge_list
from .lurking import LurkerRankConfig, lurker_rank
from .metrics import (StructuralSummary, average_path_length, clustering_coefficient,
                      connected_components, degree_assortativity, degree_distribution,
                      reciprocity, structural_summary, transitivity)
from .roles import (FlowMatrix, RoleScores, alternate_role_overlap, dual_role_overlap,
                    flow_matrix, shell_distribution)
from .scores import RoleSet, ScoreVector, percentile_role_set
from .synthgen import GeneratorConfig, generate

__version__ = "0.1.0"
