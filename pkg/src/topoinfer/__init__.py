"""Topology inference from pairwise tunnel interference.

Overlay hosts see only whether pairs of their tunnels share a link. This
package builds those interference matrices (exactly or from simulated
delays), bounds the size of any network producing one, formulates the
minimum-link integer program, and recovers trees, rings and general
networks with polynomial-time algorithms.
"""

from .bounds import (
    CliqueCover,
    check_unique_intersection_condition,
    contract_links,
    feasible_graph,
    lower_bound,
    min_edge_clique_cover,
    upper_bound,
    verify_solution,
)
from .errors import TopologyError
from .evaluation import ExperimentConfig, edit_distance, generate_random_network, run_experiment
from .graph import NetworkGraph, RecoveredGraph, TunnelSet, build_network, enumerate_tunnels, reduce_to_minimal
from .ilp import build_ilp_model, export_lp, parse_lp, solve_exact_small
from .interference import (
    InterferenceMatrix,
    TrafficConfig,
    build_interference_graph,
    compute_interference_matrix,
    infer_interference_matrix,
    interference_matrix,
    regress_alpha,
    simulate_traffic,
)
from .recovery import all_neighbors, are_siblings, identify_general, identify_ring, identify_rings, identify_tree

__version__ = "0.1.0"
