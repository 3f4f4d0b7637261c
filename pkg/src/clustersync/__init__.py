"""Cluster synchronization analysis for networks of coupled oscillators."""

__version__ = "0.1.0"

from .classify import CSReport, CSType, analyze, build_report, classify_pair, eta_b, eta_b_scan, eta_u, network_interval, rho
from .dynamics import (
    MLEResult,
    Numerics,
    OscillatorModel,
    SigmaInterval,
    block_mle,
    integrate,
    quotient_trajectory,
    sigma_interval,
    simulate_network,
    sweep,
    transverse_mle,
    van_der_pol,
)
from .examples import generate_example
from .netio import Network, laplacian, load_edge_list, shifted_adjacency, write_edge_list
from .partition import (
    Partition,
    indicator_matrix,
    is_equitable,
    minimum_balanced_coloring,
    quotient_matrix,
)
from .spectral import (
    SpectralDecomposition,
    complete_sync_indices,
    decompose,
    detect_intertwined,
    eig_sym,
    suggest_kappa,
)
