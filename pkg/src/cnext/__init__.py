"""Compressed Newton-type fully distributed optimization over consensus networks."""

__version__ = "0.1.0"

from .compress import CompressionScheme, CompressState, compress_round, compress_vector, make_scheme
from .graph import Network, Topology, build_circulant_expander, build_ring, metropolis_hastings_weights
from .objective import LocalData, Objective, logistic_objective, ridge_objective
from .solver import (ErrorVector, HyperParams, SolverState,
                     MODE_CNEXT, MODE_FIRST_ORDER_GT, MODE_UNCOMPRESSED_GIANT,
                     init_state, measure_errors, run, step)
from .theory import ContractionMatrix, Theta, TheoryConstants, build_A, check_sufficient_conditions, spectral_radius

__all__ = [
    "CompressionScheme", "CompressState", "compress_round", "compress_vector", "make_scheme",
    "Network", "Topology", "build_circulant_expander", "build_ring", "metropolis_hastings_weights",
    "LocalData", "Objective", "logistic_objective", "ridge_objective",
    "ErrorVector", "HyperParams", "SolverState",
    "MODE_CNEXT", "MODE_FIRST_ORDER_GT", "MODE_UNCOMPRESSED_GIANT",
    "init_state", "measure_errors", "run", "step",
    "ContractionMatrix", "Theta", "TheoryConstants", "build_A", "check_sufficient_conditions", "spectral_radius",
]
