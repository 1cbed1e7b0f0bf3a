"""Constant-curvature (kappa-stereographic) geometry, differentiable in the curvature.

Submodules
----------
kappa          curvature-dependent scalar kernels with Taylor branches at k = 0
autodiff       array-valued reverse-mode differentiation and gradient checking
stereographic  gyrovector operations, distances and product manifolds
optim          Riemannian SGD with learnable curvature
graph          edge lists and all-pairs shortest paths
embedding      D_avg graph embedding training
selfcheck      numerical verification suites
cli            command-line entry point
"""

from .errors import (DisconnectedError, DomainError, EmptyGraphError, GeometryError,
                     GraphError, ParseError, PoleError, SingularityError)
from .kappa import arcsin_k, arctan_k, eval_with_partials, sin_k, tan_k
from .stereographic import (Curvature, Factor, Hyperplane, ProductManifold, conformal_factor,
                            distance, exp_map, exp_map_origin, gromov_product, gyration,
                            hyperplane_distance, mobius_add, parallel_transport,
                            product_distance, project_to_domain)
from .optim import OptimConfig, RiemannianSGD, StepRejected, Strategy
from .graph import Graph, all_pairs_shortest_paths, largest_connected_component, parse_edge_list
from .embedding import TrainConfig, TrainResult, evaluate, init_embeddings, train

__version__ = "0.1.0"

__all__ = [
    "DisconnectedError", "DomainError", "EmptyGraphError", "GeometryError", "GraphError",
    "ParseError", "PoleError", "SingularityError",
    "arcsin_k", "arctan_k", "eval_with_partials", "sin_k", "tan_k",
    "Curvature", "Factor", "Hyperplane", "ProductManifold", "conformal_factor", "distance",
    "exp_map", "exp_map_origin", "gromov_product", "gyration", "hyperplane_distance",
    "mobius_add", "parallel_transport", "product_distance", "project_to_domain",
    "OptimConfig", "RiemannianSGD", "StepRejected", "Strategy",
    "Graph", "all_pairs_shortest_paths", "largest_connected_component", "parse_edge_list",
    "TrainConfig", "TrainResult", "evaluate", "init_embeddings", "train",
]
