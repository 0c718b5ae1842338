"""Simplex-constrained linear networks and their non-atomic congestion games."""

from ._validation import InvariantViolation
from .dnn import (
    Dataset,
    LayeredDnn,
    PowerLoss,
    aggregates,
    enumerate_paths,
    forward,
    loss_gradient_b,
    network_loss,
    validate_dnn,
    weight_product,
)
from .estimator import SimplexLinearNetwork
from .game import (
    CongestionGame,
    MarginalFlow,
    class_costs,
    find_equilibrium,
    price_of_anarchy,
    social_cost,
    social_optimum,
    wardrop_check_definition,
    wardrop_check_vi,
)
from .optim import TrainConfig, grid_oracle, train, verify_minima_are_equilibria
from .reduction import build_game, certify, factorize, flow_to_weights, weights_to_flow

__version__ = "0.1.0"

__all__ = [
    "CongestionGame",
    "Dataset",
    "InvariantViolation",
    "LayeredDnn",
    "MarginalFlow",
    "PowerLoss",
    "SimplexLinearNetwork",
    "TrainConfig",
    "aggregates",
    "build_game",
    "certify",
    "class_costs",
    "enumerate_paths",
    "factorize",
    "find_equilibrium",
    "flow_to_weights",
    "forward",
    "grid_oracle",
    "loss_gradient_b",
    "network_loss",
    "price_of_anarchy",
    "social_cost",
    "social_optimum",
    "train",
    "validate_dnn",
    "verify_minima_are_equilibria",
    "wardrop_check_definition",
    "wardrop_check_vi",
    "weight_product",
]
