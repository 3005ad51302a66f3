"""Data-qubit placement: cost model, layouts, and the annealing search."""

from ._backend import BackendError, available_backends, backend_name, get_backend
from .annealer import AnnealParams, AnnealResult, anneal, place_batch
from .layout import (
    CostBreakdown,
    CostWeights,
    GateSummary,
    Layout,
    PlacementError,
    carve_private_pools,
    data_routing_cost,
    helper_access_cost,
    initial_layout,
    separation_score,
    summarize_gates,
    total_cost,
)

__all__ = [
    "AnnealParams",
    "AnnealResult",
    "BackendError",
    "CostBreakdown",
    "CostWeights",
    "GateSummary",
    "Layout",
    "PlacementError",
    "anneal",
    "available_backends",
    "backend_name",
    "carve_private_pools",
    "data_routing_cost",
    "get_backend",
    "helper_access_cost",
    "initial_layout",
    "place_batch",
    "separation_score",
    "summarize_gates",
    "total_cost",
]
