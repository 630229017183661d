"""Variable-input-size CNN pooling toolkit with a synthetic
double-compression + resampling benchmark."""

from .networks import NetworkSpec, build_network, category_for, patch_size_for
from .pooling import (
    IterPoolParams,
    adaptive_max_pool,
    discarded_point_count,
    iterative_pool_backward,
    iterative_pool_forward,
    num_iterations,
)

__all__ = [
    "NetworkSpec",
    "build_network",
    "category_for",
    "patch_size_for",
    "IterPoolParams",
    "adaptive_max_pool",
    "discarded_point_count",
    "iterative_pool_backward",
    "iterative_pool_forward",
    "num_iterations",
]

__version__ = "0.1.0"
