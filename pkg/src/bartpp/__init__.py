"""Intensity estimation for inhomogeneous Poisson processes with multiplicative tree ensembles."""

from .geometry import Domain, RegionBox, WeightedPartition, normalize_points, denormalize_points
from .tree import DecisionTree, EnsembleState, SplitGrid
from .sampler import SamplerConfig, run_chain, run_parallel_chains

__version__ = "0.1.0"
