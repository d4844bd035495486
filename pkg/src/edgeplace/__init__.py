"""Ensemble outlier gating and KDE-ranked replica placement for edge datasets."""

from .model import ConfigurationError, DataVector, NodeState, PipelineConfig, Synopsis
from .pbdist import BernoulliProfile, majority_floor, pb_pmf, pb_tail, pb_tail_approx
from .simulator import EdgeNetwork, ExperimentReport, RoutingOutcome, run_experiment

__all__ = [
    "BernoulliProfile",
    "ConfigurationError",
    "DataVector",
    "EdgeNetwork",
    "ExperimentReport",
    "NodeState",
    "PipelineConfig",
    "RoutingOutcome",
    "Synopsis",
    "majority_floor",
    "pb_pmf",
    "pb_tail",
    "pb_tail_approx",
    "run_experiment",
]
