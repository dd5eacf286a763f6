"""Identifiability collapse of Poisson(beta) random hypergraphs: exact simulation and limit theory."""

from .beta import BetaSeries, ThresholdReport, analyze, example21, example22, tangent_series, truncate
from .chain import ChainState, lambda2
from .collapse import CollapseTrace, collapse, identifiable_oracle, remove_vertex
from .fluid import drift, limits, path, sample_z
from .hypergraph import Hypergraph, sample_poisson, uniform_subset

__version__ = "0.1.0"

__all__ = [
    "BetaSeries",
    "ChainState",
    "CollapseTrace",
    "Hypergraph",
    "ThresholdReport",
    "analyze",
    "collapse",
    "drift",
    "example21",
    "example22",
    "identifiable_oracle",
    "lambda2",
    "limits",
    "path",
    "remove_vertex",
    "sample_poisson",
    "sample_z",
    "tangent_series",
    "truncate",
    "uniform_subset",
]
