"""Compound estimation of high-dimensional normal means and variances.

The centerpiece is a truncated Dirichlet-process mixture of
normal-inverse-gamma priors fitted by blocked Gibbs sampling with
Metropolis-Hastings steps, plus classical shrinkage baselines, simulation
studies, and real-data benchmark pipelines.
"""

from .data import DataMatrix, Summaries, back_transform, standardize, summarize
from .dpmm import (DensityGridSpec, Hyperparams, PosteriorSummary,
                   SamplerConfig, elicit_hyperparams, fit)
from .rng import RngStream, substream_id

__all__ = [
    "DataMatrix",
    "Summaries",
    "summarize",
    "standardize",
    "back_transform",
    "Hyperparams",
    "SamplerConfig",
    "DensityGridSpec",
    "PosteriorSummary",
    "elicit_hyperparams",
    "fit",
    "RngStream",
    "substream_id",
]

__version__ = "0.1.0"
