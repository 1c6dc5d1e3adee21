"""Ordinal regression with label diversity.

A target is discretized several different ways at once, a network with one
softmax head per discretization is trained on the summed cross-entropy, and
the heads' expected values are averaged (or their posteriors marginalized
onto the base classes) at inference time.
"""

from .binning import (
    Discretization,
    DiscretizationEnsemble,
    Interval,
    equal_width_base,
    equal_width_overlapping,
    explicit_ensemble,
    randomized_bins,
)
from .kernels import BACKEND
from .net import MultiHeadNetwork, TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Discretization",
    "DiscretizationEnsemble",
    "Interval",
    "MultiHeadNetwork",
    "TrainConfig",
    "equal_width_base",
    "equal_width_overlapping",
    "explicit_ensemble",
    "predict",
    "randomized_bins",
    "train",
]
