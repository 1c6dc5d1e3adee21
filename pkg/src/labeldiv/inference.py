"""Point estimates from per-head posteriors.

Two routes: the expected value of every head averaged across heads (for
metric targets), and the argmax of the head posteriors marginalized back
onto the base classes (for ordinal targets).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, NormalizationWarning

__all__ = [
    "PredictionSet",
    "DecompositionReport",
    "expected_values",
    "ensemble_average",
    "predict_set",
    "ambiguity_decomposition",
    "marginal_posterior",
    "map_estimate",
]


def _probs_offsets(fs):
    probs = getattr(fs, "probs", None)
    if probs is None:
        raise ConfigError("forward state carries no head posteriors (direct mode?)")
    return probs, np.asarray(fs.offsets, dtype=np.int64)


def expected_values(fs, values: Sequence[np.ndarray]) -> np.ndarray:
    """``(M, N)`` matrix of per-head expectations ``sum_l w_l^m p(d_l^m | x_n)``.

    ``values[m]`` holds head ``m``'s bin representatives (see
    ``DiscretizationEnsemble.bin_means``).
    """
    probs, offsets = _probs_offsets(fs)
    sizes = np.diff(offsets)
    if len(values) != sizes.size or any(len(v) != s for v, s in zip(values, sizes)):
        raise ConfigError(
            f"bin values {[len(v) for v in values]} do not match head widths {sizes.tolist()}"
        )
    w = np.concatenate([np.asarray(v, dtype=np.float64) for v in values])
    return kernels.head_expectations(probs, offsets, w).T


def ensemble_average(per_head: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    per_head = np.atleast_2d(np.asarray(per_head, dtype=np.float64))
    if per_head.shape[0] == 0:
        raise ConfigError("cannot average an empty set of heads")
    if weights is None:
        return per_head.mean(axis=0)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (per_head.shape[0],) or np.any(w < 0) or w.sum() <= 0:
        raise ConfigError("weights must be nonnegative, one per head, with positive sum")
    return (w / w.sum()) @ per_head


@dataclass(frozen=True)
class PredictionSet:
    per_head: np.ndarray  # (M, N)
    ensemble: np.ndarray  # (N,)


def predict_set(fs, values: Sequence[np.ndarray]) -> PredictionSet:
    per_head = expected_values(fs, values)
    return PredictionSet(per_head, ensemble_average(per_head))


@dataclass(frozen=True)
class DecompositionReport:
    """Per-sample terms of ``ensemble_sq_err = mean_individual_sq_err - ambiguity``."""

    ensemble_sq_err: np.ndarray
    mean_individual_sq_err: np.ndarray
    ambiguity: np.ndarray

    def residual(self) -> np.ndarray:
        """Relative residual of the identity, scaled by the individual error."""
        lhs = self.ensemble_sq_err
        rhs = self.mean_individual_sq_err - self.ambiguity
        scale = np.maximum(np.maximum(np.abs(lhs), self.mean_individual_sq_err), np.finfo(float).tiny)
        return np.abs(lhs - rhs) / scale


def ambiguity_decomposition(per_head: np.ndarray, targets: np.ndarray) -> DecompositionReport:
    """Each term is evaluated directly from its own definition."""
    Y = np.atleast_2d(np.asarray(per_head, dtype=np.float64))
    t = np.asarray(targets, dtype=np.float64).ravel()
    if Y.shape[1] != t.size:
        raise ConfigError(f"{Y.shape[1]} predictions per head but {t.size} targets")
    ybar = Y.mean(axis=0)
    return DecompositionReport(
        ensemble_sq_err=(ybar - t) ** 2,
        mean_individual_sq_err=np.mean((Y - t) ** 2, axis=0),
        ambiguity=np.mean((Y - ybar) ** 2, axis=0),
    )


def marginal_posterior(fs, overlaps: Sequence[np.ndarray], atol: float = 1e-6) -> np.ndarray:
    """``(N, K)`` base-class posterior averaged over heads.

    Rows that fail to sum to one within ``atol`` raise a
    :class:`NormalizationWarning`; they are not renormalized.
    """
    probs, offsets = _probs_offsets(fs)
    sizes = np.diff(offsets)
    if len(overlaps) != sizes.size or any(o.shape[0] != s for o, s in zip(overlaps, sizes)):
        raise ConfigError(
            f"overlap rows {[o.shape[0] for o in overlaps]} do not match head widths {sizes.tolist()}"
        )
    stacked = np.vstack(overlaps)
    mp = (probs @ stacked) / sizes.size
    if mp.size:
        dev = np.max(np.abs(mp.sum(axis=1) - 1.0))
        if dev > atol:
            warnings.warn(f"marginal posterior rows deviate from 1 by up to {dev:.3g}",
                          NormalizationWarning, stacklevel=2)
    return mp


def map_estimate(mp: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class index."""
    return np.argmax(np.atleast_2d(mp), axis=1)
