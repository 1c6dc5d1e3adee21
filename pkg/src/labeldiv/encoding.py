"""Per-head class labels and base-class overlap matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .binning import DiscretizationEnsemble
from .errors import OutOfRangeError

__all__ = ["Sample", "EncodedBatch", "encode_batch", "encode_samples", "overlap_matrices",
           "stacked_overlap"]


class Sample(NamedTuple):
    features: np.ndarray
    target: float


@dataclass(frozen=True)
class EncodedBatch:
    """Features plus one bin index per (sample, head).

    ``labels[n, m]`` is the active class of sample ``n`` in head ``m``; the
    one-hot vectors are only materialized inside the loss kernel.
    """

    features: np.ndarray
    labels: np.ndarray
    targets: np.ndarray
    ensemble: DiscretizationEnsemble

    def __len__(self) -> int:
        return self.labels.shape[0]

    def one_hot(self, m: int) -> np.ndarray:
        q = np.zeros((len(self), self.ensemble.head_sizes[m]))
        q[np.arange(len(self)), self.labels[:, m]] = 1.0
        return q


def encode_batch(features, targets, ens: DiscretizationEnsemble) -> EncodedBatch:
    X = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64).ravel()
    if X.ndim == 1:
        X = X.reshape(t.size, -1) if t.size else X.reshape(0, 0)
    if X.shape[0] != t.size:
        raise ValueError(f"{X.shape[0]} feature rows but {t.size} targets")
    lo, hi = ens.support.lo, ens.support.hi
    bad = np.flatnonzero(~((t >= lo) & (t <= hi)))
    if bad.size:
        n = int(bad[0])
        raise OutOfRangeError(f"sample {n}: target {t[n]!r} outside support {ens.support}")
    labels = np.empty((t.size, ens.M), dtype=np.int64)
    for m, d in enumerate(ens.members):
        labels[:, m] = d.locate(t)
    return EncodedBatch(X, labels, t, ens)


def encode_samples(samples: Sequence[Sample], ens: DiscretizationEnsemble) -> EncodedBatch:
    if not samples:
        return encode_batch(np.zeros((0, 0)), np.zeros(0), ens)
    X = np.stack([np.asarray(s.features, dtype=np.float64).ravel() for s in samples])
    return encode_batch(X, [s.target for s in samples], ens)


def overlap_matrices(ens: DiscretizationEnsemble) -> list[np.ndarray]:
    """``O[m][l, k] = |d_l^m & c_k| / |d_l^m|`` for every head."""
    c = ens.base.edges
    out = []
    for d in ens.members:
        e = d.edges
        lo = np.maximum(e[:-1, None], c[None, :-1])
        hi = np.minimum(e[1:, None], c[None, 1:])
        out.append(np.clip(hi - lo, 0.0, None) / np.diff(e)[:, None])
    return out


def stacked_overlap(ens: DiscretizationEnsemble) -> np.ndarray:
    """All heads' overlap rows stacked into one ``(sum L_m, K)`` matrix."""
    return np.vstack(overlap_matrices(ens))
