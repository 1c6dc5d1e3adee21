"""Numpy implementations of the per-head kernels.

Heads are stored side by side in one ``(N, sum L_m)`` array; head ``m``
occupies columns ``offsets[m]:offsets[m + 1]``.
"""

import numpy as np


def _segments(logits, offsets):
    starts = offsets[:-1]
    sizes = np.diff(offsets)
    mx = np.maximum.reduceat(logits, starts, axis=1)
    z = logits - np.repeat(mx, sizes, axis=1)
    ez = np.exp(z)
    s = np.add.reduceat(ez, starts, axis=1)
    return z, ez, s, sizes


def softmax_heads(logits, offsets):
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    if logits.shape[0] == 0:
        return np.zeros_like(logits)
    _, ez, s, sizes = _segments(logits, offsets)
    return ez / np.repeat(s, sizes, axis=1)


def softmax_xent_heads(logits, offsets, labels):
    """Summed cross-entropy over samples and heads.

    Returns ``(loss, probs, dlogits)`` with ``dlogits = probs - one_hot``.
    """
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits), np.zeros_like(logits)
    z, ez, s, sizes = _segments(logits, offsets)
    probs = ez / np.repeat(s, sizes, axis=1)
    cols = offsets[:-1][None, :] + labels
    rows = np.arange(n)[:, None]
    loss = float(-np.sum(z[rows, cols] - np.log(s)))
    grad = probs.copy()
    grad[rows, cols] -= 1.0
    return loss, probs, grad


def head_expectations(probs, offsets, values):
    """``out[n, m] = sum_l values[l] * probs[n, l]`` over head ``m``'s columns."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    if probs.shape[0] == 0:
        return np.zeros((0, len(offsets) - 1))
    return np.add.reduceat(probs * values[None, :], offsets[:-1], axis=1)
