"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise,
or when ``LABELDIV_PURE_PYTHON=1`` is set, the numpy fallback is used.
Both expose the same three functions with identical contracts.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("LABELDIV_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def _idx(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def softmax_heads(logits, offsets, impl=None):
    return (impl or _impl).softmax_heads(logits, _idx(offsets))


def softmax_xent_heads(logits, offsets, labels, impl=None):
    return (impl or _impl).softmax_xent_heads(logits, _idx(offsets), _idx(labels))


def head_expectations(probs, offsets, values, impl=None):
    values = np.ascontiguousarray(values, dtype=np.float64)
    return (impl or _impl).head_expectations(probs, _idx(offsets), values)
