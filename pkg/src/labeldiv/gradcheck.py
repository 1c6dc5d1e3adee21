"""Central finite-difference check of the analytic gradients.

The numerical side only calls ``forward`` and ``loss``; it never touches
the backward pass it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import DiscretizationEnsemble, Interval, equal_width_base, equal_width_overlapping, randomized_bins
from .encoding import encode_batch
from .net import MultiHeadNetwork, backward, forward, l2_penalty, loss


def total_loss(net, batch, l2):
    return loss(net, forward(net, batch.features), batch) + l2_penalty(net, l2)


def numerical_gradients(net, batch, l2=0.0, eps=1e-5):
    out = []
    for p in net.parameters():
        g = np.empty_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + eps
            up = total_loss(net, batch, l2)
            flat[j] = keep - eps
            down = total_loss(net, batch, l2)
            flat[j] = keep
            gflat[j] = (up - down) / (2.0 * eps)
        out.append(g)
    return out


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``; ``floor`` judges near-zero entries absolutely."""
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


@dataclass
class GradCheckResult:
    index: int
    mode: str
    n_params: int
    head_sizes: tuple
    max_rel_error: float


def random_case(rng, mode=None):
    modes = ("label-diversity", "rvc", "direct")
    mode = mode or modes[rng.integers(len(modes))]
    n_in = int(rng.integers(2, 6))
    trunk = [int(w) for w in rng.integers(2, 7, size=rng.integers(0, 3))]
    lo = float(rng.uniform(-10, 10))
    support = Interval(lo, lo + float(rng.uniform(1, 20)))
    K = int(rng.integers(4, 12))
    base = equal_width_base(support, K)
    if mode == "label-diversity":
        M = int(rng.integers(1, 5))
        if rng.random() < 0.5:
            ens = randomized_bins(base, int(rng.integers(1, K)), M, int(rng.integers(1 << 31)))
        else:
            ens = equal_width_overlapping(base, int(rng.integers(1, K // M + 1)), M)
    else:
        ens = DiscretizationEnsemble([base], base)
    net = MultiHeadNetwork.build(n_in, trunk, ens, mode=mode, seed=int(rng.integers(1 << 31)))
    for p in net.parameters():
        p += rng.normal(0.0, 0.1, size=p.shape)  # nonzero biases too
    n = int(rng.integers(1, 6))
    for _ in range(100):
        X = rng.normal(size=(n, n_in))
        fs = forward(net, X)
        # keep every ReLU pre-activation clear of the kink
        if all(np.min(np.abs(z)) > 1e-3 for z in fs.pre[:-1]):
            break
    t = rng.uniform(support.lo, support.hi, size=n)
    l2 = float(rng.choice([0.0, 0.01]))
    return net, encode_batch(X, t, ens), l2


def check_gradients(n_configs=10, seed=0, eps=1e-5) -> list[GradCheckResult]:
    rng = np.random.default_rng(seed)
    modes = ("label-diversity", "rvc", "direct")
    results = []
    for i in range(n_configs):
        mode = modes[i % 3] if i < 3 else None
        net, batch, l2 = random_case(rng, mode)
        analytic = [g for pair in backward(net, forward(net, batch.features), batch, l2) for g in pair]
        numeric = numerical_gradients(net, batch, l2, eps)
        err = max(float(np.max(relative_error(a, n))) for a, n in zip(analytic, numeric))
        results.append(GradCheckResult(i, net.mode, sum(p.size for p in net.parameters()),
                                       net.ensemble.head_sizes, err))
    return results
