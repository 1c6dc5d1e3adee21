import os
import subprocess
import sys

import numpy as np
import pytest

from labeldiv import _pykernels, kernels

try:
    from labeldiv import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def random_heads(rng, n=7, sizes=(3, 1, 5, 2)):
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    logits = rng.normal(scale=4.0, size=(n, offsets[-1]))
    labels = np.stack([rng.integers(0, s, size=n) for s in sizes], axis=1)
    return logits, offsets, labels


def reference_xent(logits, offsets, labels):
    """Loop-per-head reference, built directly from the softmax definition."""
    loss = 0.0
    probs = np.empty_like(logits)
    for m in range(len(offsets) - 1):
        z = logits[:, offsets[m]:offsets[m + 1]]
        e = np.exp(z - z.max(axis=1, keepdims=True))
        p = e / e.sum(axis=1, keepdims=True)
        probs[:, offsets[m]:offsets[m + 1]] = p
        loss -= np.log(p[np.arange(len(z)), labels[:, m]]).sum()
    grad = probs.copy()
    for m in range(len(offsets) - 1):
        grad[np.arange(len(logits)), offsets[m] + labels[:, m]] -= 1.0
    return loss, probs, grad


IMPLS = [pytest.param(_pykernels, id="python"),
         pytest.param(_ckernels, id="cython", marks=needs_ext)]


@pytest.mark.parametrize("impl", IMPLS)
def test_xent_matches_reference(impl, rng):
    logits, offsets, labels = random_heads(rng)
    loss, probs, grad = kernels.softmax_xent_heads(logits, offsets, labels, impl=impl)
    ref = reference_xent(logits, offsets, labels)
    assert loss == pytest.approx(ref[0], rel=1e-12)
    np.testing.assert_allclose(probs, ref[1], rtol=1e-12)
    np.testing.assert_allclose(grad, ref[2], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_softmax_zero_logits(impl):
    p = kernels.softmax_heads(np.zeros((1, 3)), [0, 3], impl=impl)
    np.testing.assert_allclose(p, [[1 / 3, 1 / 3, 1 / 3]], rtol=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_overflow_safe(impl):
    logits = np.array([[1000.0, 0.0, -1000.0, 800.0, 800.0]])
    loss, p, _ = kernels.softmax_xent_heads(logits, [0, 3, 5], np.array([[2, 0]]), impl=impl)
    assert np.all(np.isfinite(p)) and np.isfinite(loss)
    np.testing.assert_allclose(p, [[1, 0, 0, 0.5, 0.5]])
    assert loss == pytest.approx(2000.0 + np.log(2.0))


@pytest.mark.parametrize("impl", IMPLS)
def test_empty_batch(impl):
    loss, p, g = kernels.softmax_xent_heads(np.zeros((0, 4)), [0, 2, 4],
                                            np.zeros((0, 2), dtype=np.int64), impl=impl)
    assert loss == 0.0 and p.shape == (0, 4) and g.shape == (0, 4)


@pytest.mark.parametrize("impl", IMPLS)
def test_expectations(impl, rng):
    logits, offsets, _ = random_heads(rng)
    p = kernels.softmax_heads(logits, offsets, impl=impl)
    w = rng.normal(size=offsets[-1])
    got = kernels.head_expectations(p, offsets, w, impl=impl)
    want = np.stack([p[:, a:b] @ w[a:b] for a, b in zip(offsets[:-1], offsets[1:])], axis=1)
    np.testing.assert_allclose(got, want, rtol=1e-12)


@needs_ext
def test_backends_agree(rng):
    for _ in range(20):
        sizes = tuple(rng.integers(1, 20, size=rng.integers(1, 40)))
        logits, offsets, labels = random_heads(rng, n=33, sizes=sizes)
        a = kernels.softmax_xent_heads(logits, offsets, labels, impl=_pykernels)
        b = kernels.softmax_xent_heads(logits, offsets, labels, impl=_ckernels)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-13, atol=1e-300)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-12, atol=1e-15)


def test_env_forces_fallback():
    env = dict(os.environ, LABELDIV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import labeldiv; print(labeldiv.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython" or os.environ.get("LABELDIV_PURE_PYTHON")
