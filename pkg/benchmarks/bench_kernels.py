"""Time the compiled head kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 256] [--heads 32] [--bins 16]
"""

import argparse
import timeit

import numpy as np

from labeldiv import _pykernels, kernels

try:
    from labeldiv import _ckernels
except ImportError:
    _ckernels = None


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--heads", type=int, default=32)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    sizes = rng.integers(max(1, args.bins // 2), args.bins * 3 // 2 + 1, size=args.heads)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    logits = rng.normal(0, 3, size=(args.batch, offsets[-1]))
    labels = np.stack([rng.integers(0, s, size=args.batch) for s in sizes], axis=1).astype(np.int64)
    values = rng.normal(size=offsets[-1])
    probs = kernels.softmax_heads(logits, offsets)

    impls = {"python": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
    cases = {
        "softmax_heads": lambda k: k.softmax_heads(logits, offsets),
        "softmax_xent_heads": lambda k: k.softmax_xent_heads(logits, offsets, labels),
        "head_expectations": lambda k: k.head_expectations(probs, offsets, values),
    }
    print(f"batch={args.batch} heads={args.heads} columns={offsets[-1]}  selected backend: {kernels.BACKEND}")
    print(f"{'kernel':20s}" + "".join(f"{name:>14s}" for name in impls) + ("     speedup" if len(impls) > 1 else ""))
    for case, fn in cases.items():
        times = {}
        for name, impl in impls.items():
            timer = timeit.Timer(lambda: fn(impl))
            n, _ = timer.autorange()
            times[name] = min(timer.repeat(args.repeat, n)) / n
        line = f"{case:20s}" + "".join(f"{t * 1e6:12.1f}us" for t in times.values())
        if "cython" in times:
            line += f"{times['python'] / times['cython']:11.1f}x"
        print(line)
    if _ckernels is None:
        print("compiled kernels not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
