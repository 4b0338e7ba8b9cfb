#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Times each hot kernel on training-shaped batches plus a full
forward/backward of the sharpened objective, then prints a table with
the speedup. Run after building the extension:

    python benchmarks/bench_backends.py [--batch 256] [--classes 10] [--repeat 200]
"""

import argparse
import contextlib
import time

import numpy as np

from srlab import _kernels
from srlab._kernels import numpy_backend

try:
    from srlab._kernels import _core as compiled
except ImportError:
    compiled = None

KERNEL_NAMES = ("relu_fwd", "relu_bwd", "softmax_tau_fwd", "softmax_tau_bwd",
                "l2norm_rows_fwd", "l2norm_rows_bwd", "log_fwd", "log_bwd",
                "pow_fwd", "pow_bwd")


@contextlib.contextmanager
def active_backend(backend):
    """Point the package-level kernel functions at one backend."""
    saved = {name: getattr(_kernels, name) for name in KERNEL_NAMES}
    for name in KERNEL_NAMES:
        setattr(_kernels, name, getattr(backend, name))
    try:
        yield
    finally:
        for name, fn in saved.items():
            setattr(_kernels, name, fn)


def _time(fn, repeat):
    best = float("inf")
    for _ in range(5):
        start = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - start) / repeat)
    return best


def kernel_cases(backend, batch, classes, hidden):
    rng = np.random.default_rng(0)
    z = np.ascontiguousarray(rng.standard_normal((batch, classes)))
    h = np.ascontiguousarray(rng.standard_normal((batch, hidden)))
    p = backend.softmax_tau_fwd(z, 0.5)
    dp = np.ascontiguousarray(rng.standard_normal((batch, classes)))
    dh = np.ascontiguousarray(rng.standard_normal((batch, hidden)))
    u = np.ascontiguousarray(rng.random((batch, classes)))
    y, norms = backend.l2norm_rows_fwd(z, 1e-12)
    return [
        ("softmax_tau_fwd", lambda: backend.softmax_tau_fwd(z, 0.5)),
        ("softmax_tau_bwd", lambda: backend.softmax_tau_bwd(p, dp, 0.5)),
        ("l2norm_rows_fwd", lambda: backend.l2norm_rows_fwd(z, 1e-12)),
        ("l2norm_rows_bwd", lambda: backend.l2norm_rows_bwd(y, norms, dp, 1e-12)),
        ("relu_fwd (hidden)", lambda: backend.relu_fwd(h)),
        ("relu_bwd (hidden)", lambda: backend.relu_bwd(h, dh)),
        ("log_fwd", lambda: backend.log_fwd(u, 1e-7)),
        ("pow_fwd p=0.1", lambda: backend.pow_fwd(u, 0.1, 1e-7)),
        ("pow_bwd p=0.1", lambda: backend.pow_bwd(u, dp, 0.1, 1e-7)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    if compiled is None:
        print("compiled backend not built; run pip install -e . first")
        return 1

    print(f"batch={args.batch} classes={args.classes} hidden={args.hidden} "
          f"repeat={args.repeat}")
    print(f"{'kernel':22s} {'numpy':>11s} {'cython':>11s} {'speedup':>8s}")
    np_cases = kernel_cases(numpy_backend, args.batch, args.classes, args.hidden)
    cy_cases = kernel_cases(compiled, args.batch, args.classes, args.hidden)
    for (name, np_fn), (_, cy_fn) in zip(np_cases, cy_cases):
        t_np = _time(np_fn, args.repeat)
        t_cy = _time(cy_fn, args.repeat)
        print(f"{name:22s} {t_np * 1e6:9.1f}us {t_cy * 1e6:9.1f}us "
              f"{t_np / t_cy:7.2f}x")

    # end to end: sharpened-objective forward + backward through the graph
    from srlab.losses import LossSpec, SRConfig, sr_objective_with_logit_grad

    rng = np.random.default_rng(1)
    logits = rng.standard_normal((args.batch, args.classes))
    labels = rng.integers(0, args.classes, args.batch)
    spec, sr = LossSpec("ce"), SRConfig.mnist()
    repeat = max(args.repeat // 10, 10)
    times = {}
    for backend in (numpy_backend, compiled):
        with active_backend(backend):
            times[backend.NAME] = _time(
                lambda: sr_objective_with_logit_grad(spec, sr, logits, labels, 3),
                repeat)
    print(f"{'objective fwd+bwd':22s} {times['numpy'] * 1e6:9.1f}us "
          f"{times['cython'] * 1e6:9.1f}us "
          f"{times['numpy'] / times['cython']:7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
