"""Time the compiled amplitude kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--qubits 12 16 20] [--batch 1] [--repeat 5]

Both implementations are imported directly, so the result does not depend on
MIPT_PURE_PYTHON. Outputs are checked for agreement before anything is timed.
"""
import argparse
import timeit

import numpy as np

from mipt import _pykernels as py
from mipt.gates import haar_unitary, iswap_like

try:
    from mipt import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def cases(n: int, rng: np.random.Generator):
    u1 = haar_unitary(2, rng)
    u2 = iswap_like().matrix
    mid, far = n // 2, n - 1
    bits = rng.integers(0, 2, size=1).astype(np.int8)
    return {
        "apply_1q": lambda k, psi: k.apply_1q(psi, u1, mid),
        "apply_2q near": lambda k, psi: k.apply_2q(psi, u2, mid, mid + 1),
        "apply_2q far": lambda k, psi: k.apply_2q(psi, u2, far, 0),
        "prob_one": lambda k, psi: k.prob_one(psi, mid),
        "take_branch": lambda k, psi: k.take_branch(psi, mid, np.resize(bits, psi.shape[0])),
    }


def random_batch(n: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=(batch, 1 << n)) + 1j * rng.normal(size=(batch, 1 << n))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def check_agreement(n: int, batch: int, rng: np.random.Generator) -> None:
    for name, fn in cases(n, rng).items():
        a = random_batch(n, batch, rng)
        b = a.copy()
        ra, rb = fn(py, a), fn(cy, b)
        np.testing.assert_allclose(a, b, atol=1e-12, err_msg=name)
        if ra is not None:
            np.testing.assert_allclose(ra, rb, atol=1e-12, err_msg=name)


def best_time(fn, kernels, psi: np.ndarray, repeat: int) -> float:
    work = psi.copy()
    return min(timeit.repeat(lambda: fn(kernels, work), number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[12, 16, 20])
    ap.add_argument("--batch", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    if cy is None:
        print("compiled extension not built; only the numpy fallback is timed")
    print(f"{'kernel':<14} {'n':>3} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in args.qubits:
        if cy is not None:
            check_agreement(min(n, 10), 3, rng)
        psi = random_batch(n, args.batch, rng)
        for name, fn in cases(n, rng).items():
            t_py = best_time(fn, py, psi, args.repeat)
            if cy is None:
                print(f"{name:<14} {n:>3} {1e3 * t_py:>10.3f} {'-':>10} {'-':>8}")
                continue
            t_cy = best_time(fn, cy, psi, args.repeat)
            print(f"{name:<14} {n:>3} {1e3 * t_py:>10.3f} {1e3 * t_cy:>10.3f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
