"""Amplitude kernels, compiled when available.

The Cython extension ``mipt._ckernels`` is used if it was built; otherwise the
numpy implementation in ``mipt._pykernels`` is used. Set ``MIPT_PURE_PYTHON=1``
to force the fallback.
"""
import os

import numpy as np

if os.environ.get("MIPT_PURE_PYTHON"):
    from mipt import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from mipt import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from mipt import _pykernels as _impl

        BACKEND = "python"

apply_1q = _impl.apply_1q
apply_2q = _impl.apply_2q
prob_one = _impl.prob_one


def take_branch(psi, q, bits):
    """Per row, keep the ``bits[row]`` branch of qubit ``q`` (the qubit is dropped)."""
    return _impl.take_branch(psi, q, np.ascontiguousarray(bits, dtype=np.int8))


__all__ = ["BACKEND", "apply_1q", "apply_2q", "prob_one", "take_branch"]
