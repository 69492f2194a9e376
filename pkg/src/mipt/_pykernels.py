"""Pure numpy versions of the amplitude kernels in ``_ckernels.pyx``.

Same signatures and in-place semantics; used when the extension is not built.
"""
import numpy as np


def _split(psi, q):
    nb, dim = psi.shape
    return psi.reshape(nb, dim >> (q + 1), 2, 1 << q)


def apply_1q(psi, u, q):
    view = _split(psi, q)
    view[...] = np.einsum("ij,bajc->baic", u, view)


def apply_2q(psi, u, q0, q1):
    nb, dim = psi.shape
    lo, hi = min(q0, q1), max(q0, q1)
    view = psi.reshape(nb, dim >> (hi + 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    ut = u.reshape(2, 2, 2, 2)
    if q0 == hi:
        view[...] = np.einsum("pqrs,barcsd->bapcqd", ut, view)
    else:
        view[...] = np.einsum("pqrs,bascrd->baqcpd", ut, view)


def prob_one(psi, q):
    view = _split(psi, q)[:, :, 1, :]
    return np.einsum("bac,bac->b", view, view.conj()).real.copy()


def take_branch(psi, q, bits):
    view = _split(psi, q)
    rows = np.arange(psi.shape[0])
    out = view[rows, :, np.asarray(bits, dtype=np.intp), :]
    return np.ascontiguousarray(out.reshape(psi.shape[0], psi.shape[1] >> 1))
