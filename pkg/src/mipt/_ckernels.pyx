# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled amplitude kernels.

All kernels act on a batch of state vectors stored row-wise in a C-contiguous
``complex128`` array of shape ``(batch, 2**n)``. Qubit ``k`` is bit ``k`` of the
amplitude index. Gate matrices use the first target as the most significant
bit of the local index.
"""
import numpy as np
cimport numpy as cnp

ctypedef double complex cplx


cdef inline Py_ssize_t _insert_zero(Py_ssize_t i, int q) nogil:
    cdef Py_ssize_t low = i & ((<Py_ssize_t>1 << q) - 1)
    return ((i >> q) << (q + 1)) | low


def apply_1q(cplx[:, ::1] psi, cplx[:, ::1] u, int q):
    cdef Py_ssize_t nb = psi.shape[0]
    cdef Py_ssize_t half = psi.shape[1] >> 1
    cdef Py_ssize_t step = <Py_ssize_t>1 << q
    cdef Py_ssize_t b, i, i0, i1
    cdef cplx a0, a1
    cdef cplx u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    with nogil:
        for b in range(nb):
            for i in range(half):
                i0 = _insert_zero(i, q)
                i1 = i0 | step
                a0 = psi[b, i0]
                a1 = psi[b, i1]
                psi[b, i0] = u00 * a0 + u01 * a1
                psi[b, i1] = u10 * a0 + u11 * a1


def apply_2q(cplx[:, ::1] psi, cplx[:, ::1] u, int q0, int q1):
    cdef Py_ssize_t nb = psi.shape[0]
    cdef Py_ssize_t quarter = psi.shape[1] >> 2
    cdef Py_ssize_t m0 = <Py_ssize_t>1 << q0
    cdef Py_ssize_t m1 = <Py_ssize_t>1 << q1
    cdef int lo = q0 if q0 < q1 else q1
    cdef int hi = q1 if q0 < q1 else q0
    cdef Py_ssize_t b, i, base, j, k
    cdef Py_ssize_t idx[4]
    cdef cplx a[4]
    cdef cplx acc
    cdef cplx m[4][4]
    for j in range(4):
        for k in range(4):
            m[j][k] = u[j, k]
    with nogil:
        for b in range(nb):
            for i in range(quarter):
                base = _insert_zero(_insert_zero(i, lo), hi)
                idx[0] = base
                idx[1] = base | m1
                idx[2] = base | m0
                idx[3] = base | m0 | m1
                for j in range(4):
                    a[j] = psi[b, idx[j]]
                for j in range(4):
                    acc = m[j][0] * a[0] + m[j][1] * a[1] + m[j][2] * a[2] + m[j][3] * a[3]
                    psi[b, idx[j]] = acc


def prob_one(cplx[:, ::1] psi, int q):
    cdef Py_ssize_t nb = psi.shape[0]
    cdef Py_ssize_t half = psi.shape[1] >> 1
    cdef Py_ssize_t step = <Py_ssize_t>1 << q
    cdef Py_ssize_t b, i, i1
    cdef double acc
    cdef cplx a
    out = np.empty(nb, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for b in range(nb):
            acc = 0.0
            for i in range(half):
                i1 = _insert_zero(i, q) | step
                a = psi[b, i1]
                acc = acc + a.real * a.real + a.imag * a.imag
            res[b] = acc
    return out


def take_branch(cplx[:, ::1] psi, int q, cnp.int8_t[::1] bits):
    """Copy out the ``bits[b]`` branch of qubit ``q`` per row, dropping the qubit."""
    cdef Py_ssize_t nb = psi.shape[0]
    cdef Py_ssize_t half = psi.shape[1] >> 1
    cdef Py_ssize_t step = <Py_ssize_t>1 << q
    cdef Py_ssize_t b, i, off
    out = np.empty((nb, half), dtype=np.complex128)
    cdef cplx[:, ::1] res = out
    with nogil:
        for b in range(nb):
            off = step if bits[b] else 0
            for i in range(half):
                res[b, i] = psi[b, _insert_zero(i, q) | off]
    return out
