"""Space-time dual of two-qubit gates and its measurement-plus-unitary form.

For a gate ``U`` with inputs ``(i0, i1)`` and outputs ``(o0, o1)`` the dual map
sends the left pair ``(i0, o0)`` to the right pair ``(i1, o1)``:

    dual[(i1, o1), (i0, o0)] = U[(o0, o1), (i0, i1)]

The dual factors as ``2 V H`` with ``V`` unitary and ``0 <= H^2 <= I``, so it
acts as a generalized measurement outcome ``H`` followed by ``V``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from mipt.gates import Gate2Q

EVEN = [0, 3]  # |00>, |11>
ODD = [1, 2]


class NonInvertibleH(UserWarning):
    """H has a null space; V was completed on the kernel."""


@dataclass
class DualDecomposition:
    u_tilde: np.ndarray
    v: np.ndarray
    h: np.ndarray
    lambda_psi: float
    lambda_perp: float
    psi_theta: np.ndarray
    singular: bool = False

    def reconstruct(self) -> np.ndarray:
        return 2.0 * self.v @ self.h


def spacetime_dual(u) -> np.ndarray:
    """Reshuffle a 4x4 gate's indices into its space-time dual (an involution)."""
    m = np.asarray(getattr(u, "matrix", u), dtype=np.complex128)
    t = m.reshape(2, 2, 2, 2)  # (o0, o1, i0, i1)
    return np.ascontiguousarray(np.einsum("abcd->dbca", t).reshape(4, 4))


def psi_theta(theta: float) -> np.ndarray:
    """Isolated eigenvector of H for fsim(theta, 2 theta): (e^{-i theta/2}|00> + e^{i theta/2}|11>)/sqrt 2."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = np.exp(-0.5j * theta)
    psi[3] = np.exp(0.5j * theta)
    return psi / math.sqrt(2)


def measurement_strength(theta: float) -> tuple[float, float, np.ndarray]:
    """Closed-form eigenvalues of H for fsim(theta, 2 theta): (on psi_theta, on its complement, psi_theta)."""
    lam_psi = 0.5 * math.sqrt(1 + 3 * math.cos(theta) ** 2)
    lam_perp = 0.5 * abs(math.sin(theta))
    return lam_psi, lam_perp, psi_theta(theta)


def polar_decompose(u_tilde, theta: float | None = None, tol: float = 1e-12) -> DualDecomposition:
    """Split ``u_tilde = 2 V H`` with H the Hermitian square root of ``u_tilde^† u_tilde / 4``.

    When ``theta`` is given, ``psi_theta`` labels the isolated eigenvector;
    otherwise it is read off the spectrum of H.
    """
    ut = np.asarray(u_tilde, dtype=np.complex128)
    gram = ut.conj().T @ ut / 4.0
    gram = 0.5 * (gram + gram.conj().T)
    evals, evecs = np.linalg.eigh(gram)
    if evals.min() < -1e-9:
        raise ValueError("u_tilde^† u_tilde is not positive semidefinite")
    evals = np.clip(evals, 0.0, None)
    roots = np.sqrt(evals)
    h = (evecs * roots) @ evecs.conj().T

    singular = bool(roots.min() < math.sqrt(tol))
    if singular:
        warnings.warn("H is singular; V completed unitarily on its kernel", NonInvertibleH, stacklevel=2)
    # the unitary SVD factor completes V on ker(H) automatically
    x, _, yh = np.linalg.svd(ut)
    v = x @ yh
    h = 0.5 * (h + h.conj().T)

    if theta is not None:
        psi = psi_theta(theta)
    else:
        psi = _isolated_eigvec(roots, evecs)
    lam_psi = float(np.vdot(psi, h @ psi).real)
    perp = np.eye(4) - np.outer(psi, psi.conj())
    lam_perp = float(np.trace(perp @ h).real / 3.0)
    return DualDecomposition(ut, v, h, lam_psi, lam_perp, psi, singular)


def _isolated_eigvec(roots: np.ndarray, evecs: np.ndarray) -> np.ndarray:
    gaps = [min(abs(roots[k] - roots[j]) for j in range(4) if j != k) for k in range(4)]
    k = int(np.argmax(gaps))
    return evecs[:, k]


def v_prime(decomp: DualDecomposition) -> np.ndarray:
    """Restriction of V to span{|00>, |11>}.

    On the odd block V is the fixed iSWAP-type map ``-i X``, so the even block is
    the whole non-trivial part.
    """
    return decomp.v[np.ix_(EVEN, EVEN)].copy()


def dual_gate(u: Gate2Q) -> np.ndarray:
    return spacetime_dual(u)


def is_measurement_free(u, tol: float = 1e-9) -> bool:
    """True when the dual map is proportional to a unitary (H proportional to I)."""
    d = polar_decompose(spacetime_dual(u))
    return bool(np.allclose(d.h, d.h[0, 0] * np.eye(4), atol=tol))
