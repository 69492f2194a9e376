"""Single-qubit depolarizing noise and the noisy-Haar purity analytics.

The channel keeps the identity and shrinks every Pauli by ``e^{-eps}``:

    E(rho) = e^{-eps} rho + (1 - e^{-eps}) I/2 (x) Tr_q rho

Unraveled into trajectories it applies a uniformly random Pauli with
probability ``3/4 (1 - e^{-eps})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mipt import statevec as sv
from mipt.gates import PAULIS
from mipt.rng import as_generator

_PAULI_LIST = (PAULIS["X"], PAULIS["Y"], PAULIS["Z"])


@dataclass(frozen=True)
class DepolarizingChannel:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def pauli_probability(self) -> float:
        return pauli_probability(self.epsilon)

    @property
    def shrink(self) -> float:
        return math.exp(-self.epsilon)


def pauli_probability(eps: float) -> float:
    """Probability that one trajectory step applies a (uniform) non-identity Pauli."""
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    return 0.75 * (1.0 - math.exp(-eps))


def draw_paulis(eps: float, size, rng) -> np.ndarray:
    """Pauli labels per trajectory: 0 = none, 1, 2, 3 = X, Y, Z."""
    rng = as_generator(rng)
    hit = rng.random(size) < pauli_probability(eps)
    which = rng.integers(1, 4, size=size)
    return np.where(hit, which, 0)


def pauli_matrix(label: int) -> np.ndarray | None:
    return None if label == 0 else _PAULI_LIST[label - 1]


def depolarize_pauli(eps: float, rng) -> np.ndarray | None:
    """Draw the Pauli (or None) for one trajectory step."""
    if eps <= 0:
        return None
    return pauli_matrix(int(draw_paulis(eps, None, rng)))


def apply_depolarizing_stochastic(state: sv.StateVector, qubit: int, eps: float, rng) -> sv.StateVector:
    """One trajectory step of the channel on ``qubit``, in place."""
    pauli = depolarize_pauli(eps, as_generator(rng))
    if pauli is not None:
        sv.apply_linear(state, pauli, (qubit,))
    return state


def apply_depolarizing_dm(rho, qubit: int, eps: float) -> sv.DensityMatrix:
    """Exact channel on a density matrix (returns a new matrix)."""
    m = np.asarray(getattr(rho, "elems", rho), dtype=np.complex128)
    n = int(round(math.log2(m.shape[0])))
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")
    lam = math.exp(-eps)
    # split row and column indices as (high, bit, low)
    t = m.reshape(1 << (n - qubit - 1), 2, 1 << qubit, 1 << (n - qubit - 1), 2, 1 << qubit)
    traced = np.einsum("aibcid->abcd", t)
    mixed = np.einsum("abcd,ij->aibcjd", traced, np.eye(2) / 2)
    out = lam * t + (1 - lam) * mixed
    return sv.DensityMatrix(n, out.reshape(m.shape))


def depolarize_all_dm(rho, eps: float) -> sv.DensityMatrix:
    m = getattr(rho, "elems", rho)
    n = int(round(math.log2(np.shape(m)[0])))
    out = sv.DensityMatrix(n, np.asarray(m, dtype=np.complex128))
    for q in range(n):
        out = apply_depolarizing_dm(out, q, eps)
    return out


def density_of(state: sv.StateVector) -> sv.DensityMatrix:
    return sv.DensityMatrix(state.n_qubits, np.outer(state.amps, state.amps.conj()))


def haar_state(n: int, rng=None) -> sv.StateVector:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    rng = as_generator(rng)
    z = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return sv.StateVector(n, z / np.linalg.norm(z))


def swap_matrix_element(eps: float) -> float:
    """(chi|E (x) E|chi) for the single-site replica swap chi = (II + XX + YY + ZZ)/2."""
    return 1.0 + 3.0 * math.exp(-2.0 * eps)


def noisy_haar_purity(n: int, n_a: int, eps: float) -> float:
    """Haar average of Tr[(rho_A^noisy)^2] for ``n_a`` of ``n`` qubits."""
    if not 0 <= n_a <= n:
        raise ValueError("need 0 <= n_a <= n")
    c = swap_matrix_element(eps) / 2.0
    return (2.0 ** (n - n_a) + c**n_a) / (2.0**n + 1.0)


def mitigated_haar_slope(eps: float, n: int | None = None) -> tuple[float, float | None]:
    """Return (sigma, peak): the mitigated ascending slope and the peak location N/(1+sigma)."""
    sigma = math.log2(swap_matrix_element(eps) / 2.0)
    return sigma, (None if n is None else n / (1.0 + sigma))
