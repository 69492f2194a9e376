"""Dense state-vector engine.

Qubit ``k`` is bit ``k`` of the amplitude index (qubit 0 least significant).
Multi-qubit gate matrices are written in the basis ``|b_t0 b_t1 ...>`` with the
first target as the most significant local bit. Measurement bits are 0/1; the
signed convention used by the decoder is ``z = 1 - 2 b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mipt import kernels
from mipt.rng import as_generator

UNITARY_TOL = 1e-10
BRANCH_TOL = 1e-14
MAX_REDUCED_QUBITS = 14


class DegenerateBranch(ValueError):
    """A requested projection has (numerically) zero probability."""


@dataclass
class StateVector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a state needs at least one qubit")
        self.amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got {self.amps.shape}")

    @classmethod
    def zeros(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())

    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalize(self) -> "StateVector":
        self.amps /= np.sqrt(self.norm_sq())
        return self

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def _rows(self) -> np.ndarray:
        return self.amps.reshape(1, -1)


@dataclass
class DensityMatrix:
    n_qubits: int
    elems: np.ndarray

    def validate(self, tol: float = 1e-10) -> None:
        m = self.elems
        if not np.allclose(m, m.conj().T, atol=tol):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise ValueError("density matrix has negative eigenvalues")


@dataclass(frozen=True)
class BlochVector:
    ax: float
    ay: float
    az: float

    def length(self) -> float:
        return float(np.sqrt(self.ax**2 + self.ay**2 + self.az**2))


def _matrix_of(gate) -> np.ndarray:
    return np.asarray(getattr(gate, "matrix", gate), dtype=np.complex128)


def _check_targets(state: StateVector, targets) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct: {targets}")
    for t in targets:
        if not 0 <= t < state.n_qubits:
            raise IndexError(f"qubit {t} out of range for {state.n_qubits} qubits")
    return targets


def apply_linear(state: StateVector, matrix, targets) -> StateVector:
    """Apply an arbitrary 2x2 or 4x4 linear map in place, without renormalizing."""
    targets = _check_targets(state, targets)
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    if m.shape != (1 << len(targets),) * 2:
        raise ValueError(f"matrix shape {m.shape} does not match {len(targets)} targets")
    rows = state._rows()
    if len(targets) == 1:
        kernels.apply_1q(rows, m, targets[0])
    elif len(targets) == 2:
        kernels.apply_2q(rows, m, targets[0], targets[1])
    else:
        raise ValueError("only one- and two-qubit operations are supported")
    return state


def apply_gate(state: StateVector, gate, targets) -> StateVector:
    """Apply a unitary gate (matrix or object with ``.matrix``) in place."""
    m = _matrix_of(gate)
    if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=UNITARY_TOL):
        raise ValueError("gate is not unitary; use apply_linear for raw maps")
    return apply_linear(state, m, targets)


def prob_one(state: StateVector, qubit: int) -> float:
    _check_targets(state, [qubit])
    return float(kernels.prob_one(state._rows(), qubit)[0])


def project(state: StateVector, qubit: int, bit: int) -> tuple[float, StateVector]:
    """Project ``qubit`` onto ``|bit>`` in place; return the branch probability."""
    _check_targets(state, [qubit])
    p1 = prob_one(state, qubit)
    total = state.norm_sq()
    prob = (p1 if bit else total - p1) / total
    if prob < BRANCH_TOL:
        raise DegenerateBranch(f"qubit {qubit} has probability {prob:.3g} for bit {bit}")
    view = state.amps.reshape(-1, 2, 1 << qubit)
    view[:, 1 - bit, :] = 0.0
    state.amps /= np.sqrt(prob * total)
    return prob, state


def measure(state: StateVector, qubit: int, rng=None) -> tuple[int, StateVector]:
    rng = as_generator(rng)
    p1 = prob_one(state, qubit) / state.norm_sq()
    bit = int(rng.random() < p1)
    project(state, qubit, bit)
    return bit, state


def reset(state: StateVector, qubit: int, rng=None) -> StateVector:
    bit, _ = measure(state, qubit, rng)
    if bit:
        view = state.amps.reshape(-1, 2, 1 << qubit)
        view[:, 0, :] = view[:, 1, :]
        view[:, 1, :] = 0.0
    return state


def reduced_density(state: StateVector, subsystem) -> DensityMatrix:
    """Partial trace onto ``subsystem``; ``subsystem[k]`` becomes bit ``k`` of the result."""
    subsystem = _check_targets(state, subsystem)
    k = len(subsystem)
    if k > MAX_REDUCED_QUBITS:
        raise ValueError(f"reduced density matrices are capped at {MAX_REDUCED_QUBITS} qubits")
    n = state.n_qubits
    tensor = state.amps.reshape([2] * n)
    keep = [n - 1 - q for q in reversed(subsystem)]
    rest = [a for a in range(n) if a not in keep]
    mat = tensor.transpose(keep + rest).reshape(1 << k, -1)
    rho = mat @ mat.conj().T
    return DensityMatrix(k, rho / np.trace(rho).real)


def purity(rho: DensityMatrix | np.ndarray) -> float:
    m = getattr(rho, "elems", rho)
    return float(np.einsum("ij,ji->", m, m).real)


def renyi2(rho: DensityMatrix | np.ndarray) -> float:
    """Second Renyi entropy in bits."""
    return float(-np.log2(purity(rho)))


_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch(rho: DensityMatrix | np.ndarray) -> BlochVector:
    m = getattr(rho, "elems", rho)
    if np.shape(m) != (2, 2):
        raise ValueError("bloch() needs a single-qubit density matrix")
    return BlochVector(
        float(np.trace(m @ _PAULI_X).real),
        float(np.trace(m @ _PAULI_Y).real),
        float(np.trace(m @ _PAULI_Z).real),
    )
