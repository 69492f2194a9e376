"""Gate constructors with exact matrix definitions.

Two-qubit matrices are in the basis |00>, |01>, |10>, |11> with the first
target as the left (most significant) factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mipt.rng import as_generator


def wrap_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x}")
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


@dataclass(frozen=True)
class FsimParams:
    theta: float
    phi: float
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    delta_minus_off: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi", "delta_plus", "delta_minus", "delta_minus_off"):
            object.__setattr__(self, name, wrap_angle(float(getattr(self, name))))


@dataclass(frozen=True, eq=False)
class Gate1Q:
    matrix: np.ndarray
    label: str = "u1"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.complex128))
        if self.matrix.shape != (2, 2):
            raise ValueError("single-qubit gate needs a 2x2 matrix")

    def inverse(self) -> "Gate1Q":
        return Gate1Q(self.matrix.conj().T, self.label + "^-1", dict(self.params))


@dataclass(frozen=True, eq=False)
class Gate2Q:
    matrix: np.ndarray
    label: str = "u2"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.complex128))
        if self.matrix.shape != (4, 4):
            raise ValueError("two-qubit gate needs a 4x4 matrix")


def is_unitary(m, tol: float = 1e-10) -> bool:
    m = np.asarray(getattr(m, "matrix", m))
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol))


I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
W = (X + Y) / math.sqrt(2)
V = (X - Y) / math.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
PAULIS = {"X": X, "Y": Y, "Z": Z}


def fsim(p: FsimParams | float, phi: float | None = None) -> Gate2Q:
    """Five-parameter fSim gate; ``fsim(theta, phi)`` is accepted as shorthand."""
    if not isinstance(p, FsimParams):
        p = FsimParams(p, 0.0 if phi is None else phi)
    c, s = math.cos(p.theta), math.sin(p.theta)
    e = lambda a: complex(math.cos(a), math.sin(a))  # noqa: E731
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    m[1, 1] = e(p.delta_plus + p.delta_minus) * c
    m[1, 2] = -1j * e(p.delta_plus - p.delta_minus_off) * s
    m[2, 1] = -1j * e(p.delta_plus + p.delta_minus_off) * s
    m[2, 2] = e(p.delta_plus - p.delta_minus) * c
    m[3, 3] = e(2 * p.delta_plus - p.phi)
    params = {
        "theta": p.theta,
        "phi": p.phi,
        "delta_plus": p.delta_plus,
        "delta_minus": p.delta_minus,
        "delta_minus_off": p.delta_minus_off,
    }
    return Gate2Q(m, "fsim", params)


def principal_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a normal matrix, eigenphases taken in (-pi, pi]."""
    w, vecs = np.linalg.eig(m)
    phases = np.array([wrap_angle(float(np.angle(x))) for x in w])
    roots = np.sqrt(np.abs(w)) * np.exp(0.5j * phases)
    return vecs @ np.diag(roots) @ np.linalg.inv(vecs)


def _sqrt_pauli_like(p: np.ndarray) -> np.ndarray:
    # exact form of principal_sqrt for an involution with eigenvalues +-1
    return 0.5 * (I2 + p) + 0.5j * (I2 - p)


SQRT_GATES = {
    "sqrt_x": _sqrt_pauli_like(X),
    "sqrt_y": _sqrt_pauli_like(Y),
    "sqrt_w": _sqrt_pauli_like(W),
    "sqrt_v": _sqrt_pauli_like(V),
}
RANDOM_SQ_SET = tuple(
    (name + suffix, m if suffix == "" else m.conj().T)
    for name, m in SQRT_GATES.items()
    for suffix in ("", "^-1")
)


def random_sq_gate(rng=None) -> Gate1Q:
    """Uniform draw from {sqrt(X)^{+-1}, sqrt(Y)^{+-1}, sqrt(W)^{+-1}, sqrt(V)^{+-1}}."""
    rng = as_generator(rng)
    k = int(rng.integers(len(RANDOM_SQ_SET)))
    label, m = RANDOM_SQ_SET[k]
    return Gate1Q(m.copy(), label, {"index": k})


def sq_gate_by_index(k: int) -> Gate1Q:
    label, m = RANDOM_SQ_SET[k]
    return Gate1Q(m.copy(), label, {"index": k})


def z_pow(h: float) -> Gate1Q:
    return Gate1Q(np.diag([1.0, np.exp(1j * math.pi * h)]), "z_pow", {"h": float(h)})


def haar_unitary(dim: int, rng=None) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with R's diagonal made positive."""
    rng = as_generator(rng)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def cue_1q(rng=None) -> Gate1Q:
    return Gate1Q(haar_unitary(2, rng), "cue")


def iswap_like(phi: float = math.pi / 6) -> Gate2Q:
    """The two-qubit gate used in the shallow 2D circuits: fsim(pi/2, phi)."""
    g = fsim(FsimParams(math.pi / 2, phi))
    return Gate2Q(g.matrix, "iswap_like", g.params)


def pauli_gate(name: str) -> Gate1Q:
    return Gate1Q(PAULIS[name], name)
