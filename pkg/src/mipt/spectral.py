"""Quasi-energy level statistics of the disordered fSim Floquet chain.

    U_F = e^{-i sum h_i Z_i} . (fSim on even bonds) . e^{-i sum h_i Z_i} . (fSim on odd bonds)

on an open chain of ``L`` qubits with fSim(theta, 2 theta). Even bonds are
(0,1), (2,3), ...; odd bonds are (1,2), (3,4), ... . The dynamics conserves the
number of excitations, so it is diagonalized in one charge sector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from mipt import gates as G
from mipt import kernels
from mipt.rng import as_generator

MAX_L = 14
POISSON_RATIO = 2 * math.log(2) - 1
GOE_RATIO = 4 - 2 * math.sqrt(3)  # Wigner-surmise value, 0.5359


@dataclass
class FloquetSpec:
    L: int
    theta: float
    fields: np.ndarray = field(default=None)
    charge: int = 0  # sum of Z eigenvalues (|0> counts +1)

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("chain needs at least two sites")
        if self.L > MAX_L:
            raise ValueError(f"L={self.L} exceeds the dense limit {MAX_L}")
        if (self.L - self.charge) % 2 or abs(self.charge) > self.L:
            raise ValueError("charge incompatible with chain length (zero charge needs even L)")
        if self.fields is None:
            self.fields = np.zeros(self.L)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.fields.shape != (self.L,):
            raise ValueError("one field per site is required")

    @property
    def excitations(self) -> int:
        return (self.L - self.charge) // 2


def sector_basis(L: int, excitations: int) -> np.ndarray:
    """Basis indices with ``excitations`` ones, ascending."""
    idx = [sum(1 << q for q in ones) for ones in combinations(range(L), excitations)]
    return np.array(sorted(idx), dtype=np.int64)


def _apply_floquet_rows(psi: np.ndarray, spec: FloquetSpec) -> None:
    """Apply U_F to every row of ``psi`` in place (full 2^L space)."""
    L = spec.L
    gate = np.ascontiguousarray(G.fsim(spec.theta, 2 * spec.theta).matrix)
    z = ((np.arange(1 << L)[:, None] >> np.arange(L)) & 1) * -2 + 1  # Z eigenvalue per site
    phase = np.exp(-1j * (z @ spec.fields))
    for a in range(1, L - 1, 2):
        kernels.apply_2q(psi, gate, a, a + 1)
    psi *= phase
    for a in range(0, L - 1, 2):
        kernels.apply_2q(psi, gate, a, a + 1)
    psi *= phase


def floquet_unitary_full(spec: FloquetSpec) -> np.ndarray:
    dim = 1 << spec.L
    rows = np.eye(dim, dtype=np.complex128)
    _apply_floquet_rows(rows, spec)
    return rows.T  # column j is U_F |j>


def floquet_unitary(spec: FloquetSpec) -> np.ndarray:
    """U_F restricted to the charge sector (basis from ``sector_basis``)."""
    basis = sector_basis(spec.L, spec.excitations)
    rows = np.zeros((len(basis), 1 << spec.L), dtype=np.complex128)
    rows[np.arange(len(basis)), basis] = 1.0
    _apply_floquet_rows(rows, spec)
    return np.ascontiguousarray(rows[:, basis].T)


def quasi_energies(u: np.ndarray) -> np.ndarray:
    """Sorted quasi-energies E in (-pi, pi] from eigenvalues e^{-iE}."""
    e = -np.angle(np.linalg.eigvals(u))
    e[e <= -math.pi] += 2 * math.pi
    return np.sort(e)


def spacing_ratios(energies: np.ndarray, degenerate_tol: float = 1e-12) -> np.ndarray:
    """r_n over interior spacings of a sorted spectrum; the spacing across the branch cut is dropped."""
    d = np.diff(np.sort(energies))
    if np.any(d < degenerate_tol):
        raise ValueError("degenerate spectrum")
    return np.minimum(d[:-1], d[1:]) / np.maximum(d[:-1], d[1:])


@dataclass
class LevelStats:
    r_bar: float
    stderr: float
    n_used: int
    n_skipped: int


def level_spacing_ratio(L: int, theta: float, n_realizations: int, rng, charge: int = 0) -> LevelStats:
    """Mean spacing ratio over disorder; fields h_i ~ U[0, 2 pi) are redrawn per realization."""
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    rng = as_generator(rng)
    means = []
    skipped = 0
    for _ in range(n_realizations):
        spec = FloquetSpec(L, theta, rng.uniform(0, 2 * math.pi, size=L), charge)
        try:
            means.append(spacing_ratios(quasi_energies(floquet_unitary(spec))).mean())
        except ValueError:
            skipped += 1
    means = np.array(means)
    if not len(means):
        return LevelStats(float("nan"), float("nan"), 0, skipped)
    err = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float("nan")
    return LevelStats(float(means.mean()), err, len(means), skipped)
