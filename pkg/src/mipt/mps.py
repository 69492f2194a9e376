"""Approximate decoding with matrix product states of the mapped 1D monitored circuit.

Every shot gets its own MPS, but all shots of one circuit share tensor shapes:
bond ``i`` (between wires ``i-1`` and ``i``) has dimension
``min(chi, 2^i, 2^(n-i))`` and unused directions are zero-padded. This lets
one stacked SVD or QR serve the whole batch.

Two-wire gates act on neighbors; a gate of range ``d`` is preceded by
``d - 1`` SWAPs that walk its second wire next to its first and followed by
the SWAPs back. Ranges are not capped: with the probe pinned to wire 0 its
own gates reach across the register. Every two-site update is an SVD that
keeps the ``chi`` largest singular values; the discarded weight (sum of
dropped sigma^2 of the normalized state) is accumulated per shot and the
state is renormalized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mipt import gates as G
from mipt.circuits.ir import MeasureReset, Unitary
from mipt.circuits.mapping import MappedCircuit
from mipt.decoder import sign
from mipt.statevec import BRANCH_TOL

_SWAP = np.asarray(G.SWAP, dtype=complex).reshape(2, 2, 2, 2)


class TruncationCollapse(RuntimeError):
    """Truncation removed (numerically) all of a shot's norm."""


class MPS:
    """A batch of MPS on ``n`` wires, all starting in |0...0>.

    ``tensors[i]`` has shape (batch, D_i, 2, D_{i+1}). The orthogonality
    center is tracked in ``center``.
    """

    def __init__(self, n_sites: int, batch: int, chi_max: int):
        if chi_max < 1:
            raise ValueError("chi must be positive")
        self.n = n_sites
        self.batch = batch
        self.chi_max = chi_max
        self.dims = [min(chi_max, 2**i, 2 ** (n_sites - i)) for i in range(n_sites + 1)]
        self.tensors = []
        for i in range(n_sites):
            t = np.zeros((batch, self.dims[i], 2, self.dims[i + 1]), dtype=complex)
            t[:, 0, 0, 0] = 1.0
            self.tensors.append(t)
        self.center = 0
        self.trunc_error = np.zeros(batch)

    # -- canonical form ---------------------------------------------------------------

    def _shift_right(self) -> None:
        c = self.center
        a = self.tensors[c]
        b, l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(b, 2 * l, r))
        self.tensors[c] = q.reshape(b, l, 2, r)
        self.tensors[c + 1] = np.einsum("bij,bjpk->bipk", rr, self.tensors[c + 1])
        self.center = c + 1

    def _shift_left(self) -> None:
        c = self.center
        a = self.tensors[c]
        b, l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(b, l, 2 * r).transpose(0, 2, 1).conj())
        # a = rr^dagger q^dagger; q^dagger has orthonormal rows
        self.tensors[c] = q.transpose(0, 2, 1).conj().reshape(b, l, 2, r)
        self.tensors[c - 1] = np.einsum("bipj,bjk->bipk", self.tensors[c - 1], rr.transpose(0, 2, 1).conj())
        self.center = c - 1

    def move_center(self, site: int) -> None:
        while self.center < site:
            self._shift_right()
        while self.center > site:
            self._shift_left()

    # -- operations ---------------------------------------------------------------------

    def apply_1q(self, u: np.ndarray, site: int) -> None:
        self.tensors[site] = np.einsum("pq,biqj->bipj", np.asarray(u, dtype=complex), self.tensors[site])

    def apply_adjacent(self, u4: np.ndarray, left: int) -> None:
        """Apply a 2x2x2x2 gate (out_l, out_r, in_l, in_r) on wires ``left``, ``left + 1``."""
        self.move_center(left)
        a, c = self.tensors[left], self.tensors[left + 1]
        b, l, _, _ = a.shape
        r = c.shape[3]
        theta = np.einsum("bipj,bjqk->bipqk", a, c)
        theta = np.einsum("stpq,bipqk->bistk", u4, theta)
        u, s, vh = np.linalg.svd(theta.reshape(b, 2 * l, 2 * r), full_matrices=False)
        keep = self.dims[left + 1]
        total = np.sum(s * s, axis=1)
        kept = np.sum(s[:, :keep] ** 2, axis=1)
        if np.any(kept <= BRANCH_TOL * total):
            raise TruncationCollapse(f"truncation at bond {left + 1} left no weight")
        self.trunc_error += (total - kept) / total
        s = s[:, :keep] / np.sqrt(kept)[:, None]
        self.tensors[left] = u[:, :, :keep].reshape(b, l, 2, keep)
        self.tensors[left + 1] = (s[:, :, None] * vh[:, :keep, :]).reshape(b, keep, 2, r)
        self.center = left + 1

    def apply_2q(self, u: np.ndarray, wa: int, wb: int) -> None:
        """Gate with first target ``wa`` (most significant local bit) and second ``wb``."""
        u4 = np.asarray(u, dtype=complex).reshape(2, 2, 2, 2)
        if wa > wb:
            u4 = u4.transpose(1, 0, 3, 2)
            wa, wb = wb, wa
        # walk wb down to wa + 1, apply, walk back
        for k in range(wb - 1, wa, -1):
            self.apply_adjacent(_SWAP, k)
        self.apply_adjacent(u4, wa)
        for k in range(wa + 1, wb):
            self.apply_adjacent(_SWAP, k)

    def p_one(self, site: int) -> np.ndarray:
        self.move_center(site)
        a = self.tensors[site]
        w = np.sum(np.abs(a) ** 2, axis=(1, 3))
        return w[:, 1] / w.sum(axis=1)

    def project_reset(self, site: int, bits: np.ndarray) -> np.ndarray:
        """Project ``site`` on ``bits[row]``, then reset it to |0>. Returns rows with zero weight."""
        self.move_center(site)
        a = self.tensors[site]
        rows = np.arange(self.batch)
        bits = np.asarray(bits, dtype=np.intp)
        w = np.sum(np.abs(a) ** 2, axis=(1, 3))
        p = w[rows, bits] / w.sum(axis=1)
        bad = p < BRANCH_TOL
        bits = np.where(bad, 1 - bits, bits)
        p = np.where(bad, 1.0 - p, p)
        sl = a[rows, :, bits, :] / np.sqrt(np.where(p < BRANCH_TOL, 1.0, p) * w.sum(axis=1))[:, None, None]
        out = np.zeros_like(a)
        out[:, :, 0, :] = sl
        self.tensors[site] = out
        return bad

    def bloch_z(self, site: int) -> np.ndarray:
        return 1.0 - 2.0 * self.p_one(site)

    # -- diagnostics --------------------------------------------------------------------

    def norm_sq(self) -> np.ndarray:
        env = np.ones((self.batch, 1, 1), dtype=complex)
        for a in self.tensors:
            env = np.einsum("bij,bipk,bjpl->bkl", env, a.conj(), a)
        return env[:, 0, 0].real

    def bond_entropies(self) -> np.ndarray:
        """Von Neumann entropies (bits) across every bond, shape (batch, n - 1)."""
        out = np.zeros((self.batch, self.n - 1))
        self.move_center(0)
        for i in range(self.n - 1):
            self._shift_right()
            c = self.tensors[i + 1]
            b, l, _, r = c.shape
            s = np.linalg.svd(c.reshape(b, l, 2 * r), compute_uv=False)
            p = s * s
            p = p / p.sum(axis=1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                out[:, i] = -np.nansum(np.where(p > 0, p * np.log2(p), 0.0), axis=1)
        return out

    def to_dense(self) -> np.ndarray:
        """Amplitudes (batch, 2^n) with wire k as bit k; only for small n."""
        psi = self.tensors[0][:, 0]  # (batch, 2, D1)
        for a in self.tensors[1:]:
            psi = np.einsum("b...j,bjpk->b...pk", psi, a)
        psi = psi[..., 0]  # axes: wire 0 .. n-1
        b = psi.shape[0]
        return np.transpose(psi, [0] + list(range(self.n, 0, -1))).reshape(b, -1)


@dataclass
class MPSDecode:
    a_z: np.ndarray  # (shots, r_max + 1)
    trunc_error: np.ndarray  # (shots,) cumulative discarded weight
    rejected: np.ndarray  # (shots,) bool
    chi: int

    @property
    def tau(self) -> np.ndarray:
        return sign(self.a_z)


def mps_sweep_decode(mapped: MappedCircuit, records, chi: int, batch: int = 256, max_range=None) -> MPSDecode:
    """Decode 0/1 records (shape (shots, n_qubits)) on the mapped circuit with bond cap ``chi``.

    The mapping must come from a decoding schedule, with the probe on wire 0.
    ``max_range`` optionally rejects mappings with longer gates.
    """
    if mapped.probe_wire != 0:
        raise ValueError("the probe must sit on wire 0 (map with a decoding schedule)")
    if max_range is not None and mapped.max_gate_range > max_range:
        raise ValueError(f"gate range {mapped.max_gate_range} exceeds {max_range}")
    records = np.atleast_2d(np.asarray(records, dtype=np.int8))
    n_emit = len(mapped.emit_after)
    chunks = [_decode_chunk(mapped, records[k : k + batch], chi, n_emit) for k in range(0, len(records), batch)]
    return MPSDecode(
        np.concatenate([c[0] for c in chunks]),
        np.concatenate([c[1] for c in chunks]),
        np.concatenate([c[2] for c in chunks]),
        chi,
    )


def _decode_chunk(mapped: MappedCircuit, records: np.ndarray, chi: int, n_emit: int):
    rows = len(records)
    state = MPS(mapped.n_wires, rows, chi)
    a_z = np.zeros((rows, n_emit))
    dead = np.zeros(rows, dtype=bool)
    emits = sorted((pos, r) for r, pos in mapped.emit_after.items())
    e = 0
    seq = mapped.sequence
    for k in range(len(seq) + 1):
        while e < len(emits) and emits[e][0] == k:
            a_z[:, emits[e][1]] = state.bloch_z(0)
            e += 1
        if k == len(seq):
            break
        op = seq[k]
        if isinstance(op, MeasureReset):
            dead |= state.project_reset(op.qubit, records[:, op.key])
        elif isinstance(op, Unitary) and len(op.targets) == 1:
            state.apply_1q(op.matrix, op.targets[0])
        elif isinstance(op, Unitary):
            state.apply_2q(op.matrix, *op.targets)
        else:
            raise ValueError(f"cannot apply {op!r} to an MPS")
    return a_z, state.trunc_error.copy(), dead


def chi_extrapolate(zeta_by_chi: dict, chi_min: int = 32, chi_max: int = 256):
    """Least-squares fit ``zeta(chi) = alpha / log(chi) + beta`` over ``chi_min <= chi <= chi_max``.

    Values may be scalars or arrays (one fit per entry). Returns
    ``(beta, alpha, residual)`` where ``residual`` is the root-mean-square misfit.
    """
    chis = sorted(c for c in zeta_by_chi if chi_min <= c <= chi_max)
    if len(chis) < 2:
        raise ValueError("need at least two bond dimensions in the fit window")
    x = np.array([1.0 / math.log(c) for c in chis])
    y = np.array([np.asarray(zeta_by_chi[c], dtype=float) for c in chis])
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y.reshape(len(chis), -1), rcond=None)
    resid = y.reshape(len(chis), -1) - a @ coef
    shape = y.shape[1:]
    alpha = coef[0].reshape(shape)
    beta = coef[1].reshape(shape)
    rms = np.sqrt(np.mean(resid**2, axis=0)).reshape(shape)
    if not shape:
        return float(beta), float(alpha), float(rms)
    return beta, alpha, rms


def damping_model(q, zeta_true):
    """Decoded signal when each decoded sign is right with probability ``q``: (2q - 1) zeta."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("q must lie in [0, 1]")
    return (2 * q - 1) * np.asarray(zeta_true, dtype=float)
