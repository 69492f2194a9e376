"""A 1D monitored brickwork circuit and its unitary space-time dual.

Unitary picture: ``t`` wires, ``n`` brickwork layers of
``(z_pow(h_a) x z_pow(h_b)) . fsim(theta, 2 theta)``. Every wire starts in |0>;
wires ``0 .. t-2`` are read out at the end (record keys ``0 .. t-2``). The last
wire only meets its neighbour at even layers, and the legs of those gates form
the output state ``|psi_m>`` on ``n`` sites (site ``2k`` is the input leg of the
k-th such gate, site ``2k+1`` its output leg).

Monitored picture: ``n + 1`` sites evolved for ``t - 1`` steps by the dual maps.
Site ``n`` is a boundary site carrying the readout bits; it ends in a basis
state, so ``|psi_m>`` is the state of sites ``0 .. n-1``.
"""
from __future__ import annotations

import math

import numpy as np

from mipt import gates as G
from mipt import statevec as sv
from mipt.circuits.ir import Circuit, LinearMap, Measure, Postselect, Prepare, Unitary, pack_moments
from mipt.circuits.sim import simulate
from mipt.duality import spacetime_dual
from mipt.rng import as_generator


def _layer_parity(t: int, w: int) -> int:
    # the pair (t-2, t-1) acts at even layers; parities alternate towards wire 0
    return (t - 2 - w) % 2


def dual_pair_gate(theta: float, h_a: float, h_b: float) -> np.ndarray:
    zz = np.kron(G.z_pow(h_a).matrix, G.z_pow(h_b).matrix)
    return zz @ G.fsim(theta, 2 * theta).matrix


def build_1d_dual_pair(n: int, t: int, theta: float, rng, powers=None) -> tuple[Circuit, Circuit]:
    """Return ``(monitored, dual_unitary)`` for ``n`` sites (even) and ``t >= 2`` wires.

    ``powers`` overrides the random Z powers (one per wire, uniform in [0, 2)).
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    if t < 2:
        raise ValueError("t must be at least 2")
    if not 0 < theta <= math.pi / 2 + 1e-12:
        raise ValueError("theta must lie in (0, pi/2]")
    if powers is None:
        powers = as_generator(rng).uniform(0.0, 2.0, size=t)
    powers = [float(h) for h in powers]
    meta = {"n": n, "t": t, "theta": float(theta), "phi": float(2 * theta), "powers": powers}

    # unitary picture
    moments = []
    for layer in range(n):
        ops = []
        for w in range(t - 1):
            if layer % 2 == _layer_parity(t, w):
                m = dual_pair_gate(theta, powers[w], powers[w + 1])
                ops.append(Unitary(m, (w, w + 1), "fsim_z", {"theta": theta, "layer": layer}))
        moments.append(ops)
    moments.append([Measure(w, key=w) for w in range(t - 1)])
    unitary = Circuit(t, moments, dict(meta, picture="unitary"))

    # monitored picture
    sites = n + 1
    ops = []
    p0 = _layer_parity(t, 0)
    bell_start = 1 if p0 == 0 else 0
    for a in range(bell_start, bell_start + n, 2):
        ops.append(Unitary(G.H, (a,), "h"))
        ops.append(Unitary(G.CNOT, (a, a + 1), "cnot"))
    if p0 == 1:
        ops.append(Prepare(n, key=0))
    for w in range(t - 1):
        p = _layer_parity(t, w)
        dual = spacetime_dual(dual_pair_gate(theta, powers[w], powers[w + 1]))
        unitary_dual = G.is_unitary(dual, 1e-9)
        if p == 1:
            ops.append(Postselect(0, 0))
        for a in range(p, p + n, 2):
            if unitary_dual:
                ops.append(Unitary(dual, (a, a + 1), "dual_fsim_z", {"step": w}))
            else:
                ops.append(LinearMap(dual, (a, a + 1), "dual_fsim_z", {"step": w}))
        if p == 0:
            ops.append(Postselect(n, key=w))
            if w + 1 < t - 1:
                ops.append(Prepare(n, key=w + 1))
    monitored = Circuit(sites, pack_moments(ops), dict(meta, picture="monitored"))
    return monitored, unitary


def build_teleport_harness(dual: Circuit) -> Circuit:
    """Append ``n`` ancillas that collect the last wire's gate legs.

    Before the k-th gate touching the last wire, that wire and ancilla ``2k``
    are prepared in a Bell pair; afterwards the wire is swapped with ancilla
    ``2k + 1``. At the end the ancillas hold the monitored output state.
    """
    t = dual.n_qubits
    last = t - 1
    ops_out = []
    k = 0
    for op in dual.operations():
        if isinstance(op, Unitary) and last in op.targets:
            b, a = t + 2 * k, t + 2 * k + 1
            ops_out.append(Unitary(G.H, (b,), "h"))
            ops_out.append(Unitary(G.CNOT, (b, last), "cnot"))
            ops_out.append(op)
            ops_out.append(Unitary(G.SWAP, (last, a), "swap"))
            k += 1
        else:
            ops_out.append(op)
    meta = dict(dual.metadata, picture="harness", ancillas=list(range(t, t + 2 * k)), bell_pairs=k)
    return Circuit(t + 2 * k, pack_moments(ops_out), meta)


def harness_output(harness: Circuit, record: dict):
    """Conditioned ancilla state of a teleport harness (normalized) and the record probability."""
    res = simulate(harness, record=record)
    anc = harness.metadata["ancillas"]
    t = harness.n_qubits - len(anc)
    amps = res.state.amps.reshape(-1, 1 << t)
    # the system wires other than the last are in basis states; the last is |0> after its swap
    col = sum(int(record[w]) << w for w in range(t - 1))
    out = amps[:, col].copy()
    norm = np.linalg.norm(out)
    return sv.StateVector(len(anc), out / norm), math.exp(res.log_prob)


def monitored_output(monitored: Circuit, record: dict):
    """Normalized ``|psi_m>`` on sites ``0 .. n-1`` and its unnormalized weight."""
    res = simulate(monitored, record=record)
    n = monitored.n_qubits - 1
    t_last = monitored.metadata["t"] - 2
    bit = int(record[t_last])
    amps = res.state.amps.reshape(2, -1)[bit]
    norm = np.linalg.norm(amps)
    return sv.StateVector(n, amps / norm), res.norm_sq * norm**2
