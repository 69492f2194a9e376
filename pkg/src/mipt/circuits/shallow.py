"""Shallow 2D random circuits on a colored grid."""
from __future__ import annotations

import math

import numpy as np

from mipt import gates as G
from mipt.circuits.geometry import Geometry
from mipt.circuits.ir import Circuit, Unitary
from mipt.rng import derive

ISWAP_LIKE_PHI = math.pi / 6
_SQ_STREAM, _EDGE_STREAM = 1, 2


def _seed_of(rng) -> int:
    if rng is None:
        raise ValueError("a seed is required")
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(2**63))


def build_shallow_2d(
    geom: Geometry,
    t: int,
    rho: float,
    rng,
    phi: float = ISWAP_LIKE_PHI,
    final_layer: bool = True,
) -> Circuit:
    """Random single-qubit gates then one colored layer of iSWAP-like gates per cycle.

    Each two-qubit gate is kept when a uniform draw tied to (seed, cycle, edge)
    falls below ``rho``; the draws do not depend on ``rho``, so circuits built
    from one seed are nested in ``rho``. A final single-qubit layer randomizes
    the readout basis.
    """
    if not 1 <= t <= len(geom.cycle_colors):
        raise ValueError(f"depth {t} outside the color schedule (1..{len(geom.cycle_colors)})")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("gate density must lie in [0, 1]")
    seed = _seed_of(rng)
    sq_rng = derive(seed, _SQ_STREAM)
    keep_rng = derive(seed, _EDGE_STREAM)
    n = geom.n_qubits
    n_layers = t + 1 if final_layer else t
    sq_index = sq_rng.integers(len(G.RANDOM_SQ_SET), size=(n_layers, n))
    two_q = G.iswap_like(phi)

    moments = []
    cycle_ends = []
    for cycle in range(t):
        moments.append([_sq_op(int(sq_index[cycle, q]), q) for q in range(n)])
        color = geom.cycle_colors[cycle]
        draws = keep_rng.random(len(geom.edges))  # one draw per geometry edge, every cycle
        layer = [
            Unitary(two_q.matrix, (i, j), two_q.label, dict(two_q.params))
            for k, (i, j, c) in enumerate(geom.edges)
            if c == color and draws[k] < rho
        ]
        moments.append(layer)
        cycle_ends.append(len(moments))
    if final_layer:
        moments.append([_sq_op(int(sq_index[t, q]), q) for q in range(n)])
        cycle_ends.append(len(moments))
    meta = {
        "geometry": geom.name,
        "depth": t,
        "rho": float(rho),
        "seed": seed,
        "two_qubit_gate": "fsim(pi/2, phi)",
        "phi": float(phi),
        "final_layer": bool(final_layer),
        "cycle_ends": cycle_ends,
    }
    return Circuit(n, moments, meta)


def _sq_op(index: int, qubit: int) -> Unitary:
    g = G.sq_gate_by_index(index)
    return Unitary(g.matrix, (qubit,), g.label, {"index": index})


def effective_measurement_rate(m: int, l: int, t: float) -> float:
    """Measurements per unitary gate, M / ((M + L) T)."""
    if m < 0 or l < 0 or t <= 0:
        raise ValueError("need m, l >= 0 and t > 0")
    if m + l == 0:
        return 0.0
    return m / ((m + l) * t)
