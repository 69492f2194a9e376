"""Desk-scale experiment runners shared by the command line and the acceptance suite.

Every function is a pure function of its arguments and an integer master seed.
Per-instance generators come from :func:`mipt.rng.derive` with integer stream
labels, so results do not depend on execution order or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from mipt import decoder as D
from mipt import noise
from mipt import randmeas as RM
from mipt import statevec as sv
from mipt.circuits.dual import build_1d_dual_pair, build_teleport_harness, harness_output
from mipt.circuits.geometry import Geometry
from mipt.circuits.ir import Circuit, Measure
from mipt.circuits.mapping import map_2d_to_1d
from mipt.circuits.shallow import build_shallow_2d
from mipt.circuits.sim import final_state
from mipt.mps import mps_sweep_decode
from mipt.rng import derive
from mipt.spectral import level_spacing_ratio

# integer stream labels for derive()
_DUAL, _SHALLOW, _CIRCUIT, _SHOTS, _RANDOMIZED, _SPECTRAL, _HAAR = range(7)


def map_units(fn, units: list, workers: int = 1) -> list:
    """``[fn(u) for u in units]``, optionally on a process pool; order is preserved."""
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, units))


def _key(x: float) -> int:
    """Integer label for a real parameter (stable to 1e-6)."""
    return int(round(x * 1_000_000))


def mutual_information_exact(state, a, b) -> float:
    """Second Renyi mutual information of a state vector or density matrix."""
    if isinstance(state, sv.StateVector):
        s = lambda sub: sv.renyi2(sv.reduced_density(state, sub))  # noqa: E731
    else:
        m = np.asarray(getattr(state, "elems", state))
        s = lambda sub: sv.renyi2(RM.reduced_density_dm(m, sub))  # noqa: E731
    return s(list(a)) + s(list(b)) - s(list(a) + list(b))


# -- dual circuits -------------------------------------------------------------------


def _without_readout(circ: Circuit) -> Circuit:
    moments = [[op for op in m if not isinstance(op, Measure)] for m in circ.moments]
    return Circuit(circ.n_qubits, [m for m in moments if m], dict(circ.metadata))


def dual_record_state(n: int, t: int, theta: float, rng, record: str = "most-probable"):
    """Output state ``|psi_m>`` of a dual circuit with its readout record.

    ``record`` is ``"most-probable"`` (argmax of the readout distribution) or
    ``"sampled"`` (one Born draw). Returns ``(state, record dict, probability)``.
    """
    gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    _, unitary = build_1d_dual_pair(n, t, theta, gen)
    harness = build_teleport_harness(unitary)
    amps = final_state(_without_readout(harness)).amps.reshape(-1, 1 << t)
    # readout wires 0 .. t-2 are the low bits of the column; the last wire ends in |0>
    probs = (np.abs(amps) ** 2).sum(axis=0)[: 1 << (t - 1)]
    if record == "most-probable":
        idx = int(np.argmax(probs))
    elif record == "sampled":
        idx = int(gen.choice(len(probs), p=probs / probs.sum()))
    else:
        raise ValueError(f"unknown record choice {record!r}")
    rec = {w: (idx >> w) & 1 for w in range(t - 1)}
    state, _ = harness_output(harness, rec)
    return state, rec, float(probs[idx] / probs.sum())


@dataclass
class DualCurves:
    theta: float
    entropies: np.ndarray  # (instances, n + 1) S2 averaged over contiguous windows
    half_cut: np.ndarray  # (instances,) S2 of sites 0 .. n/2-1
    errors: np.ndarray | None = None  # (instances, n + 1) jackknife errors when sampled
    half_cut_errors: np.ndarray | None = None


def dual_entropy_curves(
    n: int,
    t: int,
    theta: float,
    instances: int,
    seed: int,
    record: str = "most-probable",
    randomized: tuple | None = None,
    workers: int = 1,
) -> DualCurves:
    """Window-averaged S2 curves and half-cut S2 of ``|psi_m>`` over dual-circuit instances.

    ``randomized = (unitaries, shots)`` estimates the entropies from simulated
    randomized measurements instead of computing them exactly.
    """
    units = [(n, t, theta, seed, i, record, randomized) for i in range(instances)]
    out = map_units(_dual_unit, units, workers)
    curves = np.array([o[0].entropies for o in out])
    half = np.array([o[1][0] for o in out])
    if randomized is None:
        return DualCurves(float(theta), curves, half)
    errs = np.array([o[0].errors for o in out])
    return DualCurves(float(theta), curves, half, errs, np.array([o[1][1] for o in out]))


def _dual_unit(unit):
    n, t, theta, seed, i, record, randomized = unit
    state, _, _ = dual_record_state(n, t, theta, derive(seed, _DUAL, _key(theta), i), record)
    half = list(range(n // 2))
    if randomized is None:
        return RM.exact_entropy_curve(state), (sv.renyi2(sv.reduced_density(state, half)), 0.0)
    n_unitaries, shots = randomized
    data = RM.sample_randomized(state, n_unitaries, shots, derive(seed, _RANDOMIZED, _key(theta), i))
    return RM.entropy_curve(data), RM.estimate_entropy(data, half)


# -- shallow 2D circuits --------------------------------------------------------------


@dataclass
class ShallowInfo:
    depth: int
    separations: np.ndarray  # x, number of chain qubits between A and B
    entropies: np.ndarray  # (instances, L + 1) window-averaged S2 of the post-selected chain
    mi: np.ndarray  # (instances, len(separations)) post-selected two-qubit I2
    mi_control: np.ndarray  # (instances, len(separations)) I2 without post-selection


def chain_amplitudes(circ: Circuit, final) -> np.ndarray:
    """Final amplitudes as a (records, 2**L) matrix, chain qubit k at bit k of the column."""
    n = circ.n_qubits
    final = list(final)
    rest = [q for q in range(n) if q not in final]
    t = final_state(circ).amps.reshape((2,) * n)
    # tensor axis a holds qubit n-1-a; put measured qubits first, chain last (reversed)
    order = [n - 1 - q for q in reversed(rest)] + [n - 1 - q for q in reversed(final)]
    return np.transpose(t, order).reshape(1 << len(rest), 1 << len(final))


def shallow_chain_information(
    geom: Geometry,
    depth: int,
    instances: int,
    seed: int,
    rho: float = 1.0,
    block: int = 2,
    final_layer: bool = False,
    workers: int = 1,
) -> ShallowInfo:
    """Entanglement of the unmeasured chain, post-selected on the most probable record.

    ``A = {0 .. block-1}`` and ``B`` is the block starting ``x`` sites after ``A``
    ends; the control mixes all records with their Born weights.
    """
    if not geom.final:
        raise ValueError(f"{geom.name} has no unmeasured chain")
    n_chain = len(geom.final)
    seps = np.arange(0, n_chain - 2 * block + 1)
    units = [(geom, depth, rho, seed, i, block, final_layer) for i in range(instances)]
    out = map_units(_shallow_unit, units, workers)
    return ShallowInfo(
        depth,
        seps,
        np.array([o[0] for o in out]),
        np.array([o[1] for o in out]),
        np.array([o[2] for o in out]),
    )


def _shallow_unit(unit):
    geom, depth, rho, seed, i, block, final_layer = unit
    circ = build_shallow_2d(geom, depth, rho, derive(seed, _SHALLOW, i), final_layer=final_layer)
    amps = chain_amplitudes(circ, geom.final)
    n_chain = len(geom.final)
    weights = np.sum(np.abs(amps) ** 2, axis=1)
    row = amps[int(np.argmax(weights))]
    chain = sv.StateVector(n_chain, row / np.linalg.norm(row))
    mixed = amps.T @ amps.conj()
    a = list(range(block))
    mi, ctl = [], []
    for x in range(0, n_chain - 2 * block + 1):
        b = list(range(block + x, 2 * block + x))
        mi.append(mutual_information_exact(chain, a, b))
        ctl.append(mutual_information_exact(mixed, a, b))
    return RM.exact_entropy_curve(chain).entropies, np.array(mi), np.array(ctl)


# -- decoding ------------------------------------------------------------------------


def circuit_seed(seed: int, geom: Geometry, index: int) -> int:
    """Seed of circuit ``index`` on ``geom``; independent of rho so circuits nest in rho."""
    return int(derive(seed, _CIRCUIT, geom.n_qubits, index).integers(2**63))


def shot_rng(seed: int, geom: Geometry, rho: float, eps: float, index: int):
    return derive(seed, _SHOTS, geom.n_qubits, _key(rho), _key(eps), index)


@dataclass
class DecodePoint:
    result: D.DecodeResult
    bits: list  # per circuit (shots, n) 0/1 readouts
    seeds: list  # per circuit build seed
    trunc_error: float = 0.0  # mean discarded weight per shot (mps backend)


def decode_point(
    geom: Geometry,
    depth: int,
    rho: float,
    n_circuits: int,
    shots: int,
    seed: int,
    eps: float = 0.0,
    backend: str = "exact",
    chi: int | None = None,
    workers: int = 1,
) -> DecodePoint:
    """Sample shots of ``n_circuits`` shallow circuits and decode them with ``backend``."""
    if backend not in ("exact", "mps"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "mps" and not chi:
        raise ValueError("the mps backend needs a bond dimension")
    units = [(geom, depth, rho, seed, i, shots, eps, backend, chi) for i in range(n_circuits)]
    out = map_units(_decode_unit, units, workers)
    decodes = [o[0] for o in out]
    labels = {"N": geom.n_qubits, "rho": float(rho)}
    if eps:
        labels["epsilon"] = float(eps)
    if backend == "mps":
        labels["chi"] = int(chi)
    res = D.zeta(decodes, rng=derive(seed, _SHOTS, geom.n_qubits, _key(rho), _key(eps)), labels=labels)
    trunc = float(np.mean(np.concatenate([o[3] for o in out]))) if backend == "mps" else 0.0
    return DecodePoint(res, [o[1] for o in out], [o[2] for o in out], trunc)


def _decode_unit(unit):
    geom, depth, rho, seed, i, shots, eps, backend, chi = unit
    cseed = circuit_seed(seed, geom, i)
    circ = build_shallow_2d(geom, depth, rho, cseed)
    schedule = D.DecodingSchedule.of(geom)
    bits = D.sample_bits(circ, schedule, shots, shot_rng(seed, geom, rho, eps, i), noise=eps or None)
    dec, trunc = decode_bits(circ, geom, bits, i, backend, chi)
    return dec, bits, cseed, trunc


def decode_bits(circ: Circuit, geom: Geometry, bits, circuit_id: int = 0, backend: str = "exact", chi=None):
    """Decode 0/1 readouts of one circuit; returns (CircuitDecode, per-shot truncation error)."""
    schedule = D.DecodingSchedule.of(geom)
    bits = np.asarray(bits, dtype=np.int8)
    if bits.ndim != 2 or bits.shape[1] != circ.n_qubits:
        raise ValueError(f"records have {bits.shape[-1]} bits, the circuit has {circ.n_qubits} qubits")
    if backend == "exact":
        return D.decode_shots(circ, schedule, bits, circuit_id), np.zeros(len(bits))
    mapped = map_2d_to_1d(circ, geom, schedule=(schedule.probe, schedule.patches))
    res = mps_sweep_decode(mapped, bits, int(chi))
    keep = ~res.rejected
    z_p = D.bits_to_signed(bits[keep, schedule.probe])
    dec = D.CircuitDecode(circuit_id, z_p, res.a_z[keep], int(res.rejected.sum()))
    return dec, res.trunc_error[keep]


@dataclass
class MPSComparison:
    chi: int
    result: D.DecodeResult
    agreement: float  # fraction of (shot, r) with tau equal to the exact decoder's
    trunc_error: float


def mps_comparison(
    geom: Geometry,
    depth: int,
    rho: float,
    n_circuits: int,
    shots: int,
    chis,
    seed: int,
    workers: int = 1,
) -> tuple[D.DecodeResult, list]:
    """Exact decode plus one MPS decode per bond dimension of the same shots."""
    units = [(geom, depth, rho, seed, i, shots, tuple(chis)) for i in range(n_circuits)]
    out = map_units(_mps_unit, units, workers)
    labels = {"N": geom.n_qubits, "rho": float(rho)}
    boot = derive(seed, _SHOTS, geom.n_qubits, _key(rho))
    exact = D.zeta([o[0] for o in out], rng=boot, labels=labels)
    comps = []
    for k, chi in enumerate(chis):
        decs = [o[1][k][0] for o in out]
        same = np.concatenate([o[1][k][1] for o in out])
        trunc = np.concatenate([o[1][k][2] for o in out])
        res = D.zeta(decs, rng=boot, labels=dict(labels, chi=int(chi)))
        comps.append(MPSComparison(int(chi), res, float(same.mean()), float(trunc.mean())))
    return exact, comps


def _mps_unit(unit):
    geom, depth, rho, seed, i, shots, chis = unit
    circ = build_shallow_2d(geom, depth, rho, circuit_seed(seed, geom, i))
    schedule = D.DecodingSchedule.of(geom)
    bits = D.sample_bits(circ, schedule, shots, shot_rng(seed, geom, rho, 0.0, i))
    exact, _ = decode_bits(circ, geom, bits, i, "exact")
    per_chi = []
    for chi in chis:
        dec, trunc = decode_bits(circ, geom, bits, i, "mps", chi)
        if dec.n_shots != exact.n_shots:
            raise RuntimeError("mps and exact decoders rejected different records")
        per_chi.append((dec, (dec.tau == exact.tau).ravel(), trunc))
    return exact, per_chi


# -- spectra and noisy Haar states ----------------------------------------------------


def level_statistics(L: int, thetas, realizations: int, seed: int, workers: int = 1) -> list:
    """LevelStats per theta."""
    units = [(L, th, realizations, seed) for th in thetas]
    return map_units(_spectral_unit, units, workers)


def _spectral_unit(unit):
    L, theta, realizations, seed = unit
    return level_spacing_ratio(L, theta, realizations, derive(seed, _SPECTRAL, L, _key(theta)))


@dataclass
class HaarPurities:
    n: int
    eps: float
    mean: np.ndarray  # (n + 1,) mean Tr[rho_A^2] over states, A = sites 0 .. n_a-1
    stderr: np.ndarray
    predicted: np.ndarray  # closed form


def noisy_haar_purities(n: int, eps: float, n_states: int, seed: int) -> HaarPurities:
    """Sampled prefix purities of depolarized Haar states against the closed form."""
    gen = derive(seed, _HAAR, n, _key(eps))
    vals = np.zeros((n_states, n + 1))
    for k in range(n_states):
        rho = noise.depolarize_all_dm(noise.density_of(noise.haar_state(n, gen)), eps).elems
        for n_a in range(n + 1):
            vals[k, n_a] = 1.0 if n_a == 0 else sv.purity(RM.reduced_density_dm(rho, list(range(n_a))))
    pred = np.array([noise.noisy_haar_purity(n, n_a, eps) for n_a in range(n + 1)])
    return HaarPurities(n, float(eps), vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(n_states), pred)


def mitigated_initial_slope(n: int, eps: float, n_states: int, seed: int) -> float:
    """Mean first step of the mitigated window-averaged S2 curve of depolarized Haar states."""
    gen = derive(seed, _HAAR, n, _key(eps), 1)
    steps = []
    for _ in range(n_states):
        rho = noise.depolarize_all_dm(noise.density_of(noise.haar_state(n, gen)), eps)
        curve = RM.mitigate(RM.exact_entropy_curve(rho))
        steps.append(curve.at(1) - curve.at(0))
    return float(np.mean(steps))
