"""Reference state-vector simulation of circuits, sampled or conditioned on a record."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mipt import statevec as sv
from mipt.circuits.ir import Circuit, Depolarize, LinearMap, Measure, MeasureReset, Postselect, Prepare, Reset, Unitary
from mipt.noise import depolarize_pauli
from mipt.rng import as_generator


@dataclass
class SimResult:
    state: sv.StateVector
    record: dict = field(default_factory=dict)
    log_prob: float = 0.0  # log of the probability of the record (conditioned mode)
    norm_sq: float = 1.0  # squared norm left by unnormalized operations (postselection, linear maps)


def _flip_to_zero(state: sv.StateVector, q: int) -> None:
    view = state.amps.reshape(-1, 2, 1 << q)
    view[:, 0, :] += view[:, 1, :]
    view[:, 1, :] = 0.0


def simulate(
    circ: Circuit,
    record: dict | None = None,
    rng=None,
    initial: sv.StateVector | None = None,
) -> SimResult:
    """Run ``circ`` from ``initial`` (default |0...0>).

    Measurements whose key appears in ``record`` are projected onto the recorded
    bit; all others are Born-sampled with ``rng`` and added to the returned
    record. Postselection and linear maps are applied without renormalizing;
    their cumulative squared norm is reported separately.
    """
    state = initial.copy() if initial is not None else sv.StateVector.zeros(circ.n_qubits)
    if state.n_qubits != circ.n_qubits:
        raise ValueError("initial state size does not match the circuit")
    fixed = dict(record or {})
    out: dict = {}
    gen = None
    log_prob = 0.0
    norm_sq = 1.0

    def generator():
        nonlocal gen
        if gen is None:
            gen = as_generator(rng)
        return gen

    def observe(q: int, key) -> int:
        nonlocal log_prob
        key = q if key is None else key
        if key in fixed:
            bit = int(fixed[key])
            p, _ = sv.project(state, q, bit)
        else:
            p1 = sv.prob_one(state, q) / state.norm_sq()
            bit = int(generator().random() < p1)
            p, _ = sv.project(state, q, bit)
        log_prob += math.log(p)
        out[key] = bit
        return bit

    for op in circ.operations():
        if isinstance(op, Unitary):
            sv.apply_linear(state, op.matrix, op.targets)
        elif isinstance(op, LinearMap):
            sv.apply_linear(state, op.matrix, op.targets)
            n2 = state.norm_sq()
            if n2 < sv.BRANCH_TOL:
                raise sv.DegenerateBranch(f"linear map {op.label} annihilated the state")
            norm_sq *= n2
            state.normalize()
        elif isinstance(op, Measure):
            observe(op.qubit, op.key)
        elif isinstance(op, MeasureReset):
            if observe(op.qubit, op.key):
                _flip_to_zero(state, op.qubit)
        elif isinstance(op, Reset):
            p1 = sv.prob_one(state, op.qubit)
            if p1 > 0:
                bit = int(generator().random() < p1)
                sv.project(state, op.qubit, bit)
                if bit:
                    _flip_to_zero(state, op.qubit)
        elif isinstance(op, Postselect):
            bit = op.bit if op.key is None else int(fixed[op.key])
            view = state.amps.reshape(-1, 2, 1 << op.qubit)
            view[:, 1 - bit, :] = 0.0
            n2 = state.norm_sq()
            if n2 < sv.BRANCH_TOL:
                raise sv.DegenerateBranch(f"postselection on qubit {op.qubit} has zero weight")
            norm_sq *= n2
            state.normalize()
        elif isinstance(op, Prepare):
            # the qubit is in a basis state; fold it onto |0> and then raise it if needed
            _flip_to_zero(state, op.qubit)
            if int(fixed[op.key]):
                view = state.amps.reshape(-1, 2, 1 << op.qubit)
                view[:, 1, :] = view[:, 0, :]
                view[:, 0, :] = 0.0
        elif isinstance(op, Depolarize):
            pauli = depolarize_pauli(op.eps, generator())
            if pauli is not None:
                sv.apply_linear(state, pauli, (op.qubit,))
        else:
            raise TypeError(f"unsupported operation {op!r}")
    return SimResult(state, out, log_prob, norm_sq)


def final_state(circ: Circuit) -> sv.StateVector:
    """Output of a measurement-free circuit."""
    return simulate(circ).state


def with_depolarizing(circ: Circuit, eps: float) -> Circuit:
    """Insert a depolarizing step on every qubit after each cycle boundary in ``circ.metadata``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    ends = set(circ.metadata.get("cycle_ends", [len(circ.moments)]))
    moments = []
    for k, moment in enumerate(circ.moments, start=1):
        moments.append(list(moment))
        if k in ends and eps > 0:
            moments.append([Depolarize(q, eps) for q in range(circ.n_qubits)])
    meta = dict(circ.metadata, epsilon=float(eps))
    meta.pop("cycle_ends", None)
    return Circuit(circ.n_qubits, moments, meta)
