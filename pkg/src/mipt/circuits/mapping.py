"""Exact rewrite of a shallow 2D circuit as a 1D monitored circuit on a sweeping register.

Qubits enter the register lazily (when the sweep first needs them) and leave
it as soon as they have no operations left, through a measure-and-reset that
frees their wire for a later qubit. Wires are grouped by the transverse
coordinate ``y`` so that a register of consecutive columns moves along ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from mipt.circuits.geometry import Geometry
from mipt.circuits.ir import Circuit, MeasureReset, Unitary, pack_moments
from mipt.circuits.lightcone import ACTIVATE, APPLY, EMIT, PROJECT, SweepPlan, plan_sweep


@dataclass(frozen=True)
class Segment:
    """Wire ``wire`` holds 2D qubit ``qubit`` during moments [start, stop]."""

    wire: int
    start: int
    stop: int
    qubit: int


@dataclass
class MappedCircuit:
    circuit: Circuit
    provenance: list  # Segment per 2D qubit
    sequence: list  # wire-level operations in execution order
    emit_after: dict = field(default_factory=dict)  # patch index -> ops executed before its emit
    final_wires: dict = field(default_factory=dict)  # kept 2D qubit -> wire
    probe_wire: int | None = None
    plan: SweepPlan | None = None

    @property
    def n_wires(self) -> int:
        return self.circuit.n_qubits

    @property
    def max_gate_range(self) -> int:
        return max((abs(op.targets[0] - op.targets[1]) for op in self.sequence if len(op.support) == 2), default=0)

    def wire_of(self, qubit: int) -> int:
        for seg in self.provenance:
            if seg.qubit == qubit:
                return seg.wire
        raise KeyError(qubit)

    def qubit_at(self, wire: int, moment: int) -> int | None:
        for seg in self.provenance:
            if seg.wire == wire and seg.start <= moment <= seg.stop:
                return seg.qubit
        return None


def column_groups(geom: Geometry, exclude=()) -> list:
    """Cumulative column patches over all qubits not in ``exclude``."""
    exclude = set(exclude)
    width = max(x for x, _ in geom.qubits) + 1
    return [
        sorted(k for k, (x, _) in enumerate(geom.qubits) if x < r and k not in exclude) for r in range(1, width + 1)
    ]


def map_2d_to_1d(circ: Circuit, geom: Geometry, schedule=None, keep=None) -> MappedCircuit:
    """Map ``circ`` on ``geom`` to a 1D monitored circuit.

    Without ``schedule`` the geometry's ``final`` qubits stay unmeasured and the
    rest are swept column by column. With a ``(probe, patches)`` schedule the
    sweep follows the decoding patches and the probe gets wire 0.
    """
    if circ.n_qubits != geom.n_qubits:
        raise ValueError("circuit and geometry sizes differ")
    if any(len(op.support) > 2 for op in circ.operations()):
        raise ValueError("only one- and two-qubit operations can be mapped")
    for op in circ.two_qubit_ops():
        (xa, ya), (xb, yb) = geom.qubits[op.support[0]], geom.qubits[op.support[1]]
        if abs(xa - xb) + abs(ya - yb) != 1:
            raise ValueError("unsupported geometry: gates must act on grid neighbors")
    if schedule is None:
        probe = None
        keep = set(geom.final if keep is None else keep)
        patches = column_groups(geom, exclude=keep)
    else:
        probe, patches = schedule
        keep = set() if keep is None else set(keep)
    plan = plan_sweep(circ, patches, probe=probe, keep=keep)
    return _realize(circ, geom, plan, probe, keep)


def _columns_in_flight(geom: Geometry, plan: SweepPlan, probe) -> int:
    """Largest number of qubits of one row that are active at the same time."""
    live: dict[int, int] = {}
    worst = 1
    for kind, q in plan.events:
        if q == probe or kind not in (ACTIVATE, PROJECT):
            continue
        row = geom.qubits[q][1]
        live[row] = live.get(row, 0) + (1 if kind == ACTIVATE else -1)
        worst = max(worst, live[row])
    return worst


def _realize(circ: Circuit, geom: Geometry, plan: SweepPlan, probe, keep) -> MappedCircuit:
    ops = list(circ.operations())
    k = _columns_in_flight(geom, plan, probe) if not keep else 2
    wire_key: list[tuple] = []  # (row, slot, serial): rows are contiguous blocks on the line
    busy: set[int] = set()
    by_key: dict[tuple, int] = {}
    holder: dict[int, int] = {}  # 2D qubit -> wire id
    steps: list = []  # ("op", index) or ("mr", qubit) in execution order
    emit_after: dict[int, int] = {}

    for kind, arg in plan.events:
        if kind == ACTIVATE:
            if arg == probe:
                key = (float("-inf"), 0)
            else:
                x, y = geom.qubits[arg]
                key = (float(y), x % k)
            w = by_key.get(key)
            if w is None or w in busy:
                # slot taken (only happens for kept qubits): open an extra wire in the same row
                w = len(wire_key)
                wire_key.append(key + (w,))
                if key not in by_key:
                    by_key[key] = w
            busy.add(w)
            holder[arg] = w
        elif kind == APPLY:
            steps.append(("op", arg))
        elif kind == PROJECT:
            steps.append(("mr", arg))
            busy.discard(holder[arg])
        elif kind == EMIT:
            emit_after[arg] = len(steps)

    order = sorted(range(len(wire_key)), key=lambda w: wire_key[w])
    # wire ids -> positions on the line, ordered by row then creation
    position = {w: p for p, w in enumerate(order)}
    where = {q: position[w] for q, w in holder.items()}

    sequence = []
    for kind, arg in steps:
        if kind == "mr":
            sequence.append(MeasureReset(where[arg], key=arg))
            continue
        op = ops[arg]
        if not isinstance(op, Unitary):
            raise ValueError(f"cannot map operation {op!r}")
        wires = tuple(where[q] for q in op.support)
        sequence.append(Unitary(op.matrix, wires, op.label, dict(op.params)))

    moments, slots = pack_moments(sequence, return_slots=True)
    meta = dict(circ.metadata, mapped_from=geom.name, n_wires=len(order))
    meta.pop("cycle_ends", None)
    return MappedCircuit(
        circuit=Circuit(len(order), moments, meta),
        provenance=_segments(sequence, slots, where),
        sequence=sequence,
        emit_after=emit_after,
        final_wires={q: where[q] for q in sorted(keep)},
        probe_wire=where.get(probe) if probe is not None else None,
        plan=plan,
    )


def _segments(sequence, slots, where) -> list:
    """One segment per 2D qubit: from the slot after the previous occupant's reset to its own."""
    resets: dict[int, list] = {}
    last: dict[int, int] = {}
    for op, slot in zip(sequence, slots):
        for w in op.support:
            last[w] = slot
        if isinstance(op, MeasureReset):
            resets.setdefault(op.qubit, []).append((slot, op.key))
    on_wire: dict[int, list] = {}
    for q, w in where.items():
        on_wire.setdefault(w, []).append(q)
    segments = []
    for w, qubits in on_wire.items():
        start = 0
        measured = set()
        for slot, q in resets.get(w, []):
            segments.append(Segment(w, start, slot, q))
            measured.add(q)
            start = slot + 1
        for q in qubits:
            if q not in measured:
                segments.append(Segment(w, start, last.get(w, start), q))
    return sorted(segments, key=lambda s: (s.wire, s.start))
