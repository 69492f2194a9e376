"""Circuit intermediate representation and JSON serialization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from mipt import gates as G


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray
    targets: tuple
    label: str = "u"
    params: dict = field(default_factory=dict)

    @property
    def support(self):
        return self.targets


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Non-unitary linear map (space-time dual gates, boundary operators)."""

    matrix: np.ndarray
    targets: tuple
    label: str = "linear"
    params: dict = field(default_factory=dict)

    @property
    def support(self):
        return self.targets


@dataclass(frozen=True)
class Measure:
    """Computational-basis measurement; ``key`` names the record slot."""

    qubit: int
    key: object = None

    @property
    def support(self):
        return (self.qubit,)


@dataclass(frozen=True)
class Reset:
    qubit: int

    @property
    def support(self):
        return (self.qubit,)


@dataclass(frozen=True)
class MeasureReset:
    qubit: int
    key: object = None

    @property
    def support(self):
        return (self.qubit,)


@dataclass(frozen=True)
class Postselect:
    """Projection onto a basis state (unnormalized contraction).

    With a ``key`` the bit is read from the record instead of ``bit``.
    """

    qubit: int
    bit: int = 0
    key: object = None

    @property
    def support(self):
        return (self.qubit,)


@dataclass(frozen=True)
class Prepare:
    """Re-prepare a qubit that sits in a basis state as ``|record[key]>``."""

    qubit: int
    key: object = None

    @property
    def support(self):
        return (self.qubit,)


@dataclass(frozen=True)
class Depolarize:
    """Single-qubit depolarizing channel of strength ``eps``, unraveled into random Paulis."""

    qubit: int
    eps: float

    @property
    def support(self):
        return (self.qubit,)


Operation = Union[Unitary, LinearMap, Measure, Reset, MeasureReset, Postselect, Prepare, Depolarize]


@dataclass
class Circuit:
    n_qubits: int
    moments: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, moment in enumerate(self.moments):
            seen = set()
            for op in moment:
                for q in op.support:
                    if not 0 <= q < self.n_qubits:
                        raise ValueError(f"moment {k}: qubit {q} out of range")
                    if q in seen:
                        raise ValueError(f"moment {k}: overlapping supports on qubit {q}")
                    seen.add(q)

    def operations(self):
        for moment in self.moments:
            yield from moment

    def two_qubit_ops(self):
        return [op for op in self.operations() if len(op.support) == 2]

    def count(self, kind) -> int:
        return sum(isinstance(op, kind) for op in self.operations())

    @property
    def depth(self) -> int:
        return len(self.moments)


def pack_moments(ops, return_slots: bool = False):
    """ASAP-schedule a sequence of operations into moments, preserving per-qubit order."""
    moments: list[list] = []
    slots: list[int] = []
    frontier: dict[int, int] = {}
    for op in ops:
        k = max((frontier.get(q, -1) for q in op.support), default=-1) + 1
        if k == len(moments):
            moments.append([])
        moments[k].append(op)
        slots.append(k)
        for q in op.support:
            frontier[q] = k
    return (moments, slots) if return_slots else moments


# ---------------------------------------------------------------- serialization

_SIG = 12


def _num(x: float) -> float:
    return float(f"{x:.{_SIG}g}")


def _matrix_payload(m: np.ndarray) -> list:
    # raw matrices keep full precision so that round trips are exact
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _rebuild_gate(label: str, params: dict, matrix) -> np.ndarray:
    if matrix is not None:
        return np.array([[complex(a, b) for a, b in row] for row in matrix])
    if label in ("fsim", "iswap_like"):
        return G.fsim(G.FsimParams(**params)).matrix
    if label == "z_pow":
        return G.z_pow(params["h"]).matrix
    if "index" in params:
        return G.sq_gate_by_index(params["index"]).matrix
    raise ValueError(f"cannot rebuild gate {label!r} without a matrix")


_PARAM_GATES = {"fsim", "iswap_like", "z_pow"}


def op_to_dict(op) -> dict:
    if isinstance(op, (Unitary, LinearMap)):
        d = {
            "kind": "unitary" if isinstance(op, Unitary) else "linear",
            "label": op.label,
            "targets": list(op.targets),
            "params": {k: _num(v) if isinstance(v, float) else v for k, v in op.params.items()},
        }
        if not (op.label in _PARAM_GATES or "index" in op.params):
            d["matrix"] = _matrix_payload(op.matrix)
        return d
    if isinstance(op, Measure):
        return {"kind": "measure", "qubit": op.qubit, "key": op.key}
    if isinstance(op, MeasureReset):
        return {"kind": "measure_reset", "qubit": op.qubit, "key": op.key}
    if isinstance(op, Reset):
        return {"kind": "reset", "qubit": op.qubit}
    if isinstance(op, Postselect):
        return {"kind": "postselect", "qubit": op.qubit, "bit": op.bit, "key": op.key}
    if isinstance(op, Prepare):
        return {"kind": "prepare", "qubit": op.qubit, "key": op.key}
    if isinstance(op, Depolarize):
        return {"kind": "depolarize", "qubit": op.qubit, "eps": _num(op.eps)}
    raise TypeError(f"unknown operation {op!r}")


def op_from_dict(d: dict):
    kind = d["kind"]
    if kind in ("unitary", "linear"):
        m = _rebuild_gate(d["label"], d.get("params", {}), d.get("matrix"))
        cls = Unitary if kind == "unitary" else LinearMap
        return cls(m, tuple(d["targets"]), d["label"], dict(d.get("params", {})))
    if kind == "measure":
        return Measure(d["qubit"], d.get("key"))
    if kind == "measure_reset":
        return MeasureReset(d["qubit"], d.get("key"))
    if kind == "reset":
        return Reset(d["qubit"])
    if kind == "postselect":
        return Postselect(d["qubit"], d["bit"], d.get("key"))
    if kind == "prepare":
        return Prepare(d["qubit"], d.get("key"))
    if kind == "depolarize":
        return Depolarize(d["qubit"], d["eps"])
    raise ValueError(f"unknown operation kind {kind!r}")


def circuit_to_json(circ: Circuit) -> str:
    meta = {k: (_num(v) if isinstance(v, float) else v) for k, v in circ.metadata.items()}
    payload = {
        "n_qubits": circ.n_qubits,
        "metadata": meta,
        "moments": [[op_to_dict(op) for op in moment] for moment in circ.moments],
    }
    return json.dumps(payload, sort_keys=True)


def circuit_from_json(text: str) -> Circuit:
    d = json.loads(text)
    moments = [[op_from_dict(o) for o in moment] for moment in d["moments"]]
    return Circuit(d["n_qubits"], moments, d.get("metadata", {}))


def angle_close(a: float, b: float, tol: float = 1e-11) -> bool:
    return abs(math.remainder(a - b, 2 * math.pi)) < tol
