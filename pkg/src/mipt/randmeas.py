"""Renyi-2 purities and mutual information from randomized measurements.

Each instance rotates every qubit by an independent CUE unitary and records
bitstring counts. For a subsystem A of ``N_A`` qubits,

    Tr rho_A^2 = 2^{N_A} sum_{s,s'} (-2)^{-H(s,s')} <P(s) P(s')>_U

where ``H`` is the Hamming distance on A. The product moment is estimated
without bias per instance (a U-statistic over distinct shots); error bars come
from a jackknife over instances.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from mipt import kernels
from mipt import statevec as sv
from mipt.gates import haar_unitary
from mipt.rng import as_generator

_HAMMING_KERNEL = np.array([[1.0, -0.5], [-0.5, 1.0]])


@dataclass
class Instance:
    seed: int
    counts: dict  # bitstring (int, qubit k = bit k) -> count
    shots: int

    def __post_init__(self):
        self.counts = {int(k): int(v) for k, v in self.counts.items() if int(v)}
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the shot total")


@dataclass
class RandomizedDataset:
    n_qubits: int
    instances: list = field(default_factory=list)

    def __post_init__(self):
        for inst in self.instances:
            if inst.counts and max(inst.counts) >= 1 << self.n_qubits:
                raise ValueError("bitstring longer than n_qubits")

    def histograms(self) -> np.ndarray:
        """Dense (instances, 2^n) count array."""
        out = np.zeros((len(self.instances), 1 << self.n_qubits))
        for i, inst in enumerate(self.instances):
            for s, c in inst.counts.items():
                out[i, s] = c
        return out


@dataclass
class EntropyCurve:
    points: list  # (volume, S2 bits, stderr), volumes ascending from 0
    mitigated: bool = False

    @property
    def volumes(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def entropies(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def errors(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])

    def at(self, volume: int) -> float:
        for v, s, _ in self.points:
            if v == volume:
                return s
        raise KeyError(volume)


# ---------------------------------------------------------------- sampling


def sample_randomized(state: sv.StateVector, n_instances: int, shots: int, rng, unitary_source=None) -> RandomizedDataset:
    """Rotate each qubit by a fresh CUE unitary and Born-sample ``shots`` bitstrings per instance.

    ``unitary_source(rng, qubit)`` overrides the CUE draw (used for fixed-basis checks).
    """
    if shots < 1 or n_instances < 1:
        raise ValueError("need at least one instance and one shot")
    master = as_generator(rng)
    instances = []
    for _ in range(n_instances):
        seed = int(master.integers(2**63))
        gen = np.random.default_rng(seed)
        psi = state.amps.copy().reshape(1, -1)
        for q in range(state.n_qubits):
            u = haar_unitary(2, gen) if unitary_source is None else np.asarray(unitary_source(gen, q), dtype=complex)
            kernels.apply_1q(psi, np.ascontiguousarray(u), q)
        probs = np.abs(psi[0]) ** 2
        counts = gen.multinomial(shots, probs / probs.sum())
        nz = np.flatnonzero(counts)
        instances.append(Instance(seed, dict(zip(nz.tolist(), counts[nz].tolist())), shots))
    return RandomizedDataset(state.n_qubits, instances)


# ---------------------------------------------------------------- estimation


def _marginal(hist: np.ndarray, n: int, subsystem) -> np.ndarray:
    """Marginal counts on ``subsystem`` as a tensor with one length-2 axis per qubit."""
    t = hist.reshape((hist.shape[0],) + (2,) * n)
    axes = [1 + n - 1 - q for q in subsystem]  # tensor axis of qubit q
    rest = tuple(a for a in range(1, n + 1) if a not in axes)
    m = t.sum(axis=rest) if rest else t
    # reorder the kept axes to follow the subsystem order
    kept_sorted = sorted(axes)
    perm = [0] + [1 + kept_sorted.index(a) for a in axes]
    return np.transpose(m, perm)


def instance_purities(data: RandomizedDataset, subsystem, hist: np.ndarray | None = None) -> np.ndarray:
    """Unbiased purity estimate of ``subsystem`` for every instance."""
    subsystem = [int(q) for q in subsystem]
    if not subsystem:
        raise ValueError("subsystem must be non-empty")
    if len(set(subsystem)) != len(subsystem) or max(subsystem) >= data.n_qubits or min(subsystem) < 0:
        raise ValueError("subsystem must be distinct qubits of the dataset")
    shots = np.array([inst.shots for inst in data.instances], dtype=float)
    if np.any(shots < 2):
        raise ValueError("every instance needs at least two shots")
    hist = data.histograms() if hist is None else hist
    m = _marginal(hist, data.n_qubits, subsystem)
    k = m
    for axis in range(1, m.ndim):
        k = np.moveaxis(np.tensordot(k, _HAMMING_KERNEL, axes=([axis], [0])), -1, axis)
    quad = (m * k).reshape(m.shape[0], -1).sum(axis=1)
    pairs = (quad - shots) / (shots * (shots - 1))
    return 2.0 ** len(subsystem) * pairs


def jackknife(samples: np.ndarray, stat) -> tuple[float, float]:
    """Statistic of the instance mean and its jackknife standard error over rows."""
    samples = np.asarray(samples, dtype=float)
    k = samples.shape[0]
    value = float(stat(samples.mean(axis=0)))
    if k < 2:
        return value, float("nan")
    total = samples.sum(axis=0)
    loo = np.array([stat((total - samples[i]) / (k - 1)) for i in range(k)])
    err = math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2))
    return value, float(err)


def estimate_purity(data: RandomizedDataset, subsystem) -> tuple[float, float]:
    """Purity of ``subsystem`` averaged over instances, with a jackknife error (nan for one instance)."""
    return jackknife(instance_purities(data, subsystem), lambda x: x)


def _entropy(purity: float, n_a: int) -> float:
    # finite-sample estimates can dip below the physical floor 2^{-n_a}; clamp there
    return -math.log2(max(purity, 2.0**-n_a))


def estimate_entropy(data: RandomizedDataset, subsystem) -> tuple[float, float]:
    n_a = len(list(subsystem))
    return jackknife(instance_purities(data, subsystem), lambda x: _entropy(x, n_a))


def mutual_information(data: RandomizedDataset, a, b) -> tuple[float, float]:
    """I2(A:B) = S2(A) + S2(B) - S2(AB) from one dataset, with a jackknife error."""
    a, b = list(a), list(b)
    if set(a) & set(b):
        raise ValueError("subsystems must be disjoint")
    hist = data.histograms()
    cols = np.stack(
        [instance_purities(data, a, hist), instance_purities(data, b, hist), instance_purities(data, a + b, hist)],
        axis=1,
    )

    def info(x):
        return _entropy(x[0], len(a)) + _entropy(x[1], len(b)) - _entropy(x[2], len(a) + len(b))

    return jackknife(cols, info)


def windows(n: int, volume: int) -> list:
    return [list(range(start, start + volume)) for start in range(n - volume + 1)]


def entropy_curve(data: RandomizedDataset, sites=None) -> EntropyCurve:
    """S2 versus volume, each volume averaged over all contiguous windows of ``sites``."""
    sites = list(range(data.n_qubits)) if sites is None else list(sites)
    hist = data.histograms()
    points = [(0, 0.0, 0.0)]
    for v in range(1, len(sites) + 1):
        subs = [[sites[i] for i in w] for w in windows(len(sites), v)]
        cols = np.stack([instance_purities(data, s, hist) for s in subs], axis=1)
        s2, err = jackknife(cols, lambda x: float(np.mean([_entropy(p, v) for p in x])))
        points.append((v, s2, err))
    return EntropyCurve(points)


def exact_entropy_curve(state, sites=None) -> EntropyCurve:
    """Window-averaged S2 of a state vector or density matrix (no sampling error)."""
    if isinstance(state, sv.StateVector):
        n = state.n_qubits
        reduce = lambda sub: sv.reduced_density(state, sub)  # noqa: E731
    else:
        m = np.asarray(getattr(state, "elems", state))
        n = int(round(math.log2(m.shape[0])))
        reduce = lambda sub: reduced_density_dm(m, sub)  # noqa: E731
    sites = list(range(n)) if sites is None else list(sites)
    points = [(0, 0.0, 0.0)]
    for v in range(1, len(sites) + 1):
        vals = [sv.renyi2(reduce([sites[i] for i in w])) for w in windows(len(sites), v)]
        points.append((v, float(np.mean(vals)), 0.0))
    return EntropyCurve(points)


def reduced_density_dm(m: np.ndarray, subsystem) -> sv.DensityMatrix:
    """Partial trace of a density matrix onto ``subsystem`` (first listed = least significant)."""
    n = int(round(math.log2(m.shape[0])))
    t = np.asarray(m).reshape((2,) * (2 * n))
    keep = [n - 1 - q for q in reversed(list(subsystem))]
    rest = [a for a in range(n) if a not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n]) if 2 * n <= 26 else None
    if col is None:
        raise ValueError("density matrix too large")
    for a in rest:
        col[a] = row[a]
    out = "".join(row[a] for a in keep) + "".join(col[a] for a in keep)
    r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    k = len(keep)
    return sv.DensityMatrix(k, r.reshape(1 << k, 1 << k))


# ---------------------------------------------------------------- mitigation


def mitigate(curve: EntropyCurve) -> EntropyCurve:
    """Subtract the linear background (vol / N) S2(whole) with N the largest volume."""
    n = max(v for v, _, _ in curve.points)
    if n == 0:
        raise ValueError("curve lacks the whole-system point")
    whole = curve.at(n)
    points = [(v, s - (v / n) * whole, e) for v, s, e in curve.points]
    return replace(curve, points=points, mitigated=True)


# ---------------------------------------------------------------- persistence


def write_dataset(data: RandomizedDataset, path) -> None:
    with open(path, "w") as fh:
        for inst in data.instances:
            row = {
                "n_qubits": data.n_qubits,
                "seed": inst.seed,
                "shots": inst.shots,
                "counts": {str(k): v for k, v in sorted(inst.counts.items())},
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_dataset(path, n_qubits: int | None = None) -> RandomizedDataset:
    instances = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            n_qubits = row.get("n_qubits", n_qubits)
            instances.append(Instance(row["seed"], row["counts"], row["shots"]))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}:{lineno}: bad instance record ({exc})") from None
    if n_qubits is None:
        raise ValueError("n_qubits is not recorded in the file; pass it explicitly")
    return RandomizedDataset(int(n_qubits), instances)
