"""Probe decoding: shots, record-conditioned lightcone sweeps and the zeta order parameter.

A sweep keeps a batch of wavefunctions (one row per shot) on the *active*
qubits only. It replays the events of :func:`mipt.circuits.plan_sweep`:
qubits join in |0>, gates act once all their qubits are active, finished
patch qubits are projected onto their recorded bit and dropped, and the
probe's Bloch z component is read out every time a patch is complete.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mipt import kernels
from mipt.circuits.ir import Circuit, Depolarize, Unitary
from mipt.circuits.lightcone import ACTIVATE, APPLY, EMIT, PROJECT, plan_sweep
from mipt.circuits.sim import with_depolarizing
from mipt.noise import DepolarizingChannel, draw_paulis, pauli_matrix
from mipt.rng import as_generator
from mipt.statevec import BRANCH_TOL, DegenerateBranch

N_BOOTSTRAP = 200


@dataclass(frozen=True)
class DecodingSchedule:
    """Probe qubit and nested decoding patches ``D_0 = {} < D_1 < ... < D_rmax``."""

    probe: int
    patches: tuple

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(tuple(sorted(int(q) for q in p)) for p in self.patches))
        if not self.patches or self.patches[0]:
            raise ValueError("D_0 must be empty")
        for a, b in zip(self.patches, self.patches[1:]):
            if not set(a) < set(b):
                raise ValueError("patches are not strictly nested")
        if self.probe in self.patches[-1]:
            raise ValueError("the probe may not sit in a patch")

    @property
    def r_max(self) -> int:
        return len(self.patches) - 1

    def check(self, n_qubits: int) -> None:
        if set(self.patches[-1]) | {self.probe} != set(range(n_qubits)):
            raise ValueError("last patch plus probe must cover every qubit")

    @classmethod
    def of(cls, geom) -> "DecodingSchedule":
        return cls(geom.probe, geom.patches)


@dataclass(frozen=True)
class ShotRecord:
    """One shot: probe outcome ``z_p`` and outcomes ``m`` (±1) of every qubit.

    ``m`` is indexed by qubit; the probe's entry repeats ``z_p`` so that the
    full bitstring can be re-read with another probe.
    """

    circuit_id: int
    z_p: int
    m: tuple

    def __post_init__(self):
        if self.z_p not in (-1, 1) or any(b not in (-1, 1) for b in self.m):
            raise ValueError("shot bits must be +1 or -1")


def bits_to_signed(bits: np.ndarray) -> np.ndarray:
    """0/1 outcomes to z = 1 - 2b."""
    return 1 - 2 * np.asarray(bits, dtype=np.int8)


def signed_to_bits(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    if np.any((z != 1) & (z != -1)):
        raise ValueError("signed bits must be +1 or -1")
    return ((1 - z) // 2).astype(np.int8)


# probe expectations below this are roundoff of an exact zero
ZERO_TOL = 1e-10


def sign(a: np.ndarray) -> np.ndarray:
    """Sign with sign(0) = +1, so decoding is deterministic; |a| <= ZERO_TOL counts as 0."""
    return np.where(np.asarray(a) < -ZERO_TOL, -1, 1).astype(np.int8)


# -- batched sweep engine ---------------------------------------------------------------


class _Register:
    """Rows of wavefunctions on the active qubits; qubit -> local bit position."""

    def __init__(self, n_rows: int):
        self.amps = np.ones((n_rows, 1), dtype=complex)
        self.pos: dict[int, int] = {}
        self.dead = np.zeros(n_rows, dtype=bool)
        self.peak = 0

    @property
    def size(self) -> int:
        return len(self.pos)

    def activate(self, q: int) -> None:
        self.amps = np.concatenate([self.amps, np.zeros_like(self.amps)], axis=1)
        self.pos[q] = len(self.pos)
        self.peak = max(self.peak, len(self.pos))

    def apply(self, matrix: np.ndarray, qubits, rows=None) -> None:
        m = np.ascontiguousarray(matrix, dtype=complex)
        target = self.amps if rows is None else np.ascontiguousarray(self.amps[rows])
        if len(qubits) == 1:
            kernels.apply_1q(target, m, self.pos[qubits[0]])
        else:
            kernels.apply_2q(target, m, self.pos[qubits[0]], self.pos[qubits[1]])
        if rows is not None:
            self.amps[rows] = target

    def p_one(self, q: int) -> np.ndarray:
        return kernels.prob_one(self.amps, self.pos[q])

    def project(self, q: int, bits: np.ndarray) -> None:
        """Keep branch ``bits[row]`` of ``q`` per row and renormalize; impossible rows die."""
        p1 = self.p_one(q)
        p = np.where(bits == 1, p1, 1.0 - p1)
        bad = p < BRANCH_TOL
        if bad.any():
            self.dead |= bad
            bits = np.where(bad, 1 - bits, bits)
            p = np.where(bad, 1.0 - p, p)
        p_safe = np.where(p < BRANCH_TOL, 1.0, p)  # rows with no weight left in either branch
        self.amps = kernels.take_branch(self.amps, self.pos[q], bits)
        self.amps /= np.sqrt(p_safe)[:, None]
        gone = self.pos.pop(q)
        for k, v in self.pos.items():
            if v > gone:
                self.pos[k] = v - 1

    def bloch_z(self, q: int) -> np.ndarray:
        return 1.0 - 2.0 * self.p_one(q)


def _apply_event_op(reg: _Register, op, rng) -> None:
    if isinstance(op, Unitary):
        reg.apply(op.matrix, op.targets)
    elif isinstance(op, Depolarize):
        labels = draw_paulis(op.eps, reg.amps.shape[0], rng)
        for label in (1, 2, 3):
            rows = np.flatnonzero(labels == label)
            if len(rows):
                reg.apply(pauli_matrix(label), (op.qubit,), rows)
    else:
        raise ValueError(f"cannot sweep operation {op!r}")


@dataclass
class SweepResult:
    """Per shot and radius: simulated probe Bloch z and the decoded bit tau."""

    a_z: np.ndarray  # (shots, r_max + 1)
    rejected: np.ndarray  # (shots,) bool: record has probability zero
    peak_active: int
    bits: np.ndarray | None = None  # (shots, n) 0/1, filled when sampling

    @property
    def tau(self) -> np.ndarray:
        return sign(self.a_z)


def _sweep(circ: Circuit, schedule: DecodingSchedule, n_rows: int, records=None, rng=None) -> SweepResult:
    """Shared engine: project onto ``records`` (0/1, shape (rows, n)) or Born-sample them."""
    schedule.check(circ.n_qubits)
    plan = plan_sweep(circ, schedule.patches, probe=schedule.probe)
    ops = list(circ.operations())
    sampling = records is None
    gen = as_generator(rng) if (sampling or any(isinstance(o, Depolarize) for o in ops)) else None
    bits = np.zeros((n_rows, circ.n_qubits), dtype=np.int8) if sampling else np.asarray(records, dtype=np.int8)
    reg = _Register(n_rows)
    a_z = np.zeros((n_rows, schedule.r_max + 1))
    for kind, arg in plan.events:
        if kind == ACTIVATE:
            reg.activate(arg)
        elif kind == APPLY:
            _apply_event_op(reg, ops[arg], gen)
        elif kind == PROJECT:
            if sampling:
                bits[:, arg] = gen.random(n_rows) < reg.p_one(arg)
            reg.project(arg, bits[:, arg])
        elif kind == EMIT:
            a_z[:, arg] = reg.bloch_z(schedule.probe)
    if sampling:
        bits[:, schedule.probe] = gen.random(n_rows) < reg.p_one(schedule.probe)
    return SweepResult(a_z, reg.dead.copy(), reg.peak, bits if sampling else None)


def conditional_bloch_sweep(circ: Circuit, schedule: DecodingSchedule, records) -> SweepResult:
    """Decode a batch of records (0/1 array of shape (shots, n); the probe column is ignored).

    Rows whose record has probability zero are flagged in ``rejected``; their
    Bloch values are meaningless.
    """
    records = np.atleast_2d(np.asarray(records, dtype=np.int8))
    if records.shape[1] != circ.n_qubits:
        raise ValueError("record length does not match the circuit")
    if np.any((records != 0) & (records != 1)):
        raise ValueError("records must hold 0/1 bits")
    return _sweep(circ, schedule, records.shape[0], records=records)


def decode_record(circ: Circuit, schedule: DecodingSchedule, record) -> list:
    """Single record: list over r of ``(a_z_sim, tau_m)``; raises DegenerateBranch if impossible."""
    res = conditional_bloch_sweep(circ, schedule, record)
    if res.rejected[0]:
        raise DegenerateBranch("record has probability zero")
    return [(float(a), int(t)) for a, t in zip(res.a_z[0], res.tau[0])]


def sweep_peak(circ: Circuit, schedule: DecodingSchedule) -> int:
    """Largest active subsystem of the sweep (no amplitudes are touched)."""
    return plan_sweep(circ, schedule.patches, probe=schedule.probe).peak_active


# -- shots ----------------------------------------------------------------------------


def sample_bits(circ: Circuit, probe_schedule: DecodingSchedule, n_shots: int, rng, noise=None) -> np.ndarray:
    """Born-sampled 0/1 outcomes of every qubit, shape (shots, n).

    Qubits are sampled one at a time in sweep order from the state conditioned
    on earlier outcomes, which reproduces the joint distribution of a readout
    of the whole register. ``noise`` adds a depolarizing trajectory step on
    every qubit after each cycle.
    """
    if n_shots < 1:
        raise ValueError("need at least one shot")
    if noise is not None:
        eps = noise.epsilon if isinstance(noise, DepolarizingChannel) else float(noise)
        circ = with_depolarizing(circ, eps)
    return _sweep(circ, probe_schedule, n_shots, rng=rng).bits


def run_shots(circ: Circuit, probe, n_shots: int, rng, noise=None, circuit_id: int = 0, schedule=None) -> list:
    """Shot records for ``circ`` read out on every qubit; ``probe`` picks ``z_p``."""
    if schedule is None:
        others = tuple(q for q in range(circ.n_qubits) if q != probe)
        schedule = DecodingSchedule(probe, ((), others))
    bits = sample_bits(circ, schedule, n_shots, rng, noise)
    z = bits_to_signed(bits)
    return [ShotRecord(circuit_id, int(row[probe]), tuple(int(b) for b in row)) for row in z]


def shots_to_arrays(shots: list) -> tuple[np.ndarray, np.ndarray]:
    """(circuit ids, 0/1 bit matrix) for a list of ShotRecords."""
    ids = np.array([s.circuit_id for s in shots], dtype=np.int64)
    bits = signed_to_bits(np.array([s.m for s in shots], dtype=np.int8))
    return ids, bits


# -- order parameter ----------------------------------------------------------------


@dataclass
class CircuitDecode:
    """Decoded shots of one circuit instance."""

    circuit_id: int
    z_p: np.ndarray  # (shots,) ±1
    a_z: np.ndarray  # (shots, r_max + 1)
    n_rejected: int = 0
    tau: np.ndarray | None = None  # override decoded bits (e.g. injected sign flips)

    def __post_init__(self):
        if self.tau is None:
            self.tau = sign(self.a_z)

    @property
    def n_shots(self) -> int:
        return len(self.z_p)


def decode_shots(circ: Circuit, schedule: DecodingSchedule, bits: np.ndarray, circuit_id: int = 0) -> CircuitDecode:
    """Decode 0/1 readouts of one circuit; impossible records are dropped and counted."""
    res = conditional_bloch_sweep(circ, schedule, bits)
    keep = ~res.rejected
    z_p = bits_to_signed(np.asarray(bits)[keep, schedule.probe])
    return CircuitDecode(circuit_id, z_p, res.a_z[keep], int(res.rejected.sum()))


def inject_sign_flips(dec: CircuitDecode, q: float, rng) -> CircuitDecode:
    """Flip each decoded bit independently with probability ``1 - q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    flip = as_generator(rng).random(dec.tau.shape) >= q
    tau = np.where(flip, -dec.tau, dec.tau).astype(np.int8)
    return CircuitDecode(dec.circuit_id, dec.z_p, dec.a_z, dec.n_rejected, tau)


def s_proxy(zeta) -> np.ndarray:
    """Probe entropy proxy -log2[(1 + zeta^2) / 2]."""
    z = np.asarray(zeta, dtype=float)
    return -np.log2((1.0 + z * z) / 2.0)


@dataclass
class DecodeResult:
    zeta: np.ndarray
    zeta_sim: np.ndarray
    stderr_zeta: np.ndarray
    stderr_zeta_sim: np.ndarray
    zeta_tilde: np.ndarray
    stderr_zeta_tilde: np.ndarray
    n_shots: int
    n_circuits: int
    n_rejected: int = 0
    mitigation_flagged: bool = False
    labels: dict = field(default_factory=dict)  # e.g. N, rho

    @property
    def radii(self) -> np.ndarray:
        return np.arange(len(self.zeta))

    @property
    def r_max(self) -> int:
        return len(self.zeta) - 1

    @property
    def s_proxy(self) -> np.ndarray:
        return s_proxy(self.zeta)

    @property
    def s_proxy_sim(self) -> np.ndarray:
        return s_proxy(self.zeta_sim)

    @property
    def s_proxy_tilde(self) -> np.ndarray:
        return s_proxy(self.zeta_tilde)

    def rows(self) -> list[dict]:
        out = []
        for r in self.radii:
            row = dict(self.labels)
            row.update(
                r=int(r),
                zeta=self.zeta[r],
                zeta_sim=self.zeta_sim[r],
                zeta_tilde=self.zeta_tilde[r],
                s_proxy=self.s_proxy[r],
                s_proxy_sim=self.s_proxy_sim[r],
                s_proxy_tilde=self.s_proxy_tilde[r],
                stderr_zeta=self.stderr_zeta[r],
                stderr_zeta_sim=self.stderr_zeta_sim[r],
                stderr_zeta_tilde=self.stderr_zeta_tilde[r],
                n_shots=self.n_shots,
                n_circuits=self.n_circuits,
                n_rejected=self.n_rejected,
            )
            out.append(row)
        return out


def _pooled(sums: np.ndarray, counts: np.ndarray) -> np.ndarray:
    return sums.sum(axis=0) / counts.sum()


def zeta(decodes: list, rng=0, n_boot: int = N_BOOTSTRAP, labels=None) -> DecodeResult:
    """zeta(r) = 2 <z_p tau(r)> and zeta_sim(r) = 2 <|a_z(r)|> pooled over all shots.

    Error bars bootstrap over circuit instances (over shots when there is only
    one instance). ``zeta_tilde = zeta / zeta(r_max)`` is NaN and flagged when
    ``zeta(r_max)`` is zero within its error bar.
    """
    decodes = [d for d in decodes if d.n_shots]
    if not decodes:
        raise ValueError("no decodable shots")
    if len(decodes) == 1:
        d = decodes[0]
        units = [
            CircuitDecode(d.circuit_id, d.z_p[k : k + 1], d.a_z[k : k + 1], 0, d.tau[k : k + 1])
            for k in range(d.n_shots)
        ]
    else:
        units = decodes
    counts = np.array([u.n_shots for u in units], dtype=float)
    corr = np.array([2.0 * (u.z_p[:, None] * u.tau).sum(axis=0) for u in units])
    simv = np.array([2.0 * np.abs(u.a_z).sum(axis=0) for u in units])

    z = _pooled(corr, counts)
    zs = _pooled(simv, counts)
    gen = as_generator(rng)
    picks = gen.integers(len(units), size=(n_boot, len(units)))
    boot_z = np.array([_pooled(corr[p], counts[p]) for p in picks])
    boot_s = np.array([_pooled(simv[p], counts[p]) for p in picks])
    err_z = boot_z.std(axis=0, ddof=1) if len(units) > 1 else np.full_like(z, np.nan)
    err_s = boot_s.std(axis=0, ddof=1) if len(units) > 1 else np.full_like(z, np.nan)

    flagged = bool(z[-1] == 0.0 or abs(z[-1]) <= err_z[-1])
    if flagged:
        zt = np.full_like(z, np.nan)
        err_t = np.full_like(z, np.nan)
    else:
        zt = z / z[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = boot_z / boot_z[:, -1:]
        ratios = ratios[np.isfinite(ratios).all(axis=1)]
        err_t = ratios.std(axis=0, ddof=1) if len(ratios) > 1 else np.full_like(z, np.nan)
    return DecodeResult(
        zeta=z,
        zeta_sim=zs,
        stderr_zeta=err_z,
        stderr_zeta_sim=err_s,
        zeta_tilde=zt,
        stderr_zeta_tilde=err_t,
        n_shots=int(sum(d.n_shots for d in decodes)),
        n_circuits=len(decodes),
        n_rejected=int(sum(d.n_rejected for d in decodes)),
        mitigation_flagged=flagged,
        labels=dict(labels or {}),
    )


# -- noise as an order parameter and finite-size scaling -----------------------------


@dataclass
class NoiseFit:
    c: float
    b: float
    stderr_b: float
    disentangling: bool  # b consistent with 1: zeta(r_max) does not decay with N


def noise_as_probe(results: dict, tol: float = 0.005) -> dict:
    """Fit ``zeta(r_max) ~ c b^N`` per rho.

    ``results`` maps ``(N, rho)`` to a DecodeResult. Returns ``{rho: NoiseFit}``.
    A rho is flagged disentangling when ``|b - 1| <= max(tol, 2 stderr_b)``.
    """
    by_rho: dict = {}
    for (n, rho), res in results.items():
        by_rho.setdefault(rho, []).append((n, res.zeta[-1], res.stderr_zeta[-1]))
    out = {}
    for rho, pts in sorted(by_rho.items()):
        pts.sort()
        n = np.array([p[0] for p in pts], dtype=float)
        zr = np.array([p[1] for p in pts])
        err = np.array([p[2] for p in pts])
        if len(n) < 2 or np.any(zr <= 0):
            raise ValueError(f"rho={rho}: need at least two sizes with positive zeta(r_max)")
        y = np.log(zr)
        w = np.ones_like(y)
        ok = np.isfinite(err) & (err > 0)
        if ok.all():
            w = zr / err  # 1 / stderr of log zeta
        a = np.vstack([np.ones_like(n), n]).T * w[:, None]
        coef, *_ = np.linalg.lstsq(a, y * w, rcond=None)
        cov = np.linalg.pinv(a.T @ a)
        if not ok.all() and len(n) > 2:
            resid = y - coef[0] - coef[1] * n
            cov *= resid @ resid / (len(n) - 2)
        b = math.exp(coef[1])
        err_b = b * math.sqrt(max(cov[1, 1], 0.0))
        out[rho] = NoiseFit(math.exp(coef[0]), b, err_b, abs(b - 1.0) <= max(tol, 2 * err_b))
    return out


@dataclass
class Collapse:
    x: dict  # N -> scaled coordinates
    y: dict  # N -> values
    residual: float


def scaling_collapse(data: dict, rho_c: float, nu: float, n_grid: int = 64) -> Collapse:
    """Rescale ``data = {N: (rhos, values)}`` to ``x = (rho - rho_c) N^{1/(2 nu)}``.

    The residual sums, over pairs of sizes, the mean squared difference of the
    two linearly interpolated curves on their common x range.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    xs, ys = {}, {}
    for n, (rho, val) in data.items():
        order = np.argsort(rho)
        xs[n] = (np.asarray(rho, dtype=float)[order] - rho_c) * float(n) ** (1.0 / (2.0 * nu))
        ys[n] = np.asarray(val, dtype=float)[order]
    sizes = sorted(xs)
    residual = 0.0
    for i, a in enumerate(sizes):
        for b in sizes[i + 1 :]:
            lo = max(xs[a][0], xs[b][0])
            hi = min(xs[a][-1], xs[b][-1])
            if hi <= lo:
                return Collapse(xs, ys, math.inf)
            grid = np.linspace(lo, hi, n_grid)
            diff = np.interp(grid, xs[a], ys[a]) - np.interp(grid, xs[b], ys[b])
            residual += float(np.mean(diff**2))
    return Collapse(xs, ys, residual)


def best_rho_c(data: dict, nu: float, grid) -> tuple[float, np.ndarray]:
    """Grid point minimizing the collapse residual, and all residuals."""
    res = np.array([scaling_collapse(data, rc, nu).residual for rc in grid])
    return float(np.asarray(grid)[int(np.argmin(res))]), res


def crossings(rho, upper, lower) -> list[float]:
    """rho values where two sampled curves cross (linear interpolation between grid points)."""
    rho = np.asarray(rho, dtype=float)
    d = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    out = []
    for k in range(len(d) - 1):
        if d[k] == 0:
            out.append(float(rho[k]))
        elif d[k] * d[k + 1] < 0:
            out.append(float(rho[k] + (rho[k + 1] - rho[k]) * d[k] / (d[k] - d[k + 1])))
    if len(d) and d[-1] == 0:
        out.append(float(rho[-1]))
    return out


# -- files ---------------------------------------------------------------------------


def write_shots(path, circuit_ids, bits, seeds=None) -> None:
    """JSONL, one shot per line: {circuit_id, seed, bits: [±1 ...]}."""
    z = bits_to_signed(bits)
    with open(path, "w") as fh:
        for k, (cid, row) in enumerate(zip(circuit_ids, z)):
            seed = None if seeds is None else int(seeds[k])
            fh.write(json.dumps({"circuit_id": int(cid), "seed": seed, "bits": [int(b) for b in row]}) + "\n")


def read_shots(path, n_qubits: int | None = None) -> tuple[np.ndarray, np.ndarray, list]:
    """Inverse of :func:`write_shots`: (circuit ids, 0/1 bits, seeds). Errors name the line."""
    ids, rows, seeds = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                bits = [int(b) for b in rec["bits"]]
                cid = int(rec["circuit_id"])
                if any(b not in (-1, 1) for b in bits):
                    raise ValueError("bits must be +1 or -1")
                width = n_qubits if n_qubits is not None else (len(rows[0]) if rows else len(bits))
                if len(bits) != width:
                    raise ValueError(f"expected {width} bits, got {len(bits)}")
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            ids.append(cid)
            rows.append(bits)
            seeds.append(rec.get("seed"))
    if not rows:
        raise ValueError(f"{path}: no shots")
    return np.array(ids, dtype=np.int64), signed_to_bits(np.array(rows, dtype=np.int8)), seeds


RESULT_COLUMNS = (
    "N",
    "rho",
    "r",
    "zeta",
    "zeta_sim",
    "zeta_tilde",
    "s_proxy",
    "s_proxy_sim",
    "s_proxy_tilde",
    "stderr_zeta",
    "stderr_zeta_sim",
    "stderr_zeta_tilde",
    "n_shots",
    "n_circuits",
    "n_rejected",
)


def write_results(path, results: list, extra_columns=()) -> None:
    """CSV of DecodeResult rows; labels N and rho come from ``result.labels``."""
    cols = list(RESULT_COLUMNS) + [c for c in extra_columns if c not in RESULT_COLUMNS]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for res in results:
            for row in res.rows():
                w.writerow({k: _fmt(row.get(k, "")) for k in cols})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
