"""Past lightcones and the greedy lightcone sweep that orders a shallow circuit for decoding.

The sweep keeps an *active* set of qubits that have left their initial state
but not yet been measured. It grows the active set one past lightcone at a
time, applies every operation whose qubits are all active and next in line,
and retires ("projects") patch qubits as soon as they have no operations
left. Every backend (exact state vector, shot sampler, 1D mapping, MPS)
replays the same event stream, so they agree on operation order by
construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field


def _supports(circ) -> list[tuple]:
    return [tuple(op.support) for op in circ.operations()]


def past_lightcone(circ, qubit: int) -> frozenset:
    """Qubits reachable from ``qubit`` at the final time by hopping backwards along gates."""
    cone = {qubit}
    for support in reversed(_supports(circ)):
        if len(support) > 1 and cone.intersection(support):
            cone.update(support)
    return frozenset(cone)


def all_lightcones(supports: list[tuple], n_qubits: int) -> list[frozenset]:
    cones = [{q} for q in range(n_qubits)]
    for support in reversed(supports):
        if len(support) < 2:
            continue
        for cone in cones:
            if cone.intersection(support):
                cone.update(support)
    return [frozenset(c) for c in cones]


# event kinds
ACTIVATE, APPLY, PROJECT, EMIT = "activate", "apply", "project", "emit"


@dataclass
class SweepPlan:
    """Ordered events: (ACTIVATE, q), (APPLY, op_index), (PROJECT, q), (EMIT, r)."""

    events: list = field(default_factory=list)
    peak_active: int = 0
    n_qubits: int = 0

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e[0] == kind)


def plan_sweep(circ, patches, probe: int | None = None, keep=()) -> SweepPlan:
    """Greedy lightcone sweep over nested ``patches`` (``patches[0]`` may be empty).

    ``probe`` (if given) is activated first together with its past lightcone and
    is never projected; neither are qubits in ``keep``. An EMIT event follows
    the point where every qubit of patch ``r`` has been projected.
    """
    n = circ.n_qubits
    supports = _supports(circ)
    cones = all_lightcones(supports, n)
    queues: list[list[int]] = [[] for _ in range(n)]
    for k, support in enumerate(supports):
        for q in support:
            queues[q].append(k)
    heads = [0] * n
    keep = set(keep) | ({probe} if probe is not None else set())

    plan = SweepPlan(n_qubits=n)
    initial = set(range(n))  # qubits still in their initial state
    active: set[int] = set()
    finished: set[int] = set()

    def activate(qubits) -> None:
        for q in sorted(qubits & initial):
            initial.discard(q)
            active.add(q)
            plan.events.append((ACTIVATE, q))
        plan.peak_active = max(plan.peak_active, len(active))

    def evolve() -> None:
        progress = True
        while progress:
            progress = False
            for q in sorted(active):
                while heads[q] < len(queues[q]):
                    k = queues[q][heads[q]]
                    support = supports[k]
                    if not all(p in active and queues[p][heads[p]] == k for p in support):
                        break
                    plan.events.append((APPLY, k))
                    for p in support:
                        heads[p] += 1
                    progress = True

    def done(q: int) -> bool:
        return heads[q] == len(queues[q])

    def project(patch: set) -> None:
        for q in sorted(active & patch):
            if q not in keep and done(q):
                active.discard(q)
                finished.add(q)
                plan.events.append((PROJECT, q))

    if probe is not None:
        activate(cones[probe])
        evolve()
    for r, patch in enumerate(patches):
        patch = set(patch)
        if patch & keep:
            raise ValueError("patches may not contain kept qubits")
        while not patch <= finished:
            pending = sorted(patch - finished)
            target = min(pending, key=lambda q: (len(cones[q] & initial), q))
            activate(cones[target] | {target})
            evolve()
            project(patch)
            if target not in finished:
                raise RuntimeError(f"sweep failed to finish qubit {target}")
        plan.events.append((EMIT, r))
    # anything still untouched (kept qubits outside the probe's cone)
    if initial:
        activate(set(initial))
    evolve()
    if any(not done(q) for q in range(n)):
        raise RuntimeError("sweep left operations unapplied")
    return plan
