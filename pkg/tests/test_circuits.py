import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipt import gates as G
from mipt import statevec as sv
from mipt.circuits import geometry as geo
from mipt.circuits.dual import (
    build_1d_dual_pair,
    build_teleport_harness,
    harness_output,
    monitored_output,
)
from mipt.circuits.ir import (
    Circuit,
    LinearMap,
    Measure,
    MeasureReset,
    Unitary,
    circuit_from_json,
    circuit_to_json,
    pack_moments,
)
from mipt.circuits.lightcone import past_lightcone, plan_sweep
from mipt.circuits.mapping import map_2d_to_1d
from mipt.circuits.shallow import build_shallow_2d, effective_measurement_rate
from mipt.circuits.sim import simulate, with_depolarizing

from oracles import fidelity, kept_wire_state, sample_chain_records

GEOMS = geo.builtin_geometries()


# ---------------------------------------------------------------- geometry


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_shipped_geometries_match_builders(name):
    assert geo.load_geometry(name).to_dict() == GEOMS[name].to_dict()


def test_geometry_sizes():
    sizes = {name: g.n_qubits for name, g in GEOMS.items()}
    assert sizes == {"grid19": 19, "n12": 12, "n24": 24, "n40": 40, "n58": 58, "n70": 70}


def test_load_geometry_by_path_and_unknown(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(GEOMS["n12"].to_dict()))
    assert geo.load_geometry(str(path)).n_qubits == 12
    with pytest.raises(KeyError):
        geo.load_geometry("nope")


def test_geometry_validation_errors():
    with pytest.raises(ValueError, match="nearest"):
        geo.Geometry("bad", ((0, 0), (2, 0)), ((0, 1, "blue"),))
    with pytest.raises(ValueError, match="matching"):
        geo.Geometry("bad", ((0, 0), (1, 0), (2, 0)), ((0, 1, "blue"), (1, 2, "blue")))
    with pytest.raises(ValueError, match="color"):
        geo.Geometry("bad", ((0, 0), (1, 0)), ((0, 1, "purple"),))
    with pytest.raises(ValueError, match="nested"):
        geo.Geometry("bad", ((0, 0), (1, 0)), (), probe=0, patches=((), (1,), (1,)))


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_geometry_invariants(name):
    g = GEOMS[name]
    for color in geo.COLORS:
        used = [q for e in g.edges_of(color) for q in e]
        assert len(used) == len(set(used))
    assert g.patches[0] == ()
    assert set(g.patches[-1]) | {g.probe} == set(range(g.n_qubits))


def test_grid19_layout():
    g = GEOMS["grid19"]
    assert g.final == tuple(range(7))
    assert [g.qubits[q][1] for q in range(7)] == [2] * 7
    assert g.n_qubits - len(g.final) == 12


# ---------------------------------------------------------------- IR


def test_overlapping_moment_rejected():
    with pytest.raises(ValueError):
        Circuit(2, [[Measure(0), Unitary(G.CNOT, (0, 1))]])


def test_pack_moments_preserves_order():
    ops = [Unitary(G.H, (0,)), Unitary(G.CNOT, (0, 1)), Unitary(G.X, (2,)), Measure(1)]
    moments = pack_moments(ops)
    assert [len(m) for m in moments] == [2, 1, 1]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_json_round_trip(seed):
    circ = build_shallow_2d(GEOMS["n12"], 5, 0.7, seed)
    back = circuit_from_json(circuit_to_json(circ))
    assert back.n_qubits == circ.n_qubits and len(back.moments) == len(circ.moments)
    for a, b in zip(circ.operations(), back.operations()):
        assert type(a) is type(b) and tuple(a.support) == tuple(b.support)
        assert np.allclose(a.matrix, b.matrix, atol=1e-11)
    assert circuit_to_json(back) == circuit_to_json(circ)


def test_json_keeps_raw_matrices_and_angles():
    m = G.haar_unitary(4, 3)
    circ = Circuit(2, [[LinearMap(m, (0, 1), "custom")], [Measure(0, key=5)]], {"theta": math.pi / 7})
    text = circuit_to_json(circ)
    back = circuit_from_json(text)
    assert np.array_equal(next(back.operations()).matrix, m)
    assert json.loads(text)["metadata"]["theta"] == float(f"{math.pi / 7:.12g}")


# ---------------------------------------------------------------- shallow circuits


def test_rho_zero_is_product():
    circ = build_shallow_2d(GEOMS["grid19"], 4, 0.0, 5)
    assert not circ.two_qubit_ops()
    rho = sv.reduced_density(simulate(circ).state, [GEOMS["grid19"].probe])
    assert sv.purity(rho) == pytest.approx(1.0)


@pytest.mark.parametrize("t", range(1, 9))
def test_full_density_gate_count(t):
    g = GEOMS["n24"]
    circ = build_shallow_2d(g, t, 1.0, 1)
    expected = sum(len(g.edges_of(c)) for c in g.cycle_colors[:t])
    assert len(circ.two_qubit_ops()) == expected


def test_depth_and_density_bounds():
    with pytest.raises(ValueError):
        build_shallow_2d(GEOMS["n12"], 9, 0.5, 0)
    with pytest.raises(ValueError):
        build_shallow_2d(GEOMS["n12"], 0, 0.5, 0)
    with pytest.raises(ValueError):
        build_shallow_2d(GEOMS["n12"], 3, 1.5, 0)


def test_grid19_t3_architecture():
    g = GEOMS["grid19"]
    circ = build_shallow_2d(g, 3, 1.0, 0)
    assert circ.metadata["depth"] == 3 and circ.n_qubits == 19
    colors = {g.edges[k][2] for k in range(len(g.edges))}
    assert colors == set(geo.COLORS)
    pairs = {tuple(sorted(op.support)) for op in circ.two_qubit_ops()}
    expected = {tuple(sorted(e)) for c in ("orange", "blue", "green") for e in g.edges_of(c)}
    assert pairs == expected
    assert circ.metadata["two_qubit_gate"].startswith("fsim")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1))
def test_circuits_nest_in_rho(seed, a, b):
    lo, hi = sorted((a, b))
    small = build_shallow_2d(GEOMS["n12"], 5, lo, seed)
    big = build_shallow_2d(GEOMS["n12"], 5, hi, seed)
    key = lambda c: {(k, tuple(op.support)) for k, m in enumerate(c.moments) for op in m if len(op.support) == 2}
    assert key(small) <= key(big)


def test_gate_count_mean_tracks_rho():
    g = GEOMS["n24"]
    full = len(build_shallow_2d(g, 5, 1.0, 0).two_qubit_ops())
    for rho in (0.25, 0.5, 0.75):
        counts = [len(build_shallow_2d(g, 5, rho, s).two_qubit_ops()) for s in range(200)]
        sigma = math.sqrt(full * rho * (1 - rho) / 200)
        assert abs(np.mean(counts) - rho * full) < 4 * sigma


def test_same_seed_same_circuit():
    a = build_shallow_2d(GEOMS["n40"], 5, 0.6, 42)
    b = build_shallow_2d(GEOMS["n40"], 5, 0.6, 42)
    assert circuit_to_json(a) == circuit_to_json(b)


def test_effective_measurement_rate():
    assert effective_measurement_rate(12, 7, 3) == pytest.approx(12 / 57)
    assert effective_measurement_rate(0, 7, 3) == 0.0
    rates = [effective_measurement_rate(12, 7, t) for t in range(1, 200)]
    assert all(x > y for x, y in zip(rates, rates[1:])) and rates[-1] < 0.01


def test_depolarizing_inserted_after_cycles():
    circ = build_shallow_2d(GEOMS["n12"], 3, 1.0, 0)
    noisy = with_depolarizing(circ, 0.1)
    assert len(noisy.moments) == len(circ.moments) + len(circ.metadata["cycle_ends"])
    assert with_depolarizing(circ, 0.0).depth == circ.depth


# ---------------------------------------------------------------- lightcones and sweep


def test_lightcone_of_empty_circuit():
    assert past_lightcone(Circuit(3, []), 1) == {1}


def test_n58_probe_and_right_edge_cones_disjoint():
    g = GEOMS["n58"]
    circ = build_shallow_2d(g, 5, 1.0, 0)
    width = max(x for x, _ in g.qubits)
    right = [q for q, (x, _) in enumerate(g.qubits) if x == width]
    probe_cone = past_lightcone(circ, g.probe)
    for q in right:
        assert not probe_cone & past_lightcone(circ, q)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 7), st.integers(0, 23))
def test_lightcone_grows_with_depth(seed, t, q):
    g = GEOMS["n24"]
    small = past_lightcone(build_shallow_2d(g, t, 1.0, seed), q)
    big = past_lightcone(build_shallow_2d(g, t + 1, 1.0, seed), q)
    assert q in small and small <= big


@pytest.mark.parametrize("name", ["n12", "n24", "n40", "n58", "n70"])
def test_sweep_peak_bounded(name):
    g = GEOMS[name]
    for seed in range(3):
        plan = plan_sweep(build_shallow_2d(g, 5, 1.0, seed), g.patches, probe=g.probe)
        assert plan.peak_active <= 20
        assert plan.count("emit") == len(g.patches)
        assert plan.count("project") == g.n_qubits - 1


# ---------------------------------------------------------------- 2D to 1D mapping


@pytest.mark.parametrize("t", [1, 2, 3])
def test_mapping_matches_direct_simulation(t):
    g = GEOMS["grid19"]
    rng = np.random.default_rng(100 + t)
    circ = build_shallow_2d(g, t, 1.0, 7 * t)
    mapped = map_2d_to_1d(circ, g)
    wires = [mapped.final_wires[q] for q in g.final]
    for record, direct, prob in sample_chain_records(circ, g.final, 20, rng):
        res = simulate(mapped.circuit, record=record)
        assert fidelity(kept_wire_state(res.state, wires), direct) > 1 - 1e-9
        assert math.exp(res.log_prob) == pytest.approx(prob, rel=1e-8)


def test_grid19_mapping_shape():
    g = GEOMS["grid19"]
    mapped = map_2d_to_1d(build_shallow_2d(g, 3, 1.0, 0), g)
    assert mapped.n_wires == 11
    assert len(mapped.final_wires) == 7
    assert mapped.circuit.count(MeasureReset) == 12
    assert sorted(s.qubit for s in mapped.provenance) == list(range(19))


def test_strip_gate_range_at_depth_five():
    strip = geo.lattice_geometry("strip", [(x, y) for x in range(14) for y in range(6)])
    for seed in range(3):
        mapped = map_2d_to_1d(build_shallow_2d(strip, 5, 1.0, seed), strip, keep=())
        assert mapped.max_gate_range <= 3


def test_mapping_with_schedule_puts_probe_first():
    g = GEOMS["n24"]
    mapped = map_2d_to_1d(build_shallow_2d(g, 5, 1.0, 0), g, schedule=(g.probe, g.patches))
    assert mapped.probe_wire == 0
    assert sorted(mapped.emit_after) == list(range(len(g.patches)))


def test_mapping_rejects_non_grid_gates():
    g = GEOMS["n12"]
    circ = Circuit(12, [[Unitary(G.CNOT, (0, 11))]])
    with pytest.raises(ValueError, match="geometry"):
        map_2d_to_1d(circ, g)


# ---------------------------------------------------------------- dual pair and harness


def all_records(t):
    for bits in itertools.product((0, 1), repeat=t - 1):
        yield dict(enumerate(bits))


@pytest.mark.parametrize("n,t,theta", [(2, 2, 0.7), (4, 3, 2 * math.pi / 5), (4, 4, math.pi / 10), (6, 3, 1.1)])
def test_dual_and_monitored_agree(n, t, theta):
    monitored, unitary = build_1d_dual_pair(n, t, theta, rng=n * 10 + t)
    harness = build_teleport_harness(unitary)
    ratios = []
    for record in all_records(t):
        try:
            psi_h, prob = harness_output(harness, record)
            psi_m, weight = monitored_output(monitored, record)
        except sv.DegenerateBranch:
            continue
        assert fidelity(psi_h.amps, psi_m.amps) > 1 - 1e-10
        ratios.append(weight / prob)
    assert len(ratios) >= 2
    assert np.allclose(ratios, ratios[0], rtol=1e-8)


def test_dual_layout_twelve_sites():
    monitored, unitary = build_1d_dual_pair(12, 7, 2 * math.pi / 5, rng=0)
    assert unitary.n_qubits == 7 and monitored.n_qubits == 13
    assert unitary.count(Measure) == 6
    assert len(unitary.two_qubit_ops()) == sum(
        1 for layer in range(12) for w in range(6) if layer % 2 == (5 - w) % 2
    )


def test_swap_limit_has_no_measurements():
    monitored, _ = build_1d_dual_pair(6, 4, math.pi / 2, rng=0)
    assert monitored.count(LinearMap) == 0


def test_dual_pair_argument_checks():
    with pytest.raises(ValueError):
        build_1d_dual_pair(5, 3, 1.0, 0)
    with pytest.raises(ValueError):
        build_1d_dual_pair(4, 1, 1.0, 0)
    with pytest.raises(ValueError):
        build_1d_dual_pair(4, 3, 2.0, 0)


def test_harness_counts():
    _, unitary = build_1d_dual_pair(12, 7, 0.5, rng=1)
    harness = build_teleport_harness(unitary)
    assert len(harness.metadata["ancillas"]) == 12
    assert harness.metadata["bell_pairs"] == 6


def test_harness_on_identity_gates_returns_bell_pairs():
    ident = Circuit(2, [[Unitary(np.eye(4), (0, 1))], [Unitary(np.eye(4), (0, 1))], [Measure(0, key=0)]])
    harness = build_teleport_harness(ident)
    psi, prob = harness_output(harness, {0: 0})
    assert prob == pytest.approx(1.0)
    bell = np.zeros(4)
    bell[0] = bell[3] = 1 / math.sqrt(2)
    assert np.allclose(np.abs(psi.amps), np.abs(np.kron(bell, bell)))


def test_powers_override():
    _, a = build_1d_dual_pair(4, 3, 0.5, rng=None, powers=[0.1, 0.2, 0.3])
    assert a.metadata["powers"] == [0.1, 0.2, 0.3]
