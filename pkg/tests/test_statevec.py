import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipt import gates as G
from mipt import statevec as sv


def bell():
    s = sv.StateVector.zeros(2)
    sv.apply_gate(s, G.H, [0])
    sv.apply_gate(s, G.CNOT, [0, 1])
    return s


def ghz(n):
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return sv.StateVector(n, amps)


def random_state(n, rng):
    z = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return sv.StateVector(n, z / np.linalg.norm(z))


def test_x_flips_zero():
    s = sv.apply_gate(sv.StateVector.zeros(1), G.X, [0])
    assert np.allclose(s.amps, [0, 1])


def test_cz_from_fsim_signs_11():
    s = sv.apply_gate(sv.StateVector.basis(2, 3), G.fsim(0.0, math.pi), [0, 1])
    assert np.allclose(s.amps, [0, 0, 0, -1])


def test_swap_moves_excitation():
    # qubit 0 excited -> qubit 1 excited
    s = sv.apply_gate(sv.StateVector.basis(2, 0b01), G.SWAP, [0, 1])
    assert np.allclose(s.amps, np.eye(4)[0b10])


def test_first_target_is_most_significant_local_bit():
    # CNOT with control 1, target 0 acting on |q1=1, q0=0>
    s = sv.apply_gate(sv.StateVector.basis(2, 0b10), G.CNOT, [1, 0])
    assert np.allclose(s.amps, np.eye(4)[0b11])


def test_rejects_bad_targets_and_nonunitary():
    s = sv.StateVector.zeros(2)
    with pytest.raises(IndexError):
        sv.apply_gate(s, G.X, [2])
    with pytest.raises(ValueError):
        sv.apply_gate(s, G.CNOT, [1, 1])
    with pytest.raises(ValueError):
        sv.apply_gate(s, 2 * G.X, [0])
    sv.apply_linear(s, 2 * G.X, [0])  # raw maps bypass the check
    assert s.norm_sq() == pytest.approx(4.0)


def test_measure_zero_is_deterministic():
    bit, s = sv.measure(sv.StateVector.zeros(1), 0, rng=1)
    assert bit == 0 and np.allclose(s.amps, [1, 0])


def test_measure_plus_is_fair():
    rng = np.random.default_rng(5)
    shots = 10_000
    ones = 0
    for _ in range(shots):
        s = sv.apply_gate(sv.StateVector.zeros(1), G.H, [0])
        ones += sv.measure(s, 0, rng)[0]
    assert abs(ones / shots - 0.5) < 3 * math.sqrt(0.25 / shots)


def test_measure_bell_collapses_partner():
    for seed in range(10):
        bit, s = sv.measure(bell(), 0, rng=seed)
        assert np.allclose(np.abs(s.amps) ** 2, np.eye(4)[3 * bit])


def test_project_branches():
    with pytest.raises(sv.DegenerateBranch):
        sv.project(sv.StateVector.zeros(1), 0, 1)
    s = sv.apply_gate(sv.StateVector.zeros(1), G.H, [0])
    p, s = sv.project(s, 0, 0)
    assert p == pytest.approx(0.5) and np.allclose(s.amps, [1, 0])
    p, s = sv.project(ghz(3), 0, 0)
    assert p == pytest.approx(0.5) and np.allclose(s.amps, np.eye(8)[0])


def test_reset():
    s = sv.reset(sv.StateVector.basis(1, 1), 0, rng=0)
    assert np.allclose(s.amps, [1, 0])
    for seed in range(5):
        s = sv.reset(sv.apply_gate(sv.StateVector.zeros(1), G.H, [0]), 0, rng=seed)
        assert np.allclose(s.amps, [1, 0])
        s = sv.reset(bell(), 0, rng=seed)
        probs = np.abs(s.amps) ** 2
        assert probs[0b01] == pytest.approx(0) and probs[0b11] == pytest.approx(0)
        assert max(probs) == pytest.approx(1)


def test_reduced_density_examples():
    rho = sv.reduced_density(bell(), [0])
    assert np.allclose(rho.elems, np.eye(2) / 2)
    prod = sv.StateVector(3, np.kron(np.kron([0.6, 0.8], [1, 1j]), [1, 0]) / math.sqrt(2))
    for sub in ([0], [1, 2], [0, 2], [0, 1, 2]):
        assert sv.purity(sv.reduced_density(prod, sub)) == pytest.approx(1.0, abs=1e-10)
    # GHZ(4) two-qubit marginal against an explicit partial trace
    psi = ghz(4).amps.reshape(2, 2, 2, 2)  # axes: q3 q2 q1 q0
    oracle = np.einsum("abij,abkl->ijkl", psi, psi.conj()).reshape(4, 4)
    rho = sv.reduced_density(ghz(4), [0, 1])
    assert np.allclose(rho.elems, oracle)
    assert sv.purity(rho) == pytest.approx(0.5)


def test_reduced_density_orders_subsystem_bits():
    s = sv.StateVector.basis(3, 0b001)  # qubit 0 excited
    rho = sv.reduced_density(s, [2, 0])
    assert np.allclose(np.diag(rho.elems).real, np.eye(4)[0b10])


def test_reduced_density_cap():
    with pytest.raises(ValueError):
        sv.reduced_density(sv.StateVector.zeros(15), range(15))


def test_renyi2_examples():
    assert sv.renyi2(np.diag([1.0, 0.0])) == pytest.approx(0.0)
    assert sv.renyi2(np.eye(2) / 2) == pytest.approx(1.0)
    assert sv.renyi2(np.eye(4) / 4) == pytest.approx(2.0)


def test_bloch_examples():
    b = sv.bloch(np.diag([1.0, 0.0]))
    assert (b.ax, b.ay, b.az) == pytest.approx((0, 0, 1))
    b = sv.bloch(np.eye(2) / 2)
    assert (b.ax, b.ay, b.az) == pytest.approx((0, 0, 0))
    b = sv.bloch(np.full((2, 2), 0.5))
    assert (b.ax, b.ay, b.az) == pytest.approx((1, 0, 0))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 100), st.integers(0, 2**32 - 1))
def test_norm_preserved_by_random_circuits(n, n_gates, seed):
    rng = np.random.default_rng(seed)
    s = sv.StateVector.zeros(n)
    for _ in range(n_gates):
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            sv.apply_gate(s, G.haar_unitary(4, rng), [a, b])
        else:
            sv.apply_gate(s, G.haar_unitary(2, rng), [int(rng.integers(n))])
    assert abs(s.norm_sq() - 1) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_born_probabilities_sum_to_one(n, seed):
    rng = np.random.default_rng(seed)
    s = random_state(n, rng)
    q = int(rng.integers(n))
    p1 = sv.prob_one(s, q)
    p0 = 1 - p1
    a = s.copy()
    b = s.copy()
    pa = sv.project(a, q, 0)[0] if p0 > 1e-14 else 0.0
    pb = sv.project(b, q, 1)[0] if p1 > 1e-14 else 0.0
    assert abs(pa + pb - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.data())
def test_purity_bounds(n, seed, data):
    s = random_state(n, np.random.default_rng(seed))
    sub = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
    pur = sv.purity(sv.reduced_density(s, sub))
    assert 2.0 ** -len(sub) - 1e-12 <= pur <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_renyi2_additive_on_products(na, nb, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(na + 1, rng), random_state(nb + 1, rng)
    ra = sv.reduced_density(a, range(na)).elems
    rb = sv.reduced_density(b, range(nb)).elems
    assert sv.renyi2(np.kron(rb, ra)) == pytest.approx(sv.renyi2(ra) + sv.renyi2(rb), abs=1e-8)


def test_density_matrix_validate():
    sv.DensityMatrix(1, np.eye(2) / 2).validate()
    with pytest.raises(ValueError):
        sv.DensityMatrix(1, np.diag([1.5, -0.5])).validate()
