import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipt import noise
from mipt import randmeas as rm
from mipt import statevec as sv

from states import brickwork, ghz, product


def test_single_qubit_zero_state_purity():
    data = rm.sample_randomized(sv.StateVector.zeros(1), 400, 2000, 1)
    p, err = rm.estimate_purity(data, [0])
    assert abs(p - 1.0) < 3 * err and err < 0.05


def test_bell_single_qubit_purity():
    data = rm.sample_randomized(ghz(2), 10, 100_000, 2)
    p, _ = rm.estimate_purity(data, [0])
    assert abs(p - 0.5) < 0.03


def test_ghz4_pair_purity_within_error():
    data = rm.sample_randomized(ghz(4), 20, 100_000, 3)
    p, err = rm.estimate_purity(data, [1, 2])
    assert abs(p - 0.5) < 3 * err


def test_needs_two_shots_and_valid_subsystem():
    data = rm.sample_randomized(ghz(2), 3, 1, 0)
    with pytest.raises(ValueError):
        rm.estimate_purity(data, [0])
    data = rm.sample_randomized(ghz(2), 3, 10, 0)
    with pytest.raises(ValueError):
        rm.estimate_purity(data, [2])
    with pytest.raises(ValueError):
        rm.estimate_purity(data, [])


def test_single_instance_has_no_error_bar():
    data = rm.sample_randomized(ghz(2), 1, 100, 0)
    _, err = rm.estimate_purity(data, [0])
    assert math.isnan(err)


def test_mutual_information_examples():
    rng = np.random.default_rng(4)
    data = rm.sample_randomized(product(3, rng), 20, 50_000, 5)
    i, err = rm.mutual_information(data, [0], [2])
    assert abs(i) < max(3 * err, 0.05)
    data = rm.sample_randomized(ghz(2), 30, 100_000, 6)
    i, err = rm.mutual_information(data, [0], [1])
    assert abs(i - 2.0) < 3 * err
    data = rm.sample_randomized(ghz(4), 30, 100_000, 7)
    i, err = rm.mutual_information(data, [0], [3])
    assert abs(i - 1.0) < 3 * err
    with pytest.raises(ValueError):
        rm.mutual_information(data, [0, 1], [1])


def test_identity_override_gives_zero_bitstrings():
    data = rm.sample_randomized(sv.StateVector.zeros(3), 4, 250, 0, unitary_source=lambda g, q: np.eye(2))
    assert len(data.instances) == 4
    for inst in data.instances:
        assert inst.counts == {0: 250} and inst.shots == 250


def test_stderr_shrinks_with_shots():
    # a maximally mixed qubit has no unitary-to-unitary spread, so only shot noise remains
    errs = []
    for shots in (100, 1000, 10_000):
        data = rm.sample_randomized(ghz(2), 40, shots, shots)
        p, err = rm.estimate_purity(data, [1])
        assert abs(p - 0.5) < 4 * err
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.slow
def test_estimator_unbiased_over_resampled_datasets():
    rng = np.random.default_rng(8)
    state = brickwork(3, 2, rng)
    exact = sv.purity(sv.reduced_density(state, [0, 1]))
    means = [rm.estimate_purity(rm.sample_randomized(state, 4, 40, seed), [0, 1])[0] for seed in range(200)]
    assert abs(np.mean(means) - exact) < 2 * np.std(means) / math.sqrt(len(means))


def test_purity_estimate_for_counts_matches_direct_sum():
    # compare the factorized Hamming kernel with the literal double sum
    rng = np.random.default_rng(9)
    data = rm.sample_randomized(brickwork(3, 2, rng), 3, 30, 10)
    sub = [2, 0]
    got = rm.instance_purities(data, sub)
    for inst, value in zip(data.instances, got):
        marg = {}
        for s, c in inst.counts.items():
            key = tuple((s >> q) & 1 for q in sub)
            marg[key] = marg.get(key, 0) + c
        m = inst.shots
        total = 0.0
        for (a, na), (b, nb) in itertools.product(marg.items(), repeat=2):
            ham = sum(x != y for x, y in zip(a, b))
            pair = na * (nb - 1) if a == b else na * nb
            total += (-2.0) ** (-ham) * pair / (m * (m - 1))
        assert value == pytest.approx(4 * total)


def test_entropy_curve_shapes():
    data = rm.sample_randomized(ghz(3), 10, 2000, 11)
    curve = rm.entropy_curve(data)
    assert list(curve.volumes) == [0, 1, 2, 3]
    assert np.all(np.isfinite(curve.entropies))
    exact = rm.exact_entropy_curve(ghz(3))
    assert np.allclose(exact.entropies, [0, 1, 1, 0])


def test_mitigation_examples():
    pure = rm.exact_entropy_curve(ghz(4))
    assert np.allclose(rm.mitigate(pure).entropies, pure.entropies)
    base = rm.EntropyCurve([(v, min(v, 6 - v) + 0.1 * v, 0.0) for v in range(7)])
    assert np.allclose(rm.mitigate(base).entropies, [min(v, 6 - v) for v in range(7)], atol=1e-12)
    with pytest.raises(ValueError):
        rm.mitigate(rm.EntropyCurve([(0, 0.0, 0.0)]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=2, max_size=15))
def test_mitigation_idempotent(values):
    curve = rm.EntropyCurve([(v, s, 0.0) for v, s in enumerate(values)])
    once = rm.mitigate(curve)
    assert rm.mitigate(once).points == once.points
    assert once.points[-1][1] == 0.0


def test_mitigation_error_does_not_grow_with_volume():
    rng = np.random.default_rng(12)
    state = brickwork(8, 2, rng)
    clean = rm.exact_entropy_curve(state)
    noisy = rm.exact_entropy_curve(noise.depolarize_all_dm(noise.density_of(state), 0.05))
    mitigated = rm.mitigate(noisy)
    vols = np.arange(1, 8)
    raw_err = np.abs(noisy.entropies[1:8] - clean.entropies[1:8])
    mit_err = np.abs(mitigated.entropies[1:8] - clean.entropies[1:8])
    raw_slope = np.polyfit(vols, raw_err, 1)[0]
    mit_slope = np.polyfit(vols, mit_err, 1)[0]
    assert raw_slope >= 5 * abs(mit_slope)
    assert mit_err.max() < 3 * 0.05 * 2  # O(eps) with a modest constant


def test_dataset_round_trip(tmp_path):
    data = rm.sample_randomized(ghz(3), 5, 300, 13)
    path = tmp_path / "d.jsonl"
    rm.write_dataset(data, path)
    back = rm.read_dataset(path)
    assert back.n_qubits == 3
    assert [(i.seed, i.counts, i.shots) for i in back.instances] == [
        (i.seed, i.counts, i.shots) for i in data.instances
    ]
    path.write_text(path.read_text().splitlines()[0] + "\n{\"seed\": 1, \"shots\": 5, \"counts\": {\"0\": 4}}\n")
    with pytest.raises(ValueError, match=":2:"):
        rm.read_dataset(path)


def test_reduced_density_dm_matches_state_version():
    rng = np.random.default_rng(14)
    s = brickwork(5, 3, rng)
    dm = noise.density_of(s).elems
    for sub in ([0], [3, 1], [4, 0, 2]):
        assert np.allclose(rm.reduced_density_dm(dm, sub).elems, sv.reduced_density(s, sub).elems)
