"""Accessible information: fixed measurements, optimiser, objective identities."""

import math

import numpy as np
import pytest

from oracles import entropy_bits, two_state_grid_oracle
from qdlock.accinfo import (
    acc_info_of_measurement,
    acc_info_optimize,
    adversary_suite,
    entropy_min_objective,
    fourier_basis_povm,
    guessing_probability,
    holevo_chi,
    pretty_good_measurement,
    standard_basis_povm,
)
from qdlock.locking import LockingScheme, locked_ensemble, pair_ensemble
from qdlock.qcore import CapabilityError, Ensemble, Povm, haar_unitary, von_neumann_entropy


def two_state(overlap):
    t = math.acos(overlap) / 2
    vecs = np.array([[math.cos(t), math.cos(t)], [math.sin(t), -math.sin(t)]])
    return Ensemble.from_pure(vecs, [0.5, 0.5])


def random_rank_one_povm(d, n, seed):
    """n rank-one elements completed to a POVM by S^{-1/2} rescaling."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(d, n)) + 1j * rng.normal(size=(d, n))
    s = w @ w.conj().T
    vals, vecs = np.linalg.eigh(s)
    w = vecs @ np.diag(vals**-0.5) @ vecs.conj().T @ w
    return Povm.from_vectors(w)


def test_orthogonal_ensemble_fixed_measurements():
    ens = Ensemble.from_pure(np.eye(5), np.full(5, 0.2))
    assert acc_info_of_measurement(ens, standard_basis_povm(5)) == pytest.approx(math.log2(5), abs=1e-12)
    assert acc_info_of_measurement(ens, Povm.trivial(5)) == pytest.approx(0.0, abs=1e-12)


def test_helstrom_angle_matches_grid():
    c = 1 / math.sqrt(2)
    ens = two_state(c)
    # symmetric ensemble: the optimal projective measurement is the +/- basis
    povm = Povm.from_basis(np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    assert acc_info_of_measurement(ens, povm) == pytest.approx(two_state_grid_oracle(c), abs=1e-6)


def test_optimize_orthogonal():
    ens = Ensemble.from_pure(np.eye(4), np.full(4, 0.25))
    res = acc_info_optimize(ens, restarts=2, iters=200, rng_seed=1)
    assert res.lower_bits == pytest.approx(2.0, abs=1e-6)
    assert res.upper_bits == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("overlap", [0.1, 0.5, 0.9])
def test_optimize_two_state_grid(overlap):
    ens = two_state(overlap)
    res = acc_info_optimize(ens, restarts=4, iters=300, rng_seed=0)
    assert res.lower_bits == pytest.approx(two_state_grid_oracle(overlap), abs=1e-4)
    assert res.lower_bits <= holevo_chi(ens) + 1e-12


def test_optimizer_history_monotone():
    ens = locked_ensemble(LockingScheme.haar(4, 2, seed=3))
    res = acc_info_optimize(ens, restarts=2, iters=80, rng_seed=2)
    for hist in res.histories:
        assert np.all(np.diff(hist) >= -1e-12)


def test_locked_ensemble_gap():
    """d=16, four Haar keys: optimum stays at least 0.1 bits below log2 16 and chi."""
    for seed in range(5):
        ens = locked_ensemble(LockingScheme.haar(16, 4, seed=seed))
        res = acc_info_optimize(ens, restarts=1, iters=60, rng_seed=seed, num_elements=32)
        assert res.lower_bits <= 4.0 - 0.1
        assert res.lower_bits <= holevo_chi(ens) - 0.1


def test_optimize_dimension_cap():
    ens = Ensemble.from_pure(np.eye(65)[:, :2], [0.5, 0.5])
    with pytest.raises(CapabilityError):
        acc_info_optimize(ens)


def test_holevo_examples():
    rho = np.diag([0.3, 0.7])
    ens = Ensemble(np.array([0.5, 0.5]), np.array([rho, rho]))
    assert holevo_chi(ens) == pytest.approx(0.0, abs=1e-12)
    assert holevo_chi(Ensemble.from_pure(np.eye(3), np.full(3, 1 / 3))) == pytest.approx(math.log2(3))
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    vecs = np.hstack([np.eye(2), h])
    bb84 = Ensemble.from_pure(vecs, np.full(4, 0.25))
    direct = von_neumann_entropy(sum(0.25 * np.outer(v, v) for v in vecs.T))
    assert holevo_chi(bb84) == pytest.approx(direct, abs=1e-12)
    assert holevo_chi(bb84) == pytest.approx(1.0, abs=1e-12)


def test_entropy_objective_examples():
    d = 4
    assert entropy_min_objective([np.eye(d)], standard_basis_povm(d)) == pytest.approx(2.0, abs=1e-12)
    assert entropy_min_objective([np.eye(d)], fourier_basis_povm(d)) == pytest.approx(0.0, abs=1e-12)


def test_entropy_objective_cross_implementation():
    """Equals the information about the (message, key) pair for any rank-one POVM."""
    keys = [haar_unitary(4, 10), haar_unitary(4, 11)]
    scheme = LockingScheme(np.array(keys), seed=None)
    for seed in range(3):
        povm = random_rank_one_povm(4, 7, seed)
        expected = acc_info_of_measurement(pair_ensemble(scheme), povm)
        assert entropy_min_objective(keys, povm) == pytest.approx(expected, abs=1e-9)


def test_entropy_objective_single_key_equals_locked():
    u = haar_unitary(4, 5)
    scheme = LockingScheme(u[None], seed=None)
    povm = random_rank_one_povm(4, 6, 1)
    expected = acc_info_of_measurement(locked_ensemble(scheme), povm)
    assert entropy_min_objective([u], povm) == pytest.approx(expected, abs=1e-9)


def test_pgm_examples():
    ens = Ensemble.from_pure(np.eye(3), np.full(3, 1 / 3))
    pgm = pretty_good_measurement(ens)
    for k in range(3):
        np.testing.assert_allclose(pgm.elements[k], np.diag(np.eye(3)[k]), atol=1e-10)
    single = Ensemble.from_pure(np.array([[1.0], [0.0]]), [1.0])
    pgm = pretty_good_measurement(single)
    np.testing.assert_allclose(pgm.elements[0], np.diag([1.0, 0.0]), atol=1e-10)
    ens = two_state(0.6)
    assert guessing_probability(ens, pretty_good_measurement(ens)) >= 0.5


def test_adversary_suite_dominates_baselines():
    ens = locked_ensemble(LockingScheme.haar(8, 2, seed=1))
    res = adversary_suite(ens, rng_seed=0, restarts=1, iters=60)
    assert res.best_bits == max(res.members.values())
    for name in ("standard_basis", "fourier_basis", "pretty_good"):
        assert res.members["optimized_rank_one"] >= res.members[name] - 1e-9
    assert res.best_bits <= res.holevo_bits + 1e-9


def test_mutual_information_bounded_by_entropy():
    ens = two_state(0.3)
    val = acc_info_of_measurement(ens, standard_basis_povm(2))
    assert 0.0 <= val <= entropy_bits([0.5, 0.5])


def test_restart_pool_povm_is_dominated():
    ens = locked_ensemble(LockingScheme.haar(4, 2, seed=8))
    povm = random_rank_one_povm(4, 9, 3)
    res = acc_info_optimize(ens, restarts=1, iters=50, rng_seed=0, initial_povms=[povm])
    assert acc_info_of_measurement(ens, povm) <= res.lower_bits + 1e-6
    assert res.lower_bits <= holevo_chi(ens) + 1e-6


def test_coarse_graining_never_helps():
    rng = np.random.default_rng(0)
    ens = locked_ensemble(LockingScheme.haar(3, 2, seed=1))
    for seed in range(10):
        povm = random_rank_one_povm(3, 6, seed)
        labels = rng.integers(0, 3, size=6)
        merged = Povm(tuple(sum(e for e, l in zip(povm.elements, labels) if l == g)
                            for g in sorted(set(labels))))
        assert acc_info_of_measurement(ens, merged) <= acc_info_of_measurement(ens, povm) + 1e-12


def test_optimizer_determinism_and_element_cap():
    ens = locked_ensemble(LockingScheme.haar(3, 3, seed=2))
    a = acc_info_optimize(ens, restarts=2, iters=40, rng_seed=7)
    b = acc_info_optimize(ens, restarts=2, iters=40, rng_seed=7)
    assert a.lower_bits == b.lower_bits
    np.testing.assert_array_equal(a.achieving_povm.stacked, b.achieving_povm.stacked)
    assert len(a.achieving_povm) <= 9
    with pytest.raises(ValueError):
        acc_info_optimize(Ensemble.from_pure(np.eye(2), [0.5, 0.5]),
                          initial_povms=[random_rank_one_povm(2, 5, 0)])
