"""Quantum kernel: states, entropies, channels, extensions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import entropy_bits
from qdlock.channels import dephasing, depolarizing, erasure
from qdlock.qcore import (
    DensityOperator,
    Ensemble,
    KrausChannel,
    Povm,
    binary_entropy,
    complementary_channel,
    haar_unitary,
    isometric_extension,
    mutual_information,
    partial_trace,
    random_density_matrix,
    random_pure_state,
    relative_entropy,
    trace_distance,
    von_neumann_entropy,
)


def bell():
    v = np.array([1, 0, 0, 1]) / math.sqrt(2)
    return DensityOperator.pure(v)


def test_entropy_examples():
    assert von_neumann_entropy(DensityOperator.maximally_mixed(2)) == pytest.approx(1.0, abs=1e-12)
    assert von_neumann_entropy(DensityOperator.pure(random_pure_state(5, 1))) == pytest.approx(0.0, abs=1e-12)
    rho = DensityOperator.diagonal([2 / 3, 1 / 3])
    assert von_neumann_entropy(rho) == pytest.approx(entropy_bits([2 / 3, 1 / 3]), abs=1e-12)


def test_entropy_rejects_invalid():
    with pytest.raises(ValueError):
        von_neumann_entropy(np.array([[1.0, 0.0], [0.0, -0.2]]) / 0.8)
    with pytest.raises(ValueError):
        DensityOperator(np.array([[0.5, 0.3], [0.1, 0.5]]))


def test_trace_distance_examples():
    a = DensityOperator.pure([1, 0])
    b = DensityOperator.pure([0, 1])
    assert trace_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert trace_distance(a, b) == pytest.approx(2.0, abs=1e-12)
    d = trace_distance(DensityOperator.diagonal([0.7, 0.3]), DensityOperator.diagonal([0.5, 0.5]))
    assert d == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(ValueError):
        trace_distance(a, DensityOperator.maximally_mixed(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_distance_metric_properties(seed):
    rng = np.random.default_rng(seed)
    r, s, t = (random_density_matrix(3, rng_seed=rng) for _ in range(3))
    u = haar_unitary(3, rng)
    assert trace_distance(r, t) <= trace_distance(r, s) + trace_distance(s, t) + 1e-10
    assert trace_distance(u @ r @ u.conj().T, u @ s @ u.conj().T) == pytest.approx(
        trace_distance(r, s), abs=1e-10
    )
    assert 0.0 <= von_neumann_entropy(r) <= math.log2(3) + 1e-9


def test_mutual_information_examples():
    prod = np.kron(random_density_matrix(2, rng_seed=0), random_density_matrix(3, rng_seed=1))
    assert mutual_information(DensityOperator(prod), (2, 3)) == pytest.approx(0.0, abs=1e-9)
    assert mutual_information(np.eye(4) / 4) == pytest.approx(2.0, abs=1e-12)
    assert mutual_information(bell(), (2, 2)) == pytest.approx(2.0, abs=1e-12)


def test_binary_entropy():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.25) == pytest.approx(-0.25 * math.log2(0.25) - 0.75 * math.log2(0.75))
    with pytest.raises(ValueError):
        binary_entropy(1.2)


def test_haar_examples():
    u = haar_unitary(1, 3)
    assert abs(abs(u[0, 0]) - 1) < 1e-12
    np.testing.assert_array_equal(haar_unitary(6, 11), haar_unitary(6, 11))
    v = haar_unitary(8, 5)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(8), atol=1e-10)


def test_haar_first_moment():
    """E|U_11|^2 = 1/d; checked at 3 sigma over 10^4 samples."""
    rng = np.random.default_rng(123)
    d, n = 8, 10_000
    x = np.array([abs(haar_unitary(d, rng)[0, 0]) ** 2 for _ in range(n)])
    sigma = x.std(ddof=1) / math.sqrt(n)
    assert abs(x.mean() - 1 / d) < 3 * sigma


def test_haar_left_invariance():
    """Fixed unitary times Haar samples keeps the |U_ij|^2 moments."""
    rng = np.random.default_rng(7)
    w = haar_unitary(4, 99)
    x = np.array([abs((w @ haar_unitary(4, rng))[2, 1]) ** 2 for _ in range(5000)])
    assert abs(x.mean() - 0.25) < 3 * x.std(ddof=1) / math.sqrt(len(x))


def test_partial_trace_examples():
    a, b, c = (random_density_matrix(2, rng_seed=s) for s in range(3))
    np.testing.assert_allclose(partial_trace(np.kron(a, b), (2, 2), [1]), a, atol=1e-12)
    np.testing.assert_allclose(partial_trace(bell(), (2, 2), [0]).matrix, np.eye(2) / 2, atol=1e-12)
    rho = random_density_matrix(12, rng_seed=4)
    two_step = partial_trace(partial_trace(rho, (2, 3, 2), [2]), (2, 3), [1])
    np.testing.assert_allclose(two_step, partial_trace(rho, (2, 3, 2), [1, 2]), atol=1e-12)
    with pytest.raises(ValueError):
        partial_trace(rho, (5, 2), [0])


def test_isometric_extension_examples():
    ext = isometric_extension(KrausChannel.identity(3))
    assert ext.e_dim == 1
    np.testing.assert_allclose(ext.isometry, np.eye(3))
    ext = isometric_extension(depolarizing(2, 1.0))
    assert ext.e_dim == 4
    v = ext.isometry
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)


def test_extension_reproduces_channel_and_complement():
    ch = depolarizing(3, 0.4)
    ext = isometric_extension(ch)
    comp = complementary_channel(ch)
    for i in range(3):
        for j in range(3):
            e = np.zeros((3, 3), dtype=complex)
            e[i, j] = 1
            np.testing.assert_allclose(ext.to_b(e), ch.apply(e), atol=1e-10)
            np.testing.assert_allclose(ext.to_e(e), comp.apply(e), atol=1e-10)


def test_complement_examples():
    comp = complementary_channel(KrausChannel.identity(2))
    out = comp.apply(random_density_matrix(2, rng_seed=0))
    np.testing.assert_allclose(out, [[1.0]])
    comp = complementary_channel(dephasing(2, 1.0))
    for s in range(5):
        o = comp.apply(random_density_matrix(2, rng_seed=s))
        np.testing.assert_allclose(o, np.diag(np.diag(o)), atol=1e-12)


def test_erasure_complement_is_erasure():
    """Complement of erasure(p) is erasure(1 - p) with the flag moved to the front."""
    p, d = 0.3, 3
    comp = complementary_channel(erasure(d, p))
    perm = np.roll(np.eye(d + 1), -1, axis=0)  # moves flag from index 0 to index d
    relabelled = KrausChannel(tuple(perm @ k for k in comp.kraus_ops))
    np.testing.assert_allclose(relabelled.choi(), erasure(d, 1 - p).choi(), atol=1e-12)


def test_double_complement_spectrum():
    for ch in (depolarizing(2, 0.3), erasure(2, 0.2), dephasing(3, 0.5)):
        cc = complementary_channel(complementary_channel(ch))
        a = np.sort(np.linalg.eigvalsh(cc.choi()))
        b = np.sort(np.linalg.eigvalsh(ch.choi()))
        k = min(len(a), len(b))
        np.testing.assert_allclose(a[-k:], b[-k:], atol=1e-8)


def test_channels_preserve_trace_and_positivity():
    rng = np.random.default_rng(0)
    for ch in (depolarizing(2, 0.3), erasure(3, 0.6), dephasing(2, 0.5)):
        for _ in range(100):
            out = ch.apply(random_density_matrix(ch.in_dim, rng_seed=rng))
            assert abs(np.trace(out) - 1) < 1e-9
            assert np.linalg.eigvalsh(out)[0] > -1e-9


def test_kraus_validation():
    with pytest.raises(ValueError):
        KrausChannel((np.eye(2) * 0.9,))


def test_povm_and_ensemble_validation():
    with pytest.raises(ValueError):
        Povm((np.diag([1.0, 0.0]),))
    with pytest.raises(ValueError):
        Ensemble(np.array([0.5, 0.6]), np.array([np.eye(2) / 2] * 2))


def test_relative_entropy_support():
    a = DensityOperator.pure([1, 0])
    b = DensityOperator.pure([0, 1])
    assert relative_entropy(a, b) == math.inf
    assert relative_entropy(a, DensityOperator.maximally_mixed(2)) == pytest.approx(1.0)


def test_from_choi_round_trip():
    ch = erasure(2, 0.3)
    alt = KrausChannel.from_choi(ch.choi(), ch.in_dim, ch.out_dim)
    np.testing.assert_allclose(alt.choi(), ch.choi(), atol=1e-12)
