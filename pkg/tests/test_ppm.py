"""Pulse-position modulation: single-photon feedback protocol and weak coherent PPM."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from qdlock.accinfo import acc_info_of_measurement, standard_basis_povm
from qdlock.ppm import (
    PpmConfig,
    coherent_ppm_scheme,
    i_num_estimate,
    key_efficiency_region,
    lossy_feedback_simulate,
    photon_number_adversary,
    ppm_r2_estimate,
    single_photon_scheme,
)
from qdlock.qcore import CapabilityError


def test_single_photon_scheme():
    s = single_photon_scheme(2, 1, seed=0)
    assert s.msg_dim == 2 and s.num_keys == 1
    s = single_photon_scheme(8, 3, seed=1)
    vecs = s.encoded_vectors()
    np.testing.assert_allclose(np.linalg.norm(vecs, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(vecs[2][:, 5], s.key_unitaries[2][:, 5])
    with pytest.raises(CapabilityError):
        single_photon_scheme(128, 1)


def test_feedback_examples():
    rep = lossy_feedback_simulate(PpmConfig(n_modes=8, eta=1.0, trials=1000))
    assert rep.throughput_bits_per_block == pytest.approx(3.0, abs=1e-12)
    assert rep.resend_rate == 0.0
    rep = lossy_feedback_simulate(PpmConfig(n_modes=16, eta=0.5, trials=100_000, rng_seed=3))
    assert abs(rep.throughput_bits_per_block - 2.0) <= 3 * rep.throughput_stderr
    assert abs(rep.resend_rate - 0.5) < 0.01
    assert rep.decode_errors == 0
    rep = lossy_feedback_simulate(PpmConfig(n_modes=4, eta=0.0, trials=500))
    assert rep.throughput_bits_per_block == 0.0 and rep.resend_rate == 1.0


def test_feedback_thread_independent():
    cfg = PpmConfig(n_modes=8, eta=0.3, trials=20_000, rng_seed=9)
    a = lossy_feedback_simulate(cfg, threads=1).as_dict()
    b = lossy_feedback_simulate(cfg, threads=4).as_dict()
    assert a == b


def test_feedback_adversary():
    rep = lossy_feedback_simulate(
        PpmConfig(n_modes=8, eta=0.5, num_keys=4, trials=1000, evaluate_adversary=True)
    )
    assert 0 < rep.eve_bits_per_block < 0.5 * 3.0
    assert "best_bits" in rep.adversary


def test_config_validation():
    with pytest.raises(ValidationError):
        PpmConfig(n_modes=1, eta=0.5)
    with pytest.raises(ValidationError):
        PpmConfig(n_modes=4, eta=1.5)
    with pytest.raises(ValidationError):
        PpmConfig(n_modes=4, eta=0.5, bogus=1)


def test_r2_estimate():
    assert ppm_r2_estimate(1.0, 16, 0.5) == pytest.approx(1.0)
    assert ppm_r2_estimate(1.0, 256, 0.5) == pytest.approx(0.5)
    assert ppm_r2_estimate(0.5, 2**32, 1 / 16) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ppm_r2_estimate(0.0, 16, 0.5)


def test_coherent_vacuum_and_projection():
    s = coherent_ppm_scheme(4, 0.0, 2, seed=0)
    ens = s.locked_ensemble()
    for st in ens.states:
        np.testing.assert_allclose(st[0, 0], 1.0, atol=1e-12)
    assert i_num_estimate(s).i_num_bits == 0.0
    alpha = 0.4 + 0.2j
    s = coherent_ppm_scheme(4, alpha, 2, seed=1)
    v = s.encoded_vectors()
    u = s.modes.key_unitaries[1]
    expected = math.exp(-abs(alpha) ** 2 / 2) * np.concatenate([[1.0], alpha * u[:, 3]])
    np.testing.assert_allclose(v[1, :5, 3], expected, atol=1e-12)


def test_coherent_sector_norms():
    for alpha in (0.1, 0.3, 0.7):
        s = coherent_ppm_scheme(8, alpha, 2, seed=0)
        vac, single, rem = s.sector_norms()
        N = alpha**2
        assert vac + single + rem == pytest.approx(1.0, abs=1e-9)
        assert vac + single >= 1 - N**2
        assert s.truncation_error() <= N**2 / 2
        np.testing.assert_allclose(np.linalg.norm(s.encoded_vectors(), axis=1), 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        coherent_ppm_scheme(4, 1.0, 1)
    with pytest.raises(CapabilityError):
        coherent_ppm_scheme(64, 0.1, 1)


def test_photon_number_adversary():
    s = coherent_ppm_scheme(8, 0.3, 2, seed=0)
    povm = photon_number_adversary(s)
    probs = s.locked_ensemble().joint_distribution(povm).sum(axis=0)
    assert probs[0] == pytest.approx(math.exp(-0.09), abs=s.truncation_error() + 1e-12)
    sp = single_photon_scheme(4, 1, seed=0)
    assert photon_number_adversary(sp).dim == 4


def test_photon_number_adversary_beats_standard_basis():
    for seed in range(10):
        s = coherent_ppm_scheme(4, 0.5, 2, seed=seed)
        ens = s.locked_ensemble()
        pn = acc_info_of_measurement(ens, photon_number_adversary(s, rng_seed=seed))
        sb = acc_info_of_measurement(ens, standard_basis_povm(s.dim))
        assert pn >= sb - 1e-9


def test_i_num_single_key_reveals_message():
    s = coherent_ppm_scheme(8, 0.3, 1, seed=0)
    est = i_num_estimate(s)
    assert est.bracket_bits == pytest.approx(3.0, abs=1e-6)
    assert est.i_num_bits == pytest.approx(0.09 * 3.0, abs=1e-6)
    assert est.literal_bracket_bits >= est.bracket_bits - 1e-9


def test_i_num_decreases_with_keys():
    means = []
    for nk in (1, 4, 16):
        means.append(np.mean([i_num_estimate(coherent_ppm_scheme(8, 0.3, nk, seed=s)).i_num_bits for s in range(3)]))
    assert means[0] > means[1] > means[2]


def test_key_efficiency_region():
    assert key_efficiency_region(0.05, 0.5, 2**100).inside
    assert not key_efficiency_region(0.5, 0.5, 2**100).inside
    assert key_efficiency_region(0.05, 1.0, 4).lower_limit == 0.0
    inside = [key_efficiency_region(0.05, 0.25, 2**k).inside for k in range(2, 400, 7)]
    first = inside.index(True)
    assert all(inside[first:])


def test_lossless_decode_matches_simulation():
    from qdlock.locking import decode_success_probability, protocol_from_scheme
    from qdlock.ppm import single_photon_loss

    scheme = single_photon_scheme(8, 2, seed=0)
    proto = protocol_from_scheme(scheme, out_dim=9)
    assert decode_success_probability(proto, single_photon_loss(8, 1.0)) == pytest.approx(1.0, abs=1e-12)
    rep = lossy_feedback_simulate(PpmConfig(n_modes=8, eta=1.0, num_keys=2, trials=2000))
    assert rep.decode_errors == 0 and rep.resend_rate == 0.0
