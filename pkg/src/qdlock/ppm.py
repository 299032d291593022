"""Pulse-position-modulation enigma machines: single-photon and weak-coherent variants."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import accinfo
from .channels import erasure
from .locking import LockingScheme, locked_ensemble, protocol_from_scheme
from .qcore import CapabilityError, Ensemble, KrausChannel, Povm

MAX_SINGLE_PHOTON_MODES = 64
MAX_COHERENT_MODES = 32
MAX_COHERENT_NTOT = 0.5
MC_STREAMS = 8
FEEDBACK_ASSUMPTION = (
    "Eve attacks each PPM block independently; collective attacks across "
    "resent blocks are not covered"
)


class PpmConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_modes: int = Field(ge=2)
    eta: float = Field(ge=0.0, le=1.0)
    num_keys: int = Field(default=1, ge=1)
    alpha: complex = 0.0
    trials: int = Field(default=100_000, ge=1)
    rng_seed: int = Field(default=0, ge=0)
    epsilon: float = Field(default=0.5, gt=0.0, lt=1.0)
    evaluate_adversary: bool = False


@dataclass
class PpmReport:
    throughput_bits_per_block: float
    throughput_stderr: float
    expected_throughput: float
    resend_rate: float
    decode_errors: int
    r2_estimate: float
    trials: int
    assumption: str = FEEDBACK_ASSUMPTION
    eve_bits_per_block: float | None = None
    adversary: dict | None = None

    def as_dict(self) -> dict:
        return {
            "throughput_bits_per_block": self.throughput_bits_per_block,
            "throughput_stderr": self.throughput_stderr,
            "expected_throughput": self.expected_throughput,
            "resend_rate": self.resend_rate,
            "decode_errors": self.decode_errors,
            "r2_estimate": self.r2_estimate,
            "trials": self.trials,
            "assumption": self.assumption,
            "eve_bits_per_block": self.eve_bits_per_block,
            "adversary": self.adversary,
        }


def single_photon_scheme(n_modes: int, num_keys: int, seed: int = 0) -> LockingScheme:
    """Message |m> = one photon in mode m; keys are Haar mode unitaries on the n modes.

    On the single-photon subspace a passive mode unitary acts as the n x n
    matrix itself, so the encoded state U_k|m> has amplitudes given by
    column m of that matrix.
    """
    if n_modes > MAX_SINGLE_PHOTON_MODES:
        raise CapabilityError(f"single-photon PPM limited to {MAX_SINGLE_PHOTON_MODES} modes")
    return LockingScheme.haar(n_modes, num_keys, seed)


def single_photon_loss(n_modes: int, eta: float) -> KrausChannel:
    """Pure loss on a single photon: erasure with the vacuum as the flag (last level)."""
    return erasure(n_modes, 1.0 - eta)


def _decode_table(scheme: LockingScheme) -> np.ndarray:
    """p(m_hat | m, k) for the key-aided decoder on a detected photon."""
    proto = protocol_from_scheme(scheme)
    M, K = proto.num_messages, proto.num_keys
    table = np.zeros((M, K, M))
    for k, povm in enumerate(proto.decoder_povms):
        for m in range(M):
            p = np.clip(povm.probabilities(proto.encoder_states[m, k]), 0.0, None)
            table[m, k] = p / p.sum()
    return table


def _simulate_stream(args):
    seed_seq, trials, eta, table = args
    rng = np.random.default_rng(seed_seq)
    M, K, _ = table.shape
    m = rng.integers(0, M, trials)
    k = rng.integers(0, K, trials)
    click = rng.random(trials) < eta
    cdf = np.cumsum(table[m, k], axis=1)
    m_hat = np.minimum((rng.random(trials)[:, None] > cdf).sum(axis=1), M - 1)
    ok = click & (m_hat == m)
    bits = ok * math.log2(M)
    errors = int(np.sum(click & (m_hat != m)))
    return trials, float(bits.sum()), float((bits**2).sum()), int((~click).sum()), errors


def lossy_feedback_simulate(cfg: PpmConfig, threads: int = 1) -> PpmReport:
    """Monte-Carlo of single-photon PPM over pure loss with resend-on-no-click feedback.

    Each block: a uniform message and key, the photon survives with
    probability eta, a click is decoded with the key, a no-click triggers a
    resend. Throughput is delivered bits per transmitted block. Trials are
    split over a fixed number of RNG streams, so results do not depend on
    ``threads``.
    """
    n = cfg.n_modes
    scheme = single_photon_scheme(n, cfg.num_keys, cfg.rng_seed)
    table = _decode_table(scheme)
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(MC_STREAMS)
    sizes = [cfg.trials // MC_STREAMS + (i < cfg.trials % MC_STREAMS) for i in range(MC_STREAMS)]
    tasks = [(s, t, cfg.eta, table) for s, t in zip(streams, sizes) if t > 0]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_simulate_stream, tasks))
    else:
        parts = [_simulate_stream(t) for t in tasks]
    total = sum(p[0] for p in parts)
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    misses = sum(p[3] for p in parts)
    errors = sum(p[4] for p in parts)
    mean = s1 / total
    var = max(s2 / total - mean**2, 0.0) * total / max(total - 1, 1)
    report = PpmReport(
        throughput_bits_per_block=mean,
        throughput_stderr=math.sqrt(var / total),
        expected_throughput=cfg.eta * math.log2(n),
        resend_rate=misses / total,
        decode_errors=errors,
        r2_estimate=ppm_r2_estimate(cfg.eta, n, cfg.epsilon) if cfg.eta > 0 else math.inf,
        trials=total,
    )
    if cfg.evaluate_adversary:
        suite = accinfo.adversary_suite(
            locked_ensemble(scheme),
            rng_seed=cfg.rng_seed,
            restarts=1,
            iters=100,
            extra_povms={"key_basis": scheme.key_basis_povm(0)},
            threads=threads,
        )
        # Eve holds the photon with probability 1 - eta; her vacuum outcome is uninformative
        report.eve_bits_per_block = (1.0 - cfg.eta) * suite.best_bits
        report.adversary = suite.as_dict()
    return report


def ppm_r2_estimate(eta: float, n: int, epsilon: float) -> float:
    """4 log2(1/eps) / (eta log2 n)."""
    if not (eta > 0 and n >= 2 and 0 < epsilon < 1):
        raise ValueError("need eta > 0, n >= 2 and 0 < epsilon < 1")
    return 4.0 * math.log2(1.0 / epsilon) / (eta * math.log2(n))


# --------------------------------------------------------------------------
# weak coherent PPM


@dataclass(frozen=True, eq=False)
class CoherentPpmScheme:
    """Coherent PPM restricted to vacuum (+) single photon (+) one lumped remainder level.

    Basis order: index 0 vacuum, 1..n single photon in mode m', n+1 remainder.
    Encoded amplitudes: (e^{-N/2}, e^{-N/2} alpha U_k[:, m], sqrt(r)) with
    r = 1 - e^{-N}(1 + N). The remainder level is common to all messages, so
    its information content is accounted for only through the worst-case
    bound N_tot^2 log2 n.
    """

    modes: LockingScheme
    alpha: complex

    @property
    def n_modes(self) -> int:
        return self.modes.msg_dim

    @property
    def n_tot(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def dim(self) -> int:
        return self.n_modes + 2

    def sector_norms(self) -> tuple[float, float, float]:
        N = self.n_tot
        vac = math.exp(-N)
        single = math.exp(-N) * N
        return vac, single, max(1.0 - vac - single, 0.0)

    def truncation_error(self) -> float:
        """Probability outside vacuum and single photon, at most N_tot^2 / 2."""
        return self.sector_norms()[2]

    def encoded_vectors(self) -> np.ndarray:
        """Array [k, :, m] of encoded amplitude vectors."""
        vac, _, rem = self.sector_norms()
        U = self.modes.stacked  # (k, m', m)
        K, n = U.shape[0], self.n_modes
        out = np.zeros((K, n + 2, n), dtype=complex)
        out[:, 0, :] = math.sqrt(vac)
        out[:, 1 : n + 1, :] = math.sqrt(vac) * self.alpha * U
        out[:, n + 1, :] = math.sqrt(rem)
        return out

    def locked_ensemble(self) -> Ensemble:
        v = self.encoded_vectors()
        states = np.einsum("kim,kjm->mij", v, v.conj()) / v.shape[0]
        return Ensemble(np.full(self.n_modes, 1.0 / self.n_modes), states)

    def single_photon_ensemble(self) -> Ensemble:
        """Key-averaged states conditioned on exactly one photon."""
        return locked_ensemble(self.modes)


def coherent_ppm_scheme(
    n_modes: int, alpha: complex, num_keys: int, seed: int = 0
) -> CoherentPpmScheme:
    if n_modes > MAX_COHERENT_MODES:
        raise CapabilityError(f"coherent PPM limited to {MAX_COHERENT_MODES} modes")
    if abs(alpha) ** 2 > MAX_COHERENT_NTOT:
        raise ValueError(f"N_tot = |alpha|^2 must be <= {MAX_COHERENT_NTOT} for the truncation")
    return CoherentPpmScheme(LockingScheme.haar(n_modes, num_keys, seed), complex(alpha))


def _single_photon_povm(scheme, restarts: int, iters: int, rng_seed) -> accinfo.AccInfoResult:
    modes = scheme.modes if isinstance(scheme, CoherentPpmScheme) else scheme
    ens = locked_ensemble(modes)
    seeds = [
        accinfo.standard_basis_povm(modes.msg_dim),
        accinfo.fourier_basis_povm(modes.msg_dim),
        modes.key_basis_povm(0),
    ]
    return accinfo.acc_info_optimize(
        ens, restarts=restarts, iters=iters, rng_seed=rng_seed, initial_povms=seeds
    )


def photon_number_adversary(scheme, restarts: int = 1, iters: int = 150, rng_seed=0) -> Povm:
    """Vacuum projector, optimised rank-one elements on one photon, remainder projector.

    For a plain single-photon scheme only the single-photon part is returned.
    """
    res = _single_photon_povm(scheme, restarts, iters, rng_seed)
    if not isinstance(scheme, CoherentPpmScheme):
        return res.achieving_povm
    n, d = scheme.n_modes, scheme.dim
    els = []
    vac = np.zeros((d, d), dtype=complex)
    vac[0, 0] = 1.0
    els.append(vac)
    for e in res.achieving_povm.elements:
        big = np.zeros((d, d), dtype=complex)
        big[1 : n + 1, 1 : n + 1] = e
        els.append(big)
    rem = np.zeros((d, d), dtype=complex)
    rem[n + 1, n + 1] = 1.0
    els.append(rem)
    return Povm(tuple(els))


class INumEstimate(NamedTuple):
    i_num_bits: float
    bracket_bits: float
    literal_bracket_bits: float
    remainder_bound_bits: float
    sector_weighted_bits: float


def i_num_estimate(
    scheme: CoherentPpmScheme, restarts: int = 1, iters: int = 150, rng_seed=0
) -> INumEstimate:
    """N_tot times the single-photon accessible-information bracket.

    ``bracket_bits`` is the optimiser's message information on the
    key-averaged single-photon ensemble. ``literal_bracket_bits`` evaluates
    the entropy-minimisation expression (key average outside the entropy)
    at the same POVM; it counts information about the key as well and is
    never smaller. The multi-photon contribution is reported separately as
    N_tot^2 log2 n.
    """
    N = scheme.n_tot
    n = scheme.n_modes
    if N == 0:
        return INumEstimate(0.0, 0.0, 0.0, 0.0, 0.0)
    res = _single_photon_povm(scheme, restarts, iters, rng_seed)
    bracket = res.lower_bits
    literal = accinfo.entropy_min_objective(scheme.modes.key_unitaries, res.achieving_povm)
    return INumEstimate(
        i_num_bits=N * bracket,
        bracket_bits=bracket,
        literal_bracket_bits=literal,
        remainder_bound_bits=N**2 * math.log2(n),
        sector_weighted_bits=scheme.sector_norms()[1] * bracket,
    )


class KeyEfficiency(NamedTuple):
    inside: bool
    lower_limit: float
    lower_margin: float
    upper_margin: float


def key_efficiency_region(n_tot: float, epsilon: float, n: int, threshold: float = 0.1):
    """threshold >= N_tot > 4 log2(1/eps) / log2 n, with both margins reported."""
    if not (n_tot > 0 and 0 < epsilon <= 1 and n >= 2):
        raise ValueError("need N_tot > 0, 0 < eps <= 1 and n >= 2")
    lower = 4.0 * math.log2(1.0 / epsilon) / math.log2(n)
    lo_margin = n_tot - lower
    hi_margin = threshold - n_tot
    return KeyEfficiency(lo_margin > 0 and hi_margin >= 0, lower, lo_margin, hi_margin)
