"""Locking schemes, protocol evaluation, security criteria and key accounting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import accinfo
from .qcore import (
    CapabilityError,
    DensityOperator,
    Ensemble,
    KrausChannel,
    Povm,
    binary_entropy,
    classical_mutual_information,
    complementary_channel,
    haar_unitary,
    make_rng,
)

MAX_LABELS = 4096
SCHEME_FORMAT = "qdlock-scheme/1"


@dataclass(frozen=True, eq=False)
class LockingScheme:
    """Message basis |m> (standard basis) and |K| key unitaries on dimension |M|."""

    key_unitaries: tuple
    seed: int | None = None

    def __post_init__(self):
        units = [np.array(u, dtype=complex) for u in self.key_unitaries]
        if not units:
            raise ValueError("a locking scheme needs at least one key")
        d = units[0].shape[0]
        for u in units:
            if u.shape != (d, d):
                raise ValueError("key unitaries must share one square shape")
            if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-10:
                raise ValueError("key operator is not unitary")
            u.setflags(write=False)
        object.__setattr__(self, "key_unitaries", tuple(units))

    @property
    def msg_dim(self) -> int:
        return self.key_unitaries[0].shape[0]

    @property
    def num_keys(self) -> int:
        return len(self.key_unitaries)

    @property
    def key_bits(self) -> float:
        return math.log2(self.num_keys)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.key_unitaries)

    @classmethod
    def haar(cls, msg_dim: int, num_keys: int, seed: int = 0) -> "LockingScheme":
        rng = make_rng(seed)
        return cls(tuple(haar_unitary(msg_dim, rng) for _ in range(num_keys)), seed=seed)

    @classmethod
    def identity(cls, msg_dim: int) -> "LockingScheme":
        return cls((np.eye(msg_dim, dtype=complex),))

    @classmethod
    def shift_twirl(cls, msg_dim: int) -> "LockingScheme":
        """Keys X^k (cyclic shifts); the key average of every message is I/|M|."""
        shift = np.roll(np.eye(msg_dim, dtype=complex), 1, axis=0)
        return cls(tuple(np.linalg.matrix_power(shift, k) for k in range(msg_dim)))

    def encoded_vectors(self) -> np.ndarray:
        """Array [k, :, m] = U_k|m> (columns of each key unitary)."""
        return self.stacked

    def key_basis_povm(self, k: int = 0) -> Povm:
        return Povm.from_basis(self.key_unitaries[k])


# --------------------------------------------------------------------------
# scheme serialization
#
# JSON object, fields in this order:
#   format    "qdlock-scheme/1"
#   msg_dim   integer |M|
#   num_keys  integer |K|
#   seed      integer used for Haar regeneration, or null
#   unitaries list of |K| flat lists; unitary k is stored row-major with each
#             complex entry written as two floats (real, imag), so a list has
#             2*|M|*|M| numbers. Omitted (null) when only the seed is stored.


def scheme_to_json(scheme: LockingScheme, explicit: bool = True) -> str:
    if not explicit and scheme.seed is None:
        raise ValueError("scheme has no seed; explicit matrices are required")
    units = None
    if explicit:
        units = []
        for u in scheme.key_unitaries:
            flat = np.empty(2 * u.size)
            flat[0::2] = u.real.ravel()
            flat[1::2] = u.imag.ravel()
            units.append([float(x) for x in flat])
    doc = {
        "format": SCHEME_FORMAT,
        "msg_dim": scheme.msg_dim,
        "num_keys": scheme.num_keys,
        "seed": scheme.seed,
        "unitaries": units,
    }
    return json.dumps(doc)


def scheme_from_json(text: str) -> LockingScheme:
    doc = json.loads(text)
    if doc.get("format") != SCHEME_FORMAT:
        raise ValueError(f"unsupported scheme format {doc.get('format')!r}")
    d, nk, seed = int(doc["msg_dim"]), int(doc["num_keys"]), doc.get("seed")
    if doc.get("unitaries") is None:
        if seed is None:
            raise ValueError("scheme needs either a seed or explicit unitaries")
        return LockingScheme.haar(d, nk, seed)
    units = []
    for flat in doc["unitaries"]:
        arr = np.asarray(flat, dtype=float)
        if arr.size != 2 * d * d:
            raise ValueError("unitary entry has the wrong length")
        units.append((arr[0::2] + 1j * arr[1::2]).reshape(d, d))
    if len(units) != nk:
        raise ValueError("num_keys does not match the number of unitaries")
    return LockingScheme(tuple(units), seed=seed)


# --------------------------------------------------------------------------
# classical-quantum states


@dataclass(frozen=True, eq=False)
class CQState:
    """Block form of sum_l p_l |l><l| (x) sigma_l for classical labels l.

    ``probs`` has the label shape (for example (|M|, |K|)); ``states`` has that
    shape followed by (d, d).
    """

    probs: np.ndarray
    states: np.ndarray

    @property
    def label_shape(self) -> tuple:
        return self.probs.shape

    @property
    def dim(self) -> int:
        return self.states.shape[-1]

    def ensemble(self) -> Ensemble:
        """Flatten the labels (row-major) into an ensemble on the quantum part."""
        d = self.dim
        return Ensemble(self.probs.ravel(), self.states.reshape(-1, d, d))

    def quantum_marginal(self) -> np.ndarray:
        d = self.dim
        return np.einsum("l,lij->ij", self.probs.ravel(), self.states.reshape(-1, d, d))

    def to_density(self) -> DensityOperator:
        """Dense block-diagonal operator on labels (x) Q, labels in row-major order."""
        ens = self.ensemble()
        n, d = len(ens), ens.dim
        if n * d > 256:
            raise CapabilityError("dense cq state exceeds the 256-dimension limit")
        mat = np.zeros((n * d, n * d), dtype=complex)
        for i, (p, s) in enumerate(zip(ens.probs, ens.states)):
            mat[i * d : (i + 1) * d, i * d : (i + 1) * d] = p * s
        return DensityOperator(mat)


def _check_labels(scheme: LockingScheme) -> None:
    if scheme.msg_dim * scheme.num_keys > MAX_LABELS:
        raise CapabilityError(f"|M||K| exceeds {MAX_LABELS}")


def cq_state_with_key(scheme: LockingScheme) -> CQState:
    """rho_MKQ: uniform over (m, k) with U_k|m><m|U_k^dagger on Q."""
    _check_labels(scheme)
    d, nk = scheme.msg_dim, scheme.num_keys
    vecs = scheme.encoded_vectors()  # (k, i, m)
    states = np.einsum("kim,kjm->mkij", vecs, vecs.conj())
    return CQState(np.full((d, nk), 1.0 / (d * nk)), states)


def cq_state_without_key(scheme: LockingScheme) -> CQState:
    """rho_MQ: the key register traced out."""
    full = cq_state_with_key(scheme)
    return CQState(full.probs.sum(axis=1), full.states.mean(axis=1))


def locked_ensemble(scheme: LockingScheme) -> Ensemble:
    """Message-labelled ensemble seen by an adversary without the key."""
    return cq_state_without_key(scheme).ensemble()


def pair_ensemble(scheme: LockingScheme) -> Ensemble:
    """Ensemble labelled by the pair (m, k), row-major in m."""
    return cq_state_with_key(scheme).ensemble()


# --------------------------------------------------------------------------
# protocols


@dataclass(frozen=True, eq=False)
class LockingProtocolSpec:
    """Encoder states rho_{m,k} on A^n and one decoding POVM per key on B^n."""

    encoder_states: np.ndarray  # (M, K, dA^n, dA^n)
    decoder_povms: tuple  # K Povm objects, M outcomes each
    n: int = 1
    epsilon: float = 0.0

    def __post_init__(self):
        enc = np.array(self.encoder_states, dtype=complex)
        if enc.ndim != 4:
            raise ValueError("encoder states must have shape (M, K, d, d)")
        if len(self.decoder_povms) != enc.shape[1]:
            raise ValueError("need exactly one decoder POVM per key")
        for povm in self.decoder_povms:
            if len(povm) != enc.shape[0]:
                raise ValueError("decoder POVMs need one outcome per message")
        enc.setflags(write=False)
        object.__setattr__(self, "encoder_states", enc)

    @property
    def num_messages(self) -> int:
        return self.encoder_states.shape[0]

    @property
    def num_keys(self) -> int:
        return self.encoder_states.shape[1]

    @property
    def rate(self) -> float:
        return math.log2(self.num_messages) / self.n

    @property
    def key_bits(self) -> float:
        return math.log2(self.num_keys)


def protocol_from_scheme(
    scheme: LockingScheme, out_dim: int | None = None, epsilon: float = 0.0
) -> LockingProtocolSpec:
    """Single-use protocol: encode U_k|m>, decode by undoing U_k and reading the basis.

    With ``out_dim = |M| + 1`` the extra output level is an erasure/no-click
    flag, on which the decoder guesses uniformly.
    """
    st = cq_state_with_key(scheme).states
    d = scheme.msg_dim
    out_dim = d if out_dim is None else out_dim
    povms = []
    for u in scheme.key_unitaries:
        els = []
        for m in range(d):
            e = np.zeros((out_dim, out_dim), dtype=complex)
            e[:d, :d] = np.outer(u[:, m], u[:, m].conj())
            if out_dim > d:
                e[d:, d:] = np.eye(out_dim - d) / d
            els.append(e)
        povms.append(Povm(tuple(els)))
    return LockingProtocolSpec(st, tuple(povms), n=1, epsilon=epsilon)


def decode_success_probability(proto: LockingProtocolSpec, ch: KrausChannel) -> float:
    """(1/|M||K|) sum_{m,k} Tr[Lambda_m^(k) N^{(x)n}(rho_{m,k})]."""
    chn = ch.tensor_power(proto.n) if proto.n > 1 else ch
    enc = proto.encoder_states
    if chn.in_dim != enc.shape[-1]:
        raise ValueError("channel input does not match the encoder dimension")
    if chn.out_dim != proto.decoder_povms[0].dim:
        raise ValueError("channel output does not match the decoder dimension")
    M, K = enc.shape[:2]
    total = 0.0
    for k, povm in enumerate(proto.decoder_povms):
        els = povm.stacked
        for m in range(M):
            out = chn.apply(enc[m, k])
            total += float(np.real(np.trace(els[m] @ out)))
    return min(max(total / (M * K), 0.0), 1.0)


def bob_information(proto: LockingProtocolSpec, ch: KrausChannel) -> float:
    """I(M; M_hat) for the key-aided decoder; a lower bound on I_acc(M;KB)."""
    chn = ch.tensor_power(proto.n) if proto.n > 1 else ch
    enc = proto.encoder_states
    M, K = enc.shape[:2]
    joint = np.zeros((M, M))
    for k, povm in enumerate(proto.decoder_povms):
        for m in range(M):
            joint[m] += povm.probabilities(chn.apply(enc[m, k])) / (M * K)
    joint = np.clip(joint, 0.0, None)
    return classical_mutual_information(joint / joint.sum())


def eve_states(proto: LockingProtocolSpec, eve_channel: KrausChannel | None) -> Ensemble:
    """Key-averaged states reaching Eve; ``None`` gives her the channel input."""
    enc = proto.encoder_states
    M = enc.shape[0]
    avg = enc.mean(axis=1)
    if eve_channel is not None:
        chn = eve_channel.tensor_power(proto.n) if proto.n > 1 else eve_channel
        avg = np.array([chn.apply(s) for s in avg])
    avg = 0.5 * (avg + avg.conj().transpose(0, 2, 1))
    return Ensemble(np.full(M, 1.0 / M), avg)


@dataclass
class SecurityFragment:
    joint: np.ndarray
    per_outcome_var_dist: np.ndarray
    max_var_dist: float
    mutual_info_bits: float
    skipped_outcomes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "per_outcome_var_dist": [float(x) for x in self.per_outcome_var_dist],
            "max_var_dist": self.max_var_dist,
            "mutual_info_bits": self.mutual_info_bits,
            "skipped_outcomes": list(self.skipped_outcomes),
        }


def security_from_joint(joint: np.ndarray, zero_tol: float = 1e-12) -> SecurityFragment:
    """Variational distances sum_m |p_M(m) - p_{M|Y}(m|y)| for every outcome y."""
    joint = np.asarray(joint, dtype=float)
    pm = joint.sum(axis=1)
    py = joint.sum(axis=0)
    dists, skipped = [], []
    for y, q in enumerate(py):
        if q <= zero_tol:
            skipped.append(y)
            continue
        dists.append(float(np.sum(np.abs(pm - joint[:, y] / q))))
    dists = np.array(dists)
    return SecurityFragment(
        joint=joint,
        per_outcome_var_dist=dists,
        max_var_dist=float(dists.max()) if dists.size else 0.0,
        mutual_info_bits=classical_mutual_information(joint),
        skipped_outcomes=skipped,
    )


def eve_security_eval(
    proto: LockingProtocolSpec, eve_channel: KrausChannel | None, adversary_povm: Povm
) -> SecurityFragment:
    """Security criterion for one adversary measurement.

    ``eve_channel=None`` is strong locking (Eve holds A^n); for weak locking
    pass the complementary channel.
    """
    ens = eve_states(proto, eve_channel)
    return security_from_joint(ens.joint_distribution(adversary_povm))


def fannes_audenaert_acc_bound(epsilon: float, n: int, rate: float) -> float:
    """h2(eps/2) + eps n R / 2, the accessible-information cap implied by the criterion."""
    if not 0.0 <= epsilon <= 2.0:
        raise ValueError("epsilon must lie in [0, 2]")
    return binary_entropy(min(epsilon / 2.0, 1.0)) + epsilon * n * rate / 2.0


class Ratios(NamedTuple):
    r1: float | None
    r2: float | None


def ratios_r1_r2(acc_without_key: float, acc_with_key: float, key_bits: float) -> Ratios:
    """r1 = without/with, r2 = key_bits/(with - without); None where undefined."""
    r1 = acc_without_key / acc_with_key if acc_with_key > 1e-12 else None
    gap = acc_with_key - acc_without_key
    r2 = key_bits / gap if gap > 1e-12 else None
    return Ratios(r1, r2)


def classical_inequality_check(p_myk, tol: float = 1e-9) -> tuple[bool, float]:
    """Check I(M;YK) - I(M;Y) <= log2|K| for a joint table p[m, y, k].

    Returns (holds, slack) with slack = log2|K| - (I(M;YK) - I(M;Y)).
    """
    p = np.asarray(p_myk, dtype=float)
    if p.ndim != 3:
        raise ValueError("joint distribution must have shape (M, Y, K)")
    p = p / p.sum()
    M, Y, K = p.shape
    i_yk = classical_mutual_information(p.reshape(M, Y * K))
    i_y = classical_mutual_information(p.sum(axis=2))
    slack = math.log2(K) - (i_yk - i_y)
    return slack >= -tol, float(slack)


def parallel_compose_security(eps1: float, eps2: float) -> float:
    if eps1 < 0 or eps2 < 0:
        raise ValueError("security parameters must be nonnegative")
    return eps1 + eps2


def parallel_acc_bound(gamma: float, n: int, env_dim: int) -> float:
    """(gamma n) log2(d_E^n) + h2(gamma n) for n uses each with guarantee gamma."""
    eps = parallel_compose_security(0.0, gamma * n)
    return eps * n * math.log2(env_dim) + binary_entropy(min(eps, 1.0))


def fhs_key_length(epsilon: float, c_loglog: float = 1.0) -> float:
    """4 log2(1/eps) + c log2 log2(1/eps) key bits; a planning figure, not a proof."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    inv = math.log2(1.0 / epsilon)
    return 4.0 * inv + c_loglog * math.log2(inv)


def premeasurement_joint(
    proto: LockingProtocolSpec, ch: KrausChannel | None, povm: Povm
) -> np.ndarray:
    """p(m, y) for a key-independent measurement after the channel (None = no channel).

    When Bob's decoder factors as this measurement followed by classical
    processing with the key, an adversary holding the channel input can apply
    the channel herself and obtain exactly the same joint distribution.
    """
    return eve_states(proto, ch).joint_distribution(povm)


# --------------------------------------------------------------------------
# end-to-end report


@dataclass
class SecurityReport:
    success_prob: float
    bob_info_bits: float
    per_outcome_var_dist: np.ndarray
    max_var_dist: float
    fa_acc_bound_bits: float
    r1: float | None
    r2: float | None
    key_bits: float
    locked_bits: float
    adversary: accinfo.AdversarySuiteResult
    mode: str
    structural_independence: bool

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "success_prob": self.success_prob,
            "bob_info_bits": self.bob_info_bits,
            "per_outcome_var_dist": [float(x) for x in self.per_outcome_var_dist],
            "max_var_dist": self.max_var_dist,
            "fa_acc_bound_bits": self.fa_acc_bound_bits,
            "r1": self.r1,
            "r2": self.r2,
            "key_bits": self.key_bits,
            "locked_bits": self.locked_bits,
            "eve_state_independent_of_message": self.structural_independence,
            "adversary": self.adversary.as_dict(),
        }


def evaluate_protocol(
    scheme: LockingScheme,
    channel: KrausChannel | None = None,
    mode: str = "strong",
    rng_seed=0,
    restarts: int = 2,
    iters: int = 200,
    threads: int = 1,
) -> SecurityReport:
    """Decode, attack with the adversary suite, and compute ratios.

    Security is stated against the suite plus the optimised rank-one POVM
    only, except when Eve's states do not depend on the message at all.
    """
    d = scheme.msg_dim
    channel = KrausChannel.identity(d) if channel is None else channel
    out_dim = channel.out_dim if channel.out_dim != d else None
    proto = protocol_from_scheme(scheme, out_dim=out_dim)
    if mode == "strong":
        eve_ch = None
    elif mode == "weak":
        eve_ch = complementary_channel(channel)
    else:
        raise ValueError("mode must be 'strong' or 'weak'")
    ens = eve_states(proto, eve_ch)
    extra = {}
    if eve_ch is None:
        extra["key_basis"] = scheme.key_basis_povm(0)
    suite = accinfo.adversary_suite(
        ens, rng_seed=rng_seed, restarts=restarts, iters=iters, extra_povms=extra, threads=threads
    )
    frag = security_from_joint(ens.joint_distribution(suite.optimized.achieving_povm))
    independent = bool(np.max(np.abs(ens.states - ens.states[0])) < 1e-12)
    bob = bob_information(proto, channel)
    ratios = ratios_r1_r2(suite.best_bits, bob, scheme.key_bits)
    return SecurityReport(
        success_prob=decode_success_probability(proto, channel),
        bob_info_bits=bob,
        per_outcome_var_dist=frag.per_outcome_var_dist,
        max_var_dist=frag.max_var_dist,
        fa_acc_bound_bits=fannes_audenaert_acc_bound(min(frag.max_var_dist, 2.0), 1, proto.rate),
        r1=ratios.r1,
        r2=ratios.r2,
        key_bits=scheme.key_bits,
        locked_bits=math.log2(d),
        adversary=suite,
        mode=mode,
        structural_independence=independent,
    )
