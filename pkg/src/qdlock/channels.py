"""Channel zoo, entanglement-breaking tests, single-letter locking bounds and wiretaps.

Every capacity-like number produced here is single-letter (one channel use);
regularised quantities are never computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from . import accinfo
from .qcore import (
    CapabilityError,
    Ensemble,
    KrausChannel,
    Povm,
    _entropy_unchecked,
    classical_mutual_information,
    complementary_channel,
    haar_unitary,
    make_rng,
    partial_transpose,
    random_density_matrix,
    random_pure_state,
)

EB = "EntanglementBreaking"
NOT_EB = "NotEB"
UNDECIDED = "Undecided"
PPT_TOL = 1e-9
MAX_SEARCH_DIM = 16


def _channel(ops, tol: float = 0.0) -> KrausChannel:
    """KrausChannel with exactly-zero operators dropped."""
    kept = [np.asarray(a, dtype=complex) for a in ops if np.max(np.abs(a)) > tol]
    return KrausChannel(tuple(kept))


def _check_prob(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


# --------------------------------------------------------------------------
# zoo


def weyl_operators(d: int) -> list[np.ndarray]:
    """X^a Z^b for a, b in 0..d-1, with (0, 0) first."""
    x = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
        for a in range(d)
        for b in range(d)
    ]


def depolarizing(d: int, p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p I/d, via the Weyl twirl."""
    _check_prob(p)
    ws = weyl_operators(d)
    ops = [math.sqrt(1 - p + p / d**2) * ws[0]]
    ops += [math.sqrt(p / d**2) * w for w in ws[1:]]
    return _channel(ops)


def erasure(d: int, p: float) -> KrausChannel:
    """With probability p replace the input by a flag |d> orthogonal to the input space."""
    _check_prob(p)
    keep = np.zeros((d + 1, d), dtype=complex)
    keep[:d, :d] = np.eye(d)
    ops = [math.sqrt(1 - p) * keep]
    for i in range(d):
        e = np.zeros((d + 1, d), dtype=complex)
        e[d, i] = math.sqrt(p)
        ops.append(e)
    return _channel(ops)


def dephasing(d: int, p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p diag(rho)."""
    _check_prob(p)
    ops = [math.sqrt(1 - p) * np.eye(d, dtype=complex)]
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = math.sqrt(p)
        ops.append(e)
    return _channel(ops)


def amplitude_damping(gamma: float) -> KrausChannel:
    _check_prob(gamma, "gamma")
    a0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    a1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return _channel([a0, a1])


def constant_channel(in_dim: int, state) -> KrausChannel:
    """rho -> Tr(rho) sigma."""
    sigma = np.asarray(state, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    ops = []
    for val, vec in zip(w, v.T):
        if val > 1e-15:
            for i in range(in_dim):
                ops.append(math.sqrt(val) * np.outer(vec, np.eye(in_dim)[i]))
    return _channel(ops)


def measure_prepare(povm: Povm, states: Sequence) -> KrausChannel:
    """rho -> sum_y Tr(Gamma_y rho) sigma_y, written with rank-one Kraus operators."""
    if len(states) != len(povm):
        raise ValueError("need one prepared state per POVM outcome")
    ops = []
    for el, sig in zip(povm.elements, states):
        gw, gv = np.linalg.eigh(el)
        sw, sv = np.linalg.eigh(np.asarray(sig, dtype=complex))
        for a, ga in zip(gw, gv.T):
            if a <= 1e-15:
                continue
            for b, sb in zip(sw, sv.T):
                if b <= 1e-15:
                    continue
                ops.append(math.sqrt(a * b) * np.outer(sb, ga.conj()))
    return _channel(ops)


def random_measure_prepare(
    in_dim: int, out_dim: int, outcomes: int, rng_seed=None, mixed: bool = True
) -> KrausChannel:
    """Random rank-one POVM (from a Haar isometry) followed by random state preparation."""
    rng = make_rng(rng_seed)
    if outcomes < in_dim:
        raise ValueError("need at least in_dim outcomes for a complete POVM")
    iso = haar_unitary(outcomes, rng)[:, :in_dim]  # rows give the POVM vectors
    povm = Povm(tuple(np.outer(r.conj(), r) for r in iso))
    if mixed:
        states = [random_density_matrix(out_dim, rng_seed=rng) for _ in range(outcomes)]
    else:
        states = []
        for _ in range(outcomes):
            v = random_pure_state(out_dim, rng)
            states.append(np.outer(v, v.conj()))
    return measure_prepare(povm, states)


def hadamard_qc_channel(ops: Sequence) -> KrausChannel:
    """rho -> sum_x A_x rho A_x^dagger (x) |x><x|; the environment output is classical in x."""
    ops = [np.asarray(a, dtype=complex) for a in ops]
    n = len(ops)
    total = sum(a.conj().T @ a for a in ops)
    if np.max(np.abs(total - np.eye(ops[0].shape[1]))) > 1e-10:
        raise ValueError("operators A_x do not satisfy sum A_x^dagger A_x = I")
    kraus = []
    for x, a in enumerate(ops):
        e = np.zeros((n, 1))
        e[x] = 1.0
        kraus.append(np.kron(a, e))
    return KrausChannel(tuple(kraus))


def build_channel(cfg: dict) -> KrausChannel:
    """Channel from a config mapping: ``{"name": ..., params}`` or explicit Kraus arrays.

    Explicit form: ``{"kraus_real": [...], "kraus_imag": [...]}`` with one
    nested list per operator (imaginary part optional).
    """
    cfg = dict(cfg)
    if "kraus_real" in cfg:
        re = np.asarray(cfg["kraus_real"], dtype=float)
        im = np.asarray(cfg.get("kraus_imag", np.zeros_like(re)), dtype=float)
        return KrausChannel(tuple(re + 1j * im))
    name = cfg.pop("name")
    dim = int(cfg.get("dim", 2))
    if name == "identity":
        return KrausChannel.identity(dim)
    if name == "depolarizing":
        return depolarizing(dim, float(cfg["p"]))
    if name == "erasure":
        return erasure(dim, float(cfg["p"]))
    if name == "dephasing":
        return dephasing(dim, float(cfg["p"]))
    if name == "amplitude_damping":
        return amplitude_damping(float(cfg["gamma"]))
    if name == "constant":
        out = int(cfg.get("out_dim", dim))
        return constant_channel(dim, np.eye(out) / out)
    if name == "measure_prepare":
        return random_measure_prepare(
            dim, int(cfg.get("out_dim", dim)), int(cfg.get("outcomes", dim)), cfg.get("seed", 0)
        )
    if name == "hadamard_dephasing":
        q = float(cfg["q"])
        z = np.diag([1.0, -1.0])
        return hadamard_qc_channel([math.sqrt(q) * np.eye(2), math.sqrt(1 - q) * z])
    raise ValueError(f"unknown channel name {name!r}")


# --------------------------------------------------------------------------
# entanglement breaking


@dataclass
class EbVerdict:
    verdict: str
    min_pt_eigenvalue: float
    decisive: bool
    witness: str

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_pt_eigenvalue": self.min_pt_eigenvalue,
            "decisive": self.decisive,
            "witness": self.witness,
        }


def is_entanglement_breaking(ch: KrausChannel) -> EbVerdict:
    """PPT test on the normalised Choi state; decisive for 2x2 and 2x3 systems."""
    choi = ch.choi() / ch.in_dim
    pt = partial_transpose(choi, (ch.in_dim, ch.out_dim), 1)
    lam = float(np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0])
    decisive = ch.in_dim * ch.out_dim <= 6
    if lam <= -PPT_TOL:
        return EbVerdict(NOT_EB, lam, True, "negative partial-transpose eigenvalue")
    if all(np.linalg.matrix_rank(a, tol=1e-10) <= 1 for a in ch.kraus_ops):
        return EbVerdict(EB, lam, True, "rank-one Kraus representation")
    if decisive:
        return EbVerdict(EB, lam, True, "PPT Choi state on a 2x2 or 2x3 system")
    return EbVerdict(UNDECIDED, lam, False, "PPT beyond the decisive dimensions")


def _rank_one_factor(op: np.ndarray, tol: float = 1e-10) -> np.ndarray | None:
    u, s, vh = np.linalg.svd(op)
    if s.size > 1 and s[1] > tol * max(s[0], 1.0):
        return None
    return s[0] * np.outer(u[:, 0], vh[0])


def qubit_depolarizing_rank_one_kraus(p: float) -> list[np.ndarray]:
    """Rank-one Kraus form of the qubit depolarizing channel for p >= 2/3.

    Mixture of the tetrahedral measure-and-prepare channel (weight
    lam = 3(1 - p)) and the constant channel I/2.
    """
    if p < 2.0 / 3.0 - 1e-9:
        raise ValueError("qubit depolarizing channel is not entanglement breaking for p < 2/3")
    lam = min(1.0, 3.0 * (1.0 - p))
    ops = []
    if lam > 0:
        dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
        for n in dirs:
            theta, phi = math.acos(n[2]), math.atan2(n[1], n[0])
            t = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
            ops.append(math.sqrt(lam / 2) * np.outer(t, t.conj()))
    if lam < 1:
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2), dtype=complex)
                e[j, i] = math.sqrt((1 - lam) / 2)
                ops.append(e)
    return ops


def rank_one_kraus_form(ch: KrausChannel) -> list[np.ndarray]:
    """Rank-one Kraus operators for the same channel, when one can be constructed.

    Handles channels already in rank-one form and the entanglement-breaking
    qubit depolarizing family; other inputs raise :class:`CapabilityError`.
    """
    factors = [_rank_one_factor(a) for a in ch.kraus_ops]
    if all(f is not None for f in factors):
        return factors
    if ch.in_dim == 2 and ch.out_dim == 2:
        off = ch.apply(np.array([[0, 1], [0, 0]], dtype=complex))
        p = float(1.0 - off[0, 1].real)
        if 2.0 / 3.0 - 1e-9 <= p <= 1.0 and np.allclose(
            ch.choi(), depolarizing(2, p).choi(), atol=1e-10
        ):
            return qubit_depolarizing_rank_one_kraus(p)
    raise CapabilityError("no rank-one Kraus construction available for this channel")


def eb_environment_povm(ch: KrausChannel) -> tuple[Povm, list[np.ndarray]]:
    """Environment measurement that lets Eve simulate an EB channel.

    With rank-one Kraus operators R_y = |psi_y><phi_y|, measuring the
    environment of that representation in {|y>} and preparing the
    normalised |psi_y> reproduces the channel. The measurement is pulled back
    to the environment of ``complementary_channel(ch)`` through R = W A,
    giving Gamma_y = W^dagger |y><y| W (completed by I - W^dagger W).
    Returns the POVM and the normalised prepared vectors.
    """
    rank_one = rank_one_kraus_form(ch)
    A = np.array([a.ravel() for a in ch.kraus_ops])
    B = np.array([r.ravel() for r in rank_one])
    W = B @ np.linalg.pinv(A)
    if np.max(np.abs(W @ A - B)) > 1e-8:
        raise CapabilityError("rank-one representation is not related to the given Kraus form")
    n_env = A.shape[0]
    els = [np.outer(w.conj(), w) for w in W]
    rest = np.eye(n_env) - W.conj().T @ W
    rest = 0.5 * (rest + rest.conj().T)
    if np.max(np.abs(rest)) > 1e-10:
        els.append(rest)
    preps = []
    for r in rank_one:
        u, s, _ = np.linalg.svd(r)
        preps.append(u[:, 0])
    if len(els) > len(preps):
        preps.append(np.eye(ch.out_dim)[0])  # unused outcome, never occurs
    return Povm(tuple(els)), preps


class EbCertificate(NamedTuple):
    slack: float
    i_xb_bits: float
    i_x_env_bits: float
    simulation_error: float


def eb_zero_capacity_certificate(ch: KrausChannel, ens: Ensemble) -> EbCertificate:
    """I(X;B) - I(X;Y_env) for the environment measure-and-prepare simulation.

    Nonpositive (up to rounding) because Bob's output is a processing of Y_env.
    ``simulation_error`` is the largest 1-norm gap between N(rho_x) and the
    state prepared from the environment outcome.
    """
    povm, preps = eb_environment_povm(ch)
    env = complementary_channel(ch)
    env_states = np.array([env.apply(s) for s in ens.states])
    cond = np.real(np.einsum("yij,xji->xy", povm.stacked, env_states))
    cond = np.clip(cond, 0.0, None)
    joint = ens.probs[:, None] * cond
    i_env = classical_mutual_information(joint / joint.sum())
    i_b = accinfo.holevo_chi(ens.map(ch))
    proj = np.array([np.outer(v, v.conj()) for v in preps])
    err = 0.0
    for s, row in zip(ens.states, cond):
        sim = np.einsum("y,yij->ij", row, proj)
        err = max(err, float(np.sum(np.linalg.svd(ch.apply(s) - sim, compute_uv=False))))
    return EbCertificate(i_b - i_env, i_b, i_env, err)


# --------------------------------------------------------------------------
# single-letter weak-locking quantity


def _chi_of_states(probs: np.ndarray, states: np.ndarray) -> float:
    avg = np.einsum("x,xij->ij", probs, states)
    return _entropy_unchecked(avg) - float(
        sum(p * _entropy_unchecked(s) for p, s in zip(probs, states) if p > 0)
    )


def _ensemble_from_params(x: np.ndarray, d: int, n: int, mixed: bool) -> Ensemble:
    k = d if mixed else 1
    size = d * n * k
    g = (x[:size] + 1j * x[size : 2 * size]).reshape(n, d, k)
    logits = x[2 * size :]
    probs = np.exp(logits - logits.max())
    probs /= probs.sum()
    states = np.einsum("nik,njk->nij", g, g.conj())
    tr = np.real(np.einsum("nii->n", states))
    states = states / np.maximum(tr, 1e-300)[:, None, None]
    return Ensemble(probs, states)


def _basis_ensembles(d: int) -> list[Ensemble]:
    out = [Ensemble.from_pure(np.eye(d))]
    out.append(Ensemble.from_pure(accinfo.fourier_matrix(d)))
    out.append(Ensemble(np.array([1.0]), np.diag(np.eye(d)[0]).astype(complex)[None]))
    return out


@dataclass
class WeakLockInterval:
    lower_bits: float
    upper_bits: float
    candidates: int
    best_lower_ensemble: Ensemble = field(repr=False)
    best_upper_ensemble: Ensemble = field(repr=False)
    label: str = "single-letter / fixed-n"

    def as_dict(self) -> dict:
        return {
            "lower_bits": self.lower_bits,
            "upper_bits": self.upper_bits,
            "candidates": self.candidates,
            "label": self.label,
        }


def _search_ensembles(
    objective, d: int, num_states: int, starts: int, rng, mixed: bool, maxiter: int
) -> list[Ensemble]:
    found = []
    k = d if mixed else 1
    size = 2 * d * num_states * k + num_states
    for _ in range(starts):
        x0 = rng.standard_normal(size)

        def neg(x):
            return -objective(_ensemble_from_params(x, d, num_states, mixed))

        res = minimize(neg, x0, method="L-BFGS-B", options={"maxiter": maxiter})
        found.append(_ensemble_from_params(res.x, d, num_states, mixed))
    return found


def weak_lock_objective(ch: KrausChannel, ens: Ensemble, env: KrausChannel | None = None):
    """(I(X;B), chi(X;E)) for one input ensemble."""
    env = complementary_channel(ch) if env is None else env
    return (
        accinfo.holevo_chi(ens.map(ch)),
        accinfo.holevo_chi(ens.map(env)),
    )


def weak_lock_upper_single_letter(
    ch: KrausChannel,
    starts: int = 3,
    random_ensembles: int = 4,
    num_states: int | None = None,
    acc_restarts: int = 1,
    acc_iters: int = 100,
    rng_seed=0,
    mixed: bool = False,
    maxiter: int = 200,
) -> WeakLockInterval:
    """Interval for max over ensembles of I(X;B) - I_acc(X;E).

    Candidates are the trivial, standard-basis and Fourier-basis ensembles,
    random pure ensembles and ensembles optimised for I(X;B) - chi(X;E) by
    multistart L-BFGS. For each candidate, chi(X;E) and an accessible-
    information lower bound bracket I_acc(X;E). When the channel has a
    rank-one Kraus form, its environment measurement seeds the optimiser.
    """
    if starts + random_ensembles <= 0:
        raise ValueError("ensemble search budget must be positive")
    d = ch.in_dim
    if d > MAX_SEARCH_DIM:
        raise CapabilityError(f"ensemble search limited to input dimension {MAX_SEARCH_DIM}")
    n = num_states or (d * d if d <= 4 else 2 * d)
    n = min(n, d * d)
    rng = make_rng(rng_seed)
    env = complementary_channel(ch)
    try:
        seeds = [eb_environment_povm(ch)[0]]
    except CapabilityError:
        seeds = []
    seeds.append(accinfo.standard_basis_povm(env.out_dim))

    def surrogate(ens):
        ib, ce = weak_lock_objective(ch, ens, env)
        return ib - ce

    cands = _basis_ensembles(d)
    for _ in range(random_ensembles):
        vecs = np.array([random_pure_state(d, rng) for _ in range(n)]).T
        cands.append(Ensemble.from_pure(vecs, rng.dirichlet(np.ones(n))))
    cands += _search_ensembles(surrogate, d, n, starts, rng, mixed, maxiter)

    best_lo, best_hi = -np.inf, -np.inf
    ens_lo = ens_hi = cands[0]
    for i, ens in enumerate(cands):
        ib, ce = weak_lock_objective(ch, ens, env)
        env_ens = ens.map(env)
        acc = accinfo.acc_info_optimize(
            env_ens,
            restarts=acc_restarts,
            iters=acc_iters,
            rng_seed=[int(rng_seed) if np.isscalar(rng_seed) else 0, i],
            initial_povms=[
                p
                for p in seeds + [accinfo.pretty_good_measurement(env_ens)]
                if accinfo.within_rank_one_cap(p)
            ],
        ).lower_bits
        if ib - ce > best_lo:
            best_lo, ens_lo = ib - ce, ens
        if ib - acc > best_hi:
            best_hi, ens_hi = ib - acc, ens
    return WeakLockInterval(float(best_lo), float(best_hi), len(cands), ens_lo, ens_hi)


def env_is_classical(ch: KrausChannel, samples: int = 8, rng_seed=0, tol: float = 1e-10) -> bool:
    """True when the complementary output is diagonal for random inputs."""
    env = complementary_channel(ch)
    rng = make_rng(rng_seed)
    for _ in range(samples):
        out = env.apply(random_density_matrix(ch.in_dim, rng_seed=rng))
        if np.max(np.abs(out - np.diag(np.diag(out)))) > tol:
            return False
    return True


def hadamard_weak_capacity(
    ch: KrausChannel, starts: int = 4, num_states: int | None = None, rng_seed=0, maxiter: int = 300
) -> float:
    """Single-letter max of I(X;B) - I(X;E) for channels with a classical environment.

    For such channels I_acc(X;E) = chi(X;E), so the weak-locking quantity
    equals the private-information quantity.
    """
    if not env_is_classical(ch):
        raise ValueError("complementary channel output is not diagonal; not a Hadamard channel")
    d = ch.in_dim
    n = min(num_states or d * d, d * d)
    env = complementary_channel(ch)
    rng = make_rng(rng_seed)

    def obj(ens):
        ib, ce = weak_lock_objective(ch, ens, env)
        return ib - ce

    cands = _basis_ensembles(d) + _search_ensembles(obj, d, n, starts, rng, False, maxiter)
    return float(max(obj(e) for e in cands))


def discord_gap(ch: KrausChannel, ens: Ensemble, restarts: int = 2, iters: int = 200, rng_seed=0):
    """chi(X;E) - (accessible-information lower bound on X;E) for one ensemble."""
    env_ens = ens.map(complementary_channel(ch))
    res = accinfo.acc_info_optimize(
        env_ens,
        restarts=restarts,
        iters=iters,
        rng_seed=rng_seed,
        initial_povms=[
            p
            for p in (
                accinfo.standard_basis_povm(env_ens.dim),
                accinfo.pretty_good_measurement(env_ens),
            )
            if accinfo.within_rank_one_cap(p)
        ],
    )
    return res.upper_bits - res.lower_bits


# --------------------------------------------------------------------------
# wiretap channels


def _choi_close(a: KrausChannel, b: KrausChannel, tol: float = 1e-9) -> bool:
    return (a.in_dim, a.out_dim) == (b.in_dim, b.out_dim) and bool(
        np.max(np.abs(a.choi() - b.choi())) < tol
    )


@dataclass(frozen=True, eq=False)
class WiretapChannel:
    """Isometry A -> B (x) E (x) F with B, E, F in that tensor order."""

    isometry: np.ndarray
    b_dim: int
    e_dim: int
    f_dim: int = 1
    degrading_map: KrausChannel | None = None
    label: str = ""

    def __post_init__(self):
        v = np.array(self.isometry, dtype=complex)
        if v.shape[0] != self.b_dim * self.e_dim * self.f_dim:
            raise ValueError("isometry rows must equal b_dim * e_dim * f_dim")
        if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))) > 1e-10:
            raise ValueError("wiretap map is not an isometry")
        v.setflags(write=False)
        object.__setattr__(self, "isometry", v)
        if self.degrading_map is not None and not _choi_close(
            self.degrading_map.compose(self.channel_b()), self.channel_e()
        ):
            raise ValueError("degrading map does not reproduce the eavesdropper channel")

    @property
    def in_dim(self) -> int:
        return self.isometry.shape[1]

    def _tensor(self) -> np.ndarray:
        return self.isometry.reshape(self.b_dim, self.e_dim, self.f_dim, self.in_dim)

    def channel_b(self) -> KrausChannel:
        t = self._tensor()
        return _channel([t[:, e, f, :] for e in range(self.e_dim) for f in range(self.f_dim)])

    def channel_e(self) -> KrausChannel:
        t = self._tensor()
        return _channel([t[b, :, f, :] for b in range(self.b_dim) for f in range(self.f_dim)])

    @property
    def constructively_degraded(self) -> bool:
        return self.degrading_map is not None

    @classmethod
    def from_degradable(cls, ch: KrausChannel, degrading_map: KrausChannel, label: str = ""):
        """Bob gets N, Eve gets the complementary output; requires D o N = N^c."""
        t = ch.stacked  # (n, out, in)
        iso = t.transpose(1, 0, 2).reshape(ch.out_dim * len(t), ch.in_dim)
        return cls(iso, ch.out_dim, len(t), 1, degrading_map, label)

    @classmethod
    def with_constant_eve(cls, ch: KrausChannel, label: str = ""):
        """Eve's output is one-dimensional; the whole environment goes to F."""
        t = ch.stacked
        iso = t.transpose(1, 0, 2).reshape(ch.out_dim * len(t), ch.in_dim)
        trivial = KrausChannel(tuple(np.eye(1, ch.out_dim, k) for k in range(ch.out_dim)))
        return cls(iso, ch.out_dim, 1, len(t), trivial, label)

    def tensor(self, other: "WiretapChannel") -> "WiretapChannel":
        """Parallel use, regrouped as (B1 B2) (x) (E1 E2) (x) (F1 F2)."""
        t1, t2 = self._tensor(), other._tensor()
        t = np.einsum("abci,defj->adbecfij", t1, t2)
        iso = t.reshape(
            self.b_dim * other.b_dim * self.e_dim * other.e_dim * self.f_dim * other.f_dim,
            self.in_dim * other.in_dim,
        )
        deg = None
        if self.degrading_map is not None and other.degrading_map is not None:
            deg = self.degrading_map.tensor(other.degrading_map)
        return WiretapChannel(
            iso,
            self.b_dim * other.b_dim,
            self.e_dim * other.e_dim,
            self.f_dim * other.f_dim,
            deg,
            f"{self.label}(x){other.label}",
        )


def degrading_map_amplitude_damping(gamma: float) -> KrausChannel:
    if gamma > 0.5:
        raise ValueError("amplitude damping is degradable only for gamma <= 1/2")
    return amplitude_damping((1 - 2 * gamma) / (1 - gamma))


def degrading_map_erasure(d: int, p: float) -> KrausChannel:
    """Maps erasure(p) output (flag last) to the environment ordering (flag first)."""
    if p > 0.5:
        raise ValueError("erasure is degradable only for p <= 1/2")
    q = p / (1 - p)
    shift = np.zeros((d + 1, d + 1), dtype=complex)
    for i in range(d):
        shift[i + 1, i] = math.sqrt(q)
    ops = [shift]
    for i in range(d):
        e = np.zeros((d + 1, d + 1), dtype=complex)
        e[0, i] = math.sqrt(1 - q)
        ops.append(e)
    flag = np.zeros((d + 1, d + 1), dtype=complex)
    flag[0, d] = 1.0
    ops.append(flag)
    return _channel(ops)


def degrading_map_hadamard(b_dim: int, n_labels: int) -> KrausChannel:
    """Discard the quantum part of a Hadamard output B (x) X, keeping the label."""
    ops = []
    for i in range(b_dim):
        ops.append(np.kron(np.eye(1, b_dim, i), np.eye(n_labels)))
    return KrausChannel(tuple(ops))


def amplitude_damping_wiretap(gamma: float) -> WiretapChannel:
    return WiretapChannel.from_degradable(
        amplitude_damping(gamma), degrading_map_amplitude_damping(gamma), f"ad({gamma})"
    )


def erasure_wiretap(d: int, p: float) -> WiretapChannel:
    return WiretapChannel.from_degradable(
        erasure(d, p), degrading_map_erasure(d, p), f"erasure({p})"
    )


def hadamard_dephasing_wiretap(q: float) -> WiretapChannel:
    z = np.diag([1.0, -1.0])
    ch = hadamard_qc_channel([math.sqrt(q) * np.eye(2), math.sqrt(1 - q) * z])
    return WiretapChannel.from_degradable(ch, degrading_map_hadamard(2, 2), f"hadamard({q})")


def private_information(wt: WiretapChannel, ens: Ensemble) -> float:
    """I(X;B) - I(X;E); may be negative."""
    return accinfo.holevo_chi(ens.map(wt.channel_b())) - accinfo.holevo_chi(
        ens.map(wt.channel_e())
    )


class _PriorProblem:
    """Private information as a function of the prior for fixed output states."""

    def __init__(self, b_states: np.ndarray, e_states: np.ndarray):
        self.b, self.e = b_states, e_states
        self.hb = np.array([_entropy_unchecked(s) for s in b_states])
        self.he = np.array([_entropy_unchecked(s) for s in e_states])

    def value(self, p: np.ndarray) -> float:
        return _chi_of_states(p, self.b) - _chi_of_states(p, self.e)

    def _dchi(self, p, states, h):
        avg = np.einsum("x,xij->ij", p, states)
        w, v = np.linalg.eigh(avg)
        logm = (v * np.log2(np.clip(w, 1e-300, None))) @ v.conj().T
        return -np.real(np.einsum("xij,ji->x", states, logm)) - h

    def gradient(self, p: np.ndarray) -> np.ndarray:
        return self._dchi(p, self.b, self.hb) - self._dchi(p, self.e, self.he)

    def maximise(self, rng, starts: int = 4) -> tuple[float, np.ndarray]:
        n = len(self.hb)
        best, best_p = -np.inf, np.full(n, 1.0 / n)
        inits = [best_p] + [rng.dirichlet(np.ones(n)) for _ in range(starts - 1)]
        cons = ({"type": "eq", "fun": lambda p: p.sum() - 1.0, "jac": lambda p: np.ones(n)},)
        for p0 in inits:
            res = minimize(
                lambda p: -self.value(np.clip(p, 0, None)),
                p0,
                jac=lambda p: -self.gradient(np.clip(p, 0, None)),
                bounds=[(0.0, 1.0)] * n,
                constraints=cons,
                method="SLSQP",
                options={"maxiter": 500, "ftol": 1e-14},
            )
            p = np.clip(res.x, 0, None)
            p /= p.sum()
            val = self.value(p)
            if val > best:
                best, best_p = val, p
        return float(best), best_p


class AdditivityResult(NamedTuple):
    slack: float
    joint_best_bits: float
    single_sum_bits: float
    single_bits: tuple
    priors_tried: int


def _pure_outputs(ch: KrausChannel, vecs: np.ndarray) -> np.ndarray:
    return np.array([ch.apply(np.outer(v, v.conj())) for v in vecs.T])


def degraded_product_additivity_check(
    wt1: WiretapChannel,
    wt2: WiretapChannel,
    ens1: Ensemble,
    ens2: Ensemble,
    joint_search_budget: int = 200,
    rng_seed=0,
) -> AdditivityResult:
    """max over correlated priors on product pure states of P_joint - (P1_max + P2_max).

    Only the states of ``ens1``/``ens2`` are used (they must be pure); the
    priors are searched. Private information is concave in the prior for
    these wiretaps, so the single-channel maxima are found reliably.
    """
    if not (wt1.constructively_degraded and wt2.constructively_degraded):
        raise ValueError("additivity check requires constructively degraded wiretap channels")
    vecs = []
    for ens in (ens1, ens2):
        cols = []
        for s in ens.states:
            w, v = np.linalg.eigh(s)
            if w[-1] < 1 - 1e-9:
                raise ValueError("ensembles must consist of pure states")
            cols.append(v[:, -1])
        vecs.append(np.array(cols).T)
    rng = make_rng(rng_seed)
    p1 = _PriorProblem(_pure_outputs(wt1.channel_b(), vecs[0]), _pure_outputs(wt1.channel_e(), vecs[0]))
    p2 = _PriorProblem(_pure_outputs(wt2.channel_b(), vecs[1]), _pure_outputs(wt2.channel_e(), vecs[1]))
    m1, _ = p1.maximise(rng)
    m2, _ = p2.maximise(rng)
    jb = np.einsum("aij,bkl->abikjl", p1.b, p2.b).reshape(
        len(p1.b) * len(p2.b), p1.b.shape[1] * p2.b.shape[1], -1
    )
    je = np.einsum("aij,bkl->abikjl", p1.e, p2.e).reshape(
        len(p1.e) * len(p2.e), p1.e.shape[1] * p2.e.shape[1], -1
    )
    joint = _PriorProblem(jb, je)
    n = len(jb)
    best = -np.inf
    for _ in range(joint_search_budget):
        best = max(best, joint.value(rng.dirichlet(np.full(n, 0.5))))
    opt, _ = joint.maximise(rng, starts=2)
    best = max(best, opt)
    return AdditivityResult(float(best - (m1 + m2)), float(best), m1 + m2, (m1, m2), joint_search_budget + 2)
