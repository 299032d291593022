"""Accessible-information bounds for finite ensembles.

Lower bounds come from explicit measurements (a baseline adversary suite and
a multistart ascent over rank-one POVMs); the upper bound is the Holevo
quantity. Nothing here claims global optimality.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qcore import (
    CapabilityError,
    Ensemble,
    Povm,
    _entropy_unchecked,
    classical_mutual_information,
    shannon_entropy,
)

log = logging.getLogger(__name__)

MAX_OPT_DIM = 64
PRUNE_WEIGHT = 1e-8


def holevo_chi(ens: Ensemble) -> float:
    """H(sum_x p_x rho_x) - sum_x p_x H(rho_x), in bits."""
    avg = _entropy_unchecked(ens.average())
    cond = sum(p * _entropy_unchecked(s) for p, s in zip(ens.probs, ens.states) if p > 0)
    return max(avg - cond, 0.0)


def acc_info_of_measurement(ens: Ensemble, povm: Povm) -> float:
    """Mutual information between the ensemble label and the POVM outcome."""
    return classical_mutual_information(ens.joint_distribution(povm))


def standard_basis_povm(dim: int) -> Povm:
    return Povm.from_basis(np.eye(dim, dtype=complex))


def fourier_matrix(dim: int) -> np.ndarray:
    j = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(j, j) / dim) / np.sqrt(dim)


def fourier_basis_povm(dim: int) -> Povm:
    return Povm.from_basis(fourier_matrix(dim))


def _inv_sqrt_psd(mat: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root and the projector onto the support."""
    w, v = np.linalg.eigh(mat)
    keep = w > tol * max(1.0, w[-1])
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv) @ v.conj().T, (v[:, keep]) @ v[:, keep].conj().T


def _psd_part(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def pretty_good_measurement(ens: Ensemble) -> Povm:
    """Square-root measurement, completed by a projector off the ensemble support."""
    states = [_psd_part(p * s) for p, s in zip(ens.probs, ens.states)]
    inv_sqrt, support = _inv_sqrt_psd(sum(states))
    elements = [_psd_part(inv_sqrt @ s @ inv_sqrt) for s in states]
    rest = np.eye(ens.dim) - support
    if np.linalg.norm(rest) > 1e-9:
        elements.append(rest)
    # rounding on nearly singular supports; the total is close to I, so this is stable
    fix, _ = _inv_sqrt_psd(sum(elements))
    return Povm(tuple(_psd_part(fix @ e @ fix) for e in elements))


def guessing_probability(ens: Ensemble, povm: Povm) -> float:
    """Success probability when outcome y is read as label y (extra outcomes fail)."""
    joint = ens.joint_distribution(povm)
    n = min(joint.shape)
    return float(np.trace(joint[:n, :n]))


def entropy_min_objective(key_unitaries: Sequence[np.ndarray], povm: Povm) -> float:
    """log2|M| - sum_y mu_y/(|M||K|) sum_k H(q_yk), q_yk^m = |<phi_y|U_k|m>|^2.

    Evaluated for a rank-one POVM {mu_y |phi_y><phi_y|} on the message space.
    This is the mutual information between the outcome and the *pair*
    (message, key) for the uniform ensemble {U_k|m>}; it upper-bounds the
    message-only information of the same POVM on the key-averaged ensemble,
    with equality for a single key.
    """
    vecs = povm.rank_one_vectors()
    if vecs is None:
        raise ValueError("entropy_min_objective needs a rank-one POVM")
    units = np.asarray(key_unitaries, dtype=complex)
    if units.ndim == 2:
        units = units[None]
    n_keys, dim, _ = units.shape
    if vecs.shape[0] != dim:
        raise ValueError("POVM and key unitaries act on different dimensions")
    total = 0.0
    for v in vecs.T:
        mu = float(np.real(v.conj() @ v))
        if mu <= 0:
            continue
        amps = np.abs(v.conj() @ units) ** 2 / mu  # (K, M)
        total += mu * sum(shannon_entropy(row) for row in amps)
    return float(np.log2(dim) - total / (dim * n_keys))


# --------------------------------------------------------------------------
# rank-one ascent


@dataclass
class AccInfoResult:
    lower_bits: float
    upper_bits: float
    achieving_povm: Povm
    lower_method: str
    upper_method: str
    restarts_used: int
    iterations: int
    restart_values: list = field(default_factory=list)
    histories: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "lower_bits": self.lower_bits,
            "upper_bits": self.upper_bits,
            "lower_method": self.lower_method,
            "upper_method": self.upper_method,
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "num_povm_elements": len(self.achieving_povm),
        }


class _Problem:
    """Ensemble in factored form rho_j = F_j F_j^dagger for fast rank-one updates."""

    def __init__(self, ens: Ensemble):
        self.probs = ens.probs
        self.dim = ens.dim
        facs = []
        for s in ens.states:
            w, v = np.linalg.eigh(s)
            keep = w > 1e-13
            facs.append(v[:, keep] * np.sqrt(w[keep]))
        r = max(f.shape[1] for f in facs)
        J = len(facs)
        F = np.zeros((J, self.dim, r), dtype=complex)
        for j, f in enumerate(facs):
            F[j, :, : f.shape[1]] = f
        self.F = F
        self.J, self.r = J, r
        self.Fh_flat = F.conj().transpose(0, 2, 1).reshape(J * r, self.dim)
        self.F_flat = F.transpose(1, 0, 2).reshape(self.dim, J * r)
        self.px = self.probs

    def evaluate(self, V: np.ndarray):
        C = (self.Fh_flat @ V).reshape(self.J, self.r, V.shape[1])
        cond = np.sum(np.abs(C) ** 2, axis=1)  # p(y|j)
        joint = self.px[:, None] * cond
        q = joint.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(joint > 0, cond / q[None, :], 1.0)
        L = np.log2(np.maximum(ratio, 1e-300))
        mi = float(np.sum(joint[joint > 0] * L[joint > 0]))
        return mi, C, L

    def ascent_direction(self, C: np.ndarray, L: np.ndarray) -> np.ndarray:
        weighted = (self.px[:, None] * L)[:, None, :] * C  # (J, r, N)
        return self.F_flat @ weighted.reshape(self.J * self.r, -1)


def _normalise_vectors(W: np.ndarray) -> np.ndarray:
    G = W @ W.conj().T
    w, v = np.linalg.eigh(G)
    if w[0] <= 1e-14 * max(w[-1], 1e-300):
        raise np.linalg.LinAlgError("rank-one vectors do not span the space")
    return (v / np.sqrt(w)) @ v.conj().T @ W


def _prune(V: np.ndarray) -> np.ndarray:
    weights = np.sum(np.abs(V) ** 2, axis=0)
    keep = weights >= PRUNE_WEIGHT
    if keep.all():
        return V
    return _normalise_vectors(V[:, keep])


def _ascend(problem: _Problem, V: np.ndarray, iters: int, tol: float):
    """Completeness-preserving multiplicative ascent with backtracking.

    Each accepted step maps v_y -> G^{-1/2} (1 + eps R_y) v_y, where R_y is the
    gradient of the mutual information with respect to the y-th element and G
    restores completeness. Steps that do not increase the objective are
    rejected, so the recorded history is nondecreasing.
    """
    V = _prune(V)
    f, C, L = problem.evaluate(V)
    history = [f]
    eps = 0.5
    used = 0
    stalls = 0
    for _ in range(iters):
        used += 1
        D = problem.ascent_direction(C, L)
        accepted = False
        while eps > 1e-9:
            try:
                V_new = _prune(_normalise_vectors(V + eps * D))
            except np.linalg.LinAlgError:
                eps *= 0.5
                continue
            f_new, C_new, L_new = problem.evaluate(V_new)
            if f_new >= f:
                accepted = True
                break
            eps *= 0.5
        if not accepted:
            break
        gain = f_new - f
        V, f, C, L = V_new, f_new, C_new, L_new
        history.append(f)
        eps = min(eps * 1.5, 50.0)
        if gain < tol:
            stalls += 1
            if stalls >= 5:
                break
        else:
            stalls = 0
    return V, f, history, used


def _random_rank_one(dim: int, n_el: int, rng: np.random.Generator) -> np.ndarray:
    W = rng.standard_normal((dim, n_el)) + 1j * rng.standard_normal((dim, n_el))
    return _normalise_vectors(W)


def _povm_to_vectors(povm: Povm) -> np.ndarray:
    """Rank-one refinement of a POVM (fine-graining never lowers the information)."""
    cols = []
    for e in povm.elements:
        w, v = np.linalg.eigh(e)
        for val, vec in zip(w, v.T):
            if val > 1e-12:
                cols.append(np.sqrt(val) * vec)
    return np.array(cols).T


def within_rank_one_cap(povm: Povm) -> bool:
    """True when the rank-one refinement of ``povm`` has at most d^2 elements."""
    return _povm_to_vectors(povm).shape[1] <= povm.dim**2


def acc_info_optimize(
    ens: Ensemble,
    restarts: int = 4,
    iters: int = 300,
    rng_seed=0,
    initial_povms: Sequence[Povm] = (),
    num_elements: int | None = None,
    threads: int = 1,
    tol: float = 1e-10,
) -> AccInfoResult:
    """Lower-bound the accessible information by ascent over rank-one POVMs.

    The restart pool holds the supplied ``initial_povms`` (refined to rank one)
    plus ``restarts`` random starts with ``num_elements`` elements (default
    and cap d^2). The upper bound is the Holevo quantity.
    """
    d = ens.dim
    if d > MAX_OPT_DIM:
        raise CapabilityError(f"accessible-information optimisation limited to d <= {MAX_OPT_DIM}")
    cap = d * d
    n_el = cap if num_elements is None else min(int(num_elements), cap)
    problem = _Problem(ens)

    starts = []
    for povm in initial_povms:
        V0 = _povm_to_vectors(povm)
        if V0.shape[1] > cap:
            raise ValueError(f"initial POVM refines to {V0.shape[1]} > d^2 rank-one elements")
        starts.append(("seed", V0))
    seeds = np.random.SeedSequence(rng_seed).spawn(restarts)
    for ss in seeds:
        starts.append(("random", ss))

    def run(task):
        kind, payload = task
        V0 = payload if kind == "seed" else _random_rank_one(d, n_el, np.random.default_rng(payload))
        return _ascend(problem, V0, iters, tol)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(t) for t in starts]

    best = max(range(len(results)), key=lambda i: (results[i][1], -i))
    V, f, _, _ = results[best]
    povm = Povm(tuple(np.outer(v, v.conj()) for v in V.T))
    chi = holevo_chi(ens)
    return AccInfoResult(
        lower_bits=float(f),
        upper_bits=chi,
        achieving_povm=povm,
        lower_method="rank-one multiplicative ascent, multistart",
        upper_method="holevo",
        restarts_used=len(starts),
        iterations=sum(r[3] for r in results),
        restart_values=[r[1] for r in results],
        histories=[r[2] for r in results],
    )


# --------------------------------------------------------------------------
# adversary suite


@dataclass
class AdversarySuiteResult:
    members: dict
    best_name: str
    best_bits: float
    holevo_bits: float
    optimized: AccInfoResult

    def as_dict(self) -> dict:
        return {
            "members_bits": dict(self.members),
            "best_name": self.best_name,
            "best_bits": self.best_bits,
            "holevo_bits": self.holevo_bits,
            "optimizer": self.optimized.as_dict(),
        }


def adversary_suite(
    ens: Ensemble,
    rng_seed=0,
    restarts: int = 2,
    iters: int = 200,
    extra_povms: Mapping[str, Povm] | None = None,
    num_elements: int | None = None,
    threads: int = 1,
) -> AdversarySuiteResult:
    """Evaluate the fixed baseline measurements and the optimised rank-one POVM.

    Baselines: standard basis, Fourier basis, pretty-good measurement, plus any
    ``extra_povms`` (for instance key-basis or heterodyne-like measurements).
    Every baseline also seeds the optimiser, so the optimised value dominates.
    """
    d = ens.dim
    baselines = {
        "standard_basis": standard_basis_povm(d),
        "fourier_basis": fourier_basis_povm(d),
        "pretty_good": pretty_good_measurement(ens),
    }
    if extra_povms:
        baselines.update(extra_povms)
    members = {name: acc_info_of_measurement(ens, p) for name, p in baselines.items()}
    seeds = [p for p in baselines.values() if within_rank_one_cap(p)]
    opt = acc_info_optimize(
        ens,
        restarts=restarts,
        iters=iters,
        rng_seed=rng_seed,
        initial_povms=seeds,
        num_elements=num_elements,
        threads=threads,
    )
    members["optimized_rank_one"] = opt.lower_bits
    best_name = max(members, key=lambda k: members[k])
    return AdversarySuiteResult(
        members=members,
        best_name=best_name,
        best_bits=members[best_name],
        holevo_bits=opt.upper_bits,
        optimized=opt,
    )
