"""Single-mode bosonic quantities: closed-form locking bounds and Fock-space numerics.

Multi-mode figures are per mode; where the formulas factorise, n modes give n
times the single-mode value.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from .qcore import _entropy_unchecked, make_rng, random_density_matrix

LOG2E = math.log2(math.e)
DEFAULT_CUTOFF = 40
TAIL_TOL = 1e-6
MAX_CUTOFF = 1280
ANGULAR_NODES = 128
RADIAL_NODES = 160


def _check_nonneg(x, name: str):
    if np.any(np.asarray(x) < 0):
        raise ValueError(f"{name} must be nonnegative")


def g_func(N):
    """(N+1) log2(N+1) - N log2 N, the entropy of a thermal state; g(0) = 0."""
    _check_nonneg(N, "N")
    n = np.asarray(N, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (n + 1) * np.log2(n + 1) - np.where(n > 0, n * np.log2(np.where(n > 0, n, 1)), 0.0)
    return float(val) if np.ndim(val) == 0 else val


def strong_lock_bound_cs(N_S):
    """g(N_S) - log2(1 + N_S): locked bits per mode for coherent-state encodings."""
    _check_nonneg(N_S, "N_S")
    val = g_func(N_S) - np.log2(1 + np.asarray(N_S, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def _check_eta(eta):
    if np.any((np.asarray(eta) < 0) | (np.asarray(eta) > 1)):
        raise ValueError("eta must lie in [0, 1]")


def pure_loss_private_capacity(eta, N_S):
    """max{0, g(eta N_S) - g((1 - eta) N_S)}."""
    _check_eta(eta)
    _check_nonneg(N_S, "N_S")
    eta, n = np.asarray(eta, dtype=float), np.asarray(N_S, dtype=float)
    val = np.maximum(0.0, g_func(eta * n) - g_func((1 - eta) * n))
    return float(val) if np.ndim(val) == 0 else val


def weak_lock_bound_pure_loss(eta, N_S):
    """Private capacity plus g((1 - eta) N_S) - log2(1 + (1 - eta) N_S)."""
    _check_eta(eta)
    eta, n = np.asarray(eta, dtype=float), np.asarray(N_S, dtype=float)
    val = pure_loss_private_capacity(eta, n) + strong_lock_bound_cs((1 - eta) * n)
    return float(val) if np.ndim(val) == 0 else val


class SmallNExpansion(NamedTuple):
    g_approx: float
    log_approx: float
    bound_approx: float
    outside_validity: bool


def small_ns_expansion(N_S: float) -> SmallNExpansion:
    """Second-order small-N_S forms of g, log2(1 + N_S) and their difference."""
    if N_S <= 0:
        raise ValueError("expansion needs N_S > 0")
    ln = math.log(N_S)
    return SmallNExpansion(
        (-N_S * ln + N_S + N_S**2 / 2) * LOG2E,
        (N_S - N_S**2 / 2) * LOG2E,
        (-N_S * ln + N_S**2) * LOG2E,
        N_S >= 0.1,
    )


def bosonic_sweep_rows(ns_values: Sequence[float], eta: float = 1.0) -> list[dict]:
    """Rows: parameter N_S, exact g, its small-N expansion, the strong bound,
    and the pure-loss private capacity and weak bound at ``eta``."""
    rows = []
    for n in ns_values:
        n = float(n)
        exp = small_ns_expansion(n) if n > 0 else SmallNExpansion(0.0, 0.0, 0.0, False)
        rows.append(
            {
                "parameter": n,
                "exact": g_func(n),
                "expansion": exp.g_approx,
                "bound": strong_lock_bound_cs(n),
                "bound_expansion": exp.bound_approx,
                "private_capacity": pure_loss_private_capacity(eta, n),
                "weak_bound": weak_lock_bound_pure_loss(eta, n),
                "expansion_outside_validity": exp.outside_validity,
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------
# Fock-space states


def _coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    if alpha == 0:
        out = np.zeros(cutoff, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Single-mode density matrix in the number basis, truncated at ``cutoff`` levels."""

    matrix: np.ndarray
    truncation_loss: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        if abs(np.trace(m).real - 1) > 1e-9:
            raise ValueError("Fock operator must have unit trace")
        if np.linalg.eigvalsh(m)[0] < -1e-10:
            raise ValueError("Fock operator must be positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0]

    @property
    def mean_photon(self) -> float:
        return float(np.real(np.diag(self.matrix)) @ np.arange(self.cutoff))

    @property
    def first_moment(self) -> complex:
        """Tr[a rho]."""
        off = np.diagonal(self.matrix, offset=-1)  # rho_{n+1, n}
        return complex(np.sum(np.sqrt(np.arange(1, self.cutoff)) * off))

    @property
    def tail_mass(self) -> float:
        """Population of the top two levels plus any mass lost when truncating."""
        return float(np.real(np.diag(self.matrix))[-2:].sum()) + self.truncation_loss

    @property
    def well_truncated(self) -> bool:
        return self.tail_mass <= TAIL_TOL

    def entropy(self) -> float:
        return _entropy_unchecked(self.matrix)

    def with_cutoff(self, cutoff: int) -> "FockOperator":
        c = self.cutoff
        if cutoff < c:
            raise ValueError("cannot shrink a Fock operator")
        m = np.zeros((cutoff, cutoff), dtype=complex)
        m[:c, :c] = self.matrix
        return FockOperator(m, self.truncation_loss)

    @staticmethod
    def _auto(builder, cutoff: int | None) -> "FockOperator":
        c = DEFAULT_CUTOFF if cutoff is None else cutoff
        while True:
            op = builder(c)
            if op.well_truncated or cutoff is not None or c >= MAX_CUTOFF:
                return op
            c *= 2

    @classmethod
    def thermal(cls, N: float, cutoff: int | None = None) -> "FockOperator":
        _check_nonneg(N, "N")

        def build(c):
            n = np.arange(c)
            p = np.exp(n * math.log(N / (N + 1)) - math.log(N + 1)) if N > 0 else (n == 0) * 1.0
            lost = 1.0 - p.sum()
            return cls(np.diag(p / p.sum()), max(lost, 0.0))

        return cls._auto(build, cutoff)

    @classmethod
    def coherent(cls, alpha: complex, cutoff: int | None = None) -> "FockOperator":
        def build(c):
            v = _coherent_amplitudes(alpha, c)
            norm = np.vdot(v, v).real
            return cls(np.outer(v, v.conj()) / norm, max(1.0 - norm, 0.0))

        return cls._auto(build, cutoff)

    @classmethod
    def vacuum(cls, cutoff: int | None = None) -> "FockOperator":
        return cls.coherent(0.0, cutoff)

    @classmethod
    def fock(cls, n: int, cutoff: int | None = None) -> "FockOperator":
        c = max(DEFAULT_CUTOFF if cutoff is None else cutoff, n + 3)
        m = np.zeros((c, c), dtype=complex)
        m[n, n] = 1.0
        return cls(m)

    @classmethod
    def phase_averaged_coherent(cls, N: float, cutoff: int | None = None) -> "FockOperator":
        """Poisson mixture of number states with mean N."""

        def build(c):
            n = np.arange(c)
            p = np.exp(-N + n * math.log(N) - gammaln(n + 1)) if N > 0 else (n == 0) * 1.0
            return cls(np.diag(p / p.sum()), max(1.0 - p.sum(), 0.0))

        return cls._auto(build, cutoff)

    @classmethod
    def coherent_mixture(
        cls, amplitudes: Sequence[complex], probs=None, cutoff: int | None = None
    ) -> "FockOperator":
        amps = np.asarray(amplitudes, dtype=complex)
        p = np.full(len(amps), 1.0 / len(amps)) if probs is None else np.asarray(probs, float)

        def build(c):
            vs = np.array([_coherent_amplitudes(a, c) for a in amps])
            m = np.einsum("x,xi,xj->ij", p, vs, vs.conj())
            tr = np.trace(m).real
            return cls(m / tr, max(1.0 - tr, 0.0))

        return cls._auto(build, cutoff)


# --------------------------------------------------------------------------
# Q function and Wehrl entropy


@lru_cache(maxsize=32)
def _polar_nodes(radius: float, n_radial: int, n_angular: int):
    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * radius * (x + 1)
    wr = 0.5 * radius * w
    phi = 2 * np.pi * np.arange(n_angular) / n_angular
    # measure d^2 beta / pi = r dr dphi / pi
    weights = np.outer(wr * r, np.full(n_angular, 2 * np.pi / n_angular)) / np.pi
    beta = np.outer(r, np.exp(1j * phi))
    return beta, weights


@dataclass(frozen=True, eq=False)
class QFunctionGrid:
    """Polar quadrature grid with Q values Q(beta) = <beta|rho|beta>."""

    beta: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    @property
    def normalisation(self) -> float:
        return float(np.sum(self.weights * self.values))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))


def grid_radius(N: float, cutoff: int) -> float:
    return max(6 * math.sqrt(N + 1), math.sqrt(cutoff) + 6)


@lru_cache(maxsize=16)
def _coherent_vectors(radius: float, cutoff: int, n_radial: int, n_angular: int) -> np.ndarray:
    """Truncated |beta> for every grid node, shape (nodes, cutoff)."""
    beta, _ = _polar_nodes(radius, n_radial, n_angular)
    b = beta.ravel()
    n = np.arange(cutoff)
    logmag = (
        -np.abs(b)[:, None] ** 2 / 2
        + n[None, :] * np.log(np.maximum(np.abs(b), 1e-300))[:, None]
        - 0.5 * gammaln(n + 1)[None, :]
    )
    vecs = np.exp(logmag) * np.exp(1j * n[None, :] * np.angle(b)[:, None])
    vecs.setflags(write=False)
    return vecs


def q_function_grid(
    rho: FockOperator,
    radius: float | None = None,
    n_radial: int = RADIAL_NODES,
    n_angular: int = ANGULAR_NODES,
) -> QFunctionGrid:
    R = float(grid_radius(rho.mean_photon, rho.cutoff) if radius is None else radius)
    beta, weights = _polar_nodes(R, n_radial, n_angular)
    vecs = _coherent_vectors(R, rho.cutoff, n_radial, n_angular)
    vals = np.real(np.sum((vecs.conj() @ rho.matrix) * vecs, axis=1))
    vals = np.clip(vals, 0.0, 1.0).reshape(beta.shape)
    return QFunctionGrid(beta, weights, vals)


def coherent_mixture_q_grid(
    amplitudes: Sequence[complex],
    probs=None,
    n_radial: int = RADIAL_NODES,
    n_angular: int = ANGULAR_NODES,
) -> QFunctionGrid:
    """Closed-form Q function sum_x p_x exp(-|beta - alpha_x|^2); no truncation involved."""
    amps = np.asarray(amplitudes, dtype=complex)
    p = np.full(len(amps), 1.0 / len(amps)) if probs is None else np.asarray(probs, float)
    R = float(np.max(np.abs(amps))) + 6.0 + 2.0
    beta, weights = _polar_nodes(R, n_radial, n_angular)
    vals = np.zeros(beta.shape)
    for a, pa in zip(amps, p):
        vals += pa * np.exp(-np.abs(beta - a) ** 2)
    return QFunctionGrid(beta, weights, vals)


def _wehrl_from_grid(grid: QFunctionGrid) -> float:
    q = grid.values
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return grid.integrate(integrand)


def wehrl_entropy(rho: FockOperator, grid: QFunctionGrid | None = None) -> float:
    """-int (d^2 beta/pi) Q log2 Q by polar Gauss-Legendre quadrature."""
    if not rho.well_truncated:
        raise ValueError("state is not well truncated; raise the cutoff")
    grid = q_function_grid(rho) if grid is None else grid
    return _wehrl_from_grid(grid)


class MaximizerCheck(NamedTuple):
    slack: float
    relative_entropy_gap: float
    forms_difference: float
    mean_photon: float


def hw_thermal_maximizer_check(rho: FockOperator, N_S: float | None = None, tol: float = 1e-6):
    """Compare H - W of ``rho`` with that of the thermal state of equal mean photon number.

    Returns slack = [H(th) - W(th)] - [H(rho) - W(rho)] and the same quantity
    computed as D(rho||th) - D(Q_rho||Q_th); the two agree for any rho with
    that mean photon number.
    """
    n = rho.mean_photon
    if N_S is not None and abs(n - N_S) > tol:
        raise ValueError(f"mean photon number {n} differs from N_S = {N_S}")
    if abs(rho.first_moment) > tol:
        raise ValueError("state must satisfy Tr[a rho] = 0")
    th = FockOperator.thermal(n)
    c = max(th.cutoff, rho.cutoff)
    rho_c, th_c = rho.with_cutoff(c), th.with_cutoff(c)
    R = grid_radius(n, c)
    q_rho, q_th = q_function_grid(rho_c, R), q_function_grid(th_c, R)
    w_rho, w_th = _wehrl_from_grid(q_rho), _wehrl_from_grid(q_th)
    h_rho, h_th = rho_c.entropy(), th_c.entropy()
    slack = (h_th - w_th) - (h_rho - w_rho)

    p = np.real(np.diag(th_c.matrix))
    log_th = np.log2(np.clip(p, 1e-300, None))
    d_quantum = -h_rho - float(np.real(np.diag(rho_c.matrix)) @ log_th)
    qa, qb = q_rho.values, np.clip(q_th.values, 1e-300, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(qa > 0, qa * np.log2(np.where(qa > 0, qa, 1.0) / qb), 0.0)
    d_classical = q_rho.integrate(integrand)
    gap = d_quantum - d_classical
    return MaximizerCheck(float(slack), float(gap), float(abs(slack - gap)), n)


def random_constrained_state(N_S: float, rng_seed=None, max_levels: int = 8) -> FockOperator:
    """Random state with Tr[a rho] = 0 and mean photon number exactly N_S.

    A random density matrix on a few levels is phase averaged over Z_k
    (k in {2, 3, 4}), which removes the coherences that feed Tr[a rho]; it is
    then mixed with the vacuum or with a number state |m>, m > N_S, to hit N_S.
    """
    rng = make_rng(rng_seed)
    levels = int(rng.integers(2, max_levels + 1))
    k = int(rng.integers(2, 5))
    base = random_density_matrix(levels, rng_seed=rng)
    n = np.arange(levels)
    avg = np.zeros_like(base)
    for j in range(k):
        ph = np.exp(2j * np.pi * j * n / k)
        avg += (ph[:, None] * base * ph.conj()[None, :]) / k
    n0 = float(np.real(np.diag(avg)) @ n)
    m = int(math.floor(N_S)) + 1 + int(rng.integers(0, 3))
    c = max(DEFAULT_CUTOFF, m + 3)
    rho = np.zeros((c, c), dtype=complex)
    rho[:levels, :levels] = avg
    extra = np.zeros((c, c), dtype=complex)
    if n0 >= N_S:
        t = N_S / n0 if n0 > 0 else 1.0
        extra[0, 0] = 1.0
    else:
        t = (m - N_S) / (m - n0)
        extra[m, m] = 1.0
    return FockOperator(t * rho + (1 - t) * extra)


# --------------------------------------------------------------------------
# heterodyne information


def heterodyne_mutual_info_coherent(amplitudes: Sequence[complex], probs=None) -> float:
    """W(average state) - log2 e for a finite coherent-state ensemble."""
    grid = coherent_mixture_q_grid(amplitudes, probs)
    return _wehrl_from_grid(grid) - LOG2E


def gaussian_coherent_ensemble(N_S: float, points: int = 41, span: float = 5.0):
    """Discretised Gaussian modulation with mean photon number close to N_S.

    Amplitudes on a square grid covering +-span standard deviations per axis,
    weighted by the complex Gaussian density of variance N_S.
    """
    sd = math.sqrt(N_S / 2)
    xs = np.linspace(-span * sd, span * sd, points)
    re, im = np.meshgrid(xs, xs, indexing="ij")
    amps = (re + 1j * im).ravel()
    w = np.exp(-np.abs(amps) ** 2 / N_S)
    return amps, w / w.sum()
