"""Dense finite-dimensional quantum kernel.

States, channels, measurements and ensembles are immutable value types built
on complex numpy arrays. All entropies are in bits. Norms follow the
unnormalised convention: the trace distance is the full 1-norm, with no
factor 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
KRAUS_TOL = 1e-10
POVM_TOL = 1e-9
EIG_ZERO = 1e-14
MAX_DIM = 256

RNG_ALGORITHM = "numpy.PCG64"


class CapabilityError(ValueError):
    """Raised when a requested size exceeds what the dense kernel supports."""


def make_rng(seed=None) -> np.random.Generator:
    """Return a PCG64 generator; generators are passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _check_dim(dim: int) -> None:
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if dim > MAX_DIM:
        raise CapabilityError(f"dimension {dim} exceeds supported maximum {MAX_DIM}")


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def check_density_matrix(mat: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix and return its eigenvalues (clipped at zero)."""
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("density operator must be a square matrix")
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERM_TOL * max(1.0, mat.shape[0]):
        raise ValueError("matrix is not Hermitian within tolerance")
    evals = np.linalg.eigvalsh(mat)
    if evals.size and evals[0] < -tol:
        raise ValueError(f"matrix has negative eigenvalue {evals[0]:.3e}")
    if abs(np.sum(evals) - 1.0) > max(TRACE_TOL, tol):
        raise ValueError(f"trace {np.sum(evals):.12f} differs from 1")
    return np.clip(evals, 0.0, None)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive, unit-trace matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        _check_dim(mat.shape[0])
        check_density_matrix(mat)
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vec) -> "DensityOperator":
        vec = np.asarray(vec, dtype=complex).ravel()
        vec = vec / np.linalg.norm(vec)
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def diagonal(cls, probs) -> "DensityOperator":
        return cls(np.diag(np.asarray(probs, dtype=complex)))

    def eigenvalues(self) -> np.ndarray:
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)


# --------------------------------------------------------------------------
# entropies and distances


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > EIG_ZERO]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary entropy argument {p} outside [0, 1]")
    return shannon_entropy([p, 1.0 - p])


def von_neumann_entropy(rho) -> float:
    """Entropy in bits of a density operator (or a raw density matrix)."""
    evals = check_density_matrix(_as_matrix(rho))
    return shannon_entropy(evals)


def _entropy_unchecked(mat: np.ndarray) -> float:
    return shannon_entropy(np.linalg.eigvalsh(mat))


def trace_distance(rho, sigma) -> float:
    """Full trace norm ||rho - sigma||_1 (no factor 1/2)."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def relative_entropy(rho, sigma) -> float:
    """Quantum relative entropy D(rho||sigma) in bits; inf if supports mismatch."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    wa, va = np.linalg.eigh(a)
    wb, vb = np.linalg.eigh(b)
    wa = np.clip(wa, 0.0, None)
    keep = wa > EIG_ZERO
    first = float(np.sum(wa[keep] * np.log2(wa[keep])))
    overlap = np.abs(va[:, keep].conj().T @ vb) ** 2  # |<a_i|b_j>|^2
    weights = wa[keep] @ overlap
    bad = (wb <= EIG_ZERO) & (weights > 1e-12)
    if np.any(bad):
        return float("inf")
    pos = wb > EIG_ZERO
    second = float(np.sum(weights[pos] * np.log2(wb[pos])))
    return first - second


# --------------------------------------------------------------------------
# subsystems


def _normalise_dims(total: int, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != total:
        raise ValueError(f"subsystem dims {dims} do not factor dimension {total}")
    return dims


def partial_trace(rho, dims: Sequence[int], trace_out) -> np.ndarray | DensityOperator:
    """Trace out the subsystems listed in ``trace_out``.

    Returns the same kind of object that was passed in: a DensityOperator in,
    a DensityOperator out; raw arrays stay raw (useful for operators that are
    not states).
    """
    mat = _as_matrix(rho)
    dims = _normalise_dims(mat.shape[0], dims)
    if isinstance(trace_out, (int, np.integer)):
        trace_out = [int(trace_out)]
    trace_out = sorted(set(int(i) for i in trace_out))
    if any(i < 0 or i >= len(dims) for i in trace_out):
        raise ValueError(f"subsystem index out of range in {trace_out}")
    keep = [i for i in range(len(dims)) if i not in trace_out]
    n = len(dims)
    tensor = mat.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in trace_out:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, tensor)
    kdim = int(np.prod([dims[i] for i in keep])) if keep else 1
    reduced = reduced.reshape(kdim, kdim)
    if isinstance(rho, DensityOperator):
        return DensityOperator(reduced)
    return reduced


def partial_transpose(mat, dims: Sequence[int], which: int) -> np.ndarray:
    mat = _as_matrix(mat)
    dims = _normalise_dims(mat.shape[0], dims)
    n = len(dims)
    tensor = mat.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[which], axes[n + which] = axes[n + which], axes[which]
    return tensor.transpose(axes).reshape(mat.shape)


def mutual_information(joint, dims: Sequence[int] | None = None) -> float:
    """Mutual information in bits.

    ``joint`` is either a bipartite DensityOperator (``dims`` required) or a
    2-D array holding a classical joint distribution p(a, b).
    """
    if isinstance(joint, DensityOperator):
        if dims is None or len(dims) != 2:
            raise ValueError("bipartite dims (dA, dB) required for a quantum state")
        ra = partial_trace(joint, dims, [1])
        rb = partial_trace(joint, dims, [0])
        return (
            von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(joint)
        )
    return classical_mutual_information(joint)


def classical_mutual_information(pxy) -> float:
    """I(X;Y) in bits for a joint probability table p[x, y]."""
    p = np.asarray(pxy, dtype=float)
    if p.ndim != 2:
        raise ValueError("joint distribution must be a 2-D table")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("invalid joint distribution")
    p = np.clip(p, 0.0, None)
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    mask = p > 0
    denom = (px * py)[mask]
    return float(max(np.sum(p[mask] * np.log2(p[mask] / denom)), 0.0))


# --------------------------------------------------------------------------
# random sampling


def haar_unitary(dim: int, rng_seed=None) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix with phase fix."""
    _check_dim(dim)
    rng = make_rng(rng_seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_isometry(rows: int, cols: int, rng_seed=None) -> np.ndarray:
    """First ``cols`` columns of a Haar unitary on ``rows`` dimensions."""
    return haar_unitary(rows, rng_seed)[:, :cols]


def random_pure_state(dim: int, rng_seed=None) -> np.ndarray:
    rng = make_rng(rng_seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rank: int | None = None, rng_seed=None) -> np.ndarray:
    """Induced-measure random state: G G^dagger / tr for a dim x rank Ginibre G."""
    rng = make_rng(rng_seed)
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# --------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by Kraus operators of shape (out_dim, in_dim)."""

    kraus_ops: tuple
    in_dim: int = field(init=False)
    out_dim: int = field(init=False)

    def __post_init__(self):
        ops = [np.array(a, dtype=complex) for a in self.kraus_ops]
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(a.shape != shape or a.ndim != 2 for a in ops):
            raise ValueError("Kraus operators must share one 2-D shape")
        out_dim, in_dim = shape
        _check_dim(in_dim)
        _check_dim(out_dim)
        total = sum(a.conj().T @ a for a in ops)
        err = np.max(np.abs(total - np.eye(in_dim)))
        if err > KRAUS_TOL:
            raise ValueError(f"Kraus operators not trace preserving (error {err:.2e})")
        for a in ops:
            a.setflags(write=False)
        object.__setattr__(self, "kraus_ops", tuple(ops))
        object.__setattr__(self, "in_dim", in_dim)
        object.__setattr__(self, "out_dim", out_dim)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus_ops)

    def apply(self, rho) -> np.ndarray:
        mat = _as_matrix(rho)
        if mat.shape != (self.in_dim, self.in_dim):
            raise ValueError(f"input dimension {mat.shape[0]} != channel input {self.in_dim}")
        k = self.stacked
        return np.sum(k @ mat @ k.conj().transpose(0, 2, 1), axis=0)

    def __call__(self, rho) -> DensityOperator:
        return DensityOperator(self.apply(rho))

    def choi(self) -> np.ndarray:
        """Unnormalised Choi matrix sum_ij |i><j| (x) N(|i><j|), trace = in_dim."""
        k = self.stacked  # (n, out, in)
        vecs = k.transpose(0, 2, 1).reshape(len(k), -1)  # |i>|A e_i> ordering
        return vecs.T @ vecs.conj()

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """Return self o first."""
        if first.out_dim != self.in_dim:
            raise ValueError("dimension mismatch in composition")
        return KrausChannel(tuple(b @ a for b in self.kraus_ops for a in first.kraus_ops))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        return KrausChannel(tuple(np.kron(a, b) for a in self.kraus_ops for b in other.kraus_ops))

    def tensor_power(self, n: int) -> "KrausChannel":
        out = self
        for _ in range(n - 1):
            out = out.tensor(self)
        return out

    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls((np.eye(dim, dtype=complex),))

    @classmethod
    def unitary(cls, u) -> "KrausChannel":
        return cls((np.asarray(u, dtype=complex),))

    @classmethod
    def from_choi(cls, choi: np.ndarray, in_dim: int, out_dim: int, tol: float = 1e-12):
        """Minimal Kraus representation from the eigendecomposition of a Choi matrix."""
        w, v = np.linalg.eigh(choi)
        ops = []
        for val, vec in zip(w, v.T):
            if val > tol:
                ops.append(np.sqrt(val) * vec.reshape(in_dim, out_dim).T)
        return cls(tuple(ops))


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    return ch.choi()


@dataclass(frozen=True, eq=False)
class IsometricExtension:
    """Isometry A -> B (x) E with B the first tensor factor."""

    isometry: np.ndarray
    b_dim: int
    e_dim: int

    def __post_init__(self):
        v = np.array(self.isometry, dtype=complex)
        if v.shape[0] != self.b_dim * self.e_dim:
            raise ValueError("isometry row count must equal b_dim * e_dim")
        err = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
        if err > KRAUS_TOL:
            raise ValueError(f"matrix is not an isometry (error {err:.2e})")
        v.setflags(write=False)
        object.__setattr__(self, "isometry", v)

    @property
    def in_dim(self) -> int:
        return self.isometry.shape[1]

    def apply(self, rho) -> np.ndarray:
        v = self.isometry
        return v @ _as_matrix(rho) @ v.conj().T

    def to_b(self, rho) -> np.ndarray:
        return partial_trace(self.apply(rho), (self.b_dim, self.e_dim), [1])

    def to_e(self, rho) -> np.ndarray:
        return partial_trace(self.apply(rho), (self.b_dim, self.e_dim), [0])


def isometric_extension(ch: KrausChannel) -> IsometricExtension:
    """V|psi> = sum_i (A_i|psi>) (x) |i>_E."""
    k = ch.stacked  # (n, out, in)
    n = k.shape[0]
    v = k.transpose(1, 0, 2).reshape(ch.out_dim * n, ch.in_dim)
    return IsometricExtension(v, ch.out_dim, n)


def complementary_channel(ch: KrausChannel) -> KrausChannel:
    """Channel to the environment of :func:`isometric_extension`.

    Kraus operators are E_b = sum_i |i><b| A_i, one per output basis vector b.
    """
    k = ch.stacked  # (n, out, in)
    return KrausChannel(tuple(k[:, b, :] for b in range(ch.out_dim)))


# --------------------------------------------------------------------------
# measurements and ensembles


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple

    def __post_init__(self):
        els = [np.array(e, dtype=complex) for e in self.elements]
        if not els:
            raise ValueError("POVM needs at least one element")
        dim = els[0].shape[0]
        for e in els:
            if e.shape != (dim, dim):
                raise ValueError("POVM elements must share one square shape")
            if np.max(np.abs(e - e.conj().T)) > HERM_TOL * max(1, dim):
                raise ValueError("POVM element not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -PSD_TOL:
                raise ValueError("POVM element not positive semidefinite")
        err = np.max(np.abs(sum(els) - np.eye(dim)))
        if err > POVM_TOL:
            raise ValueError(f"POVM elements do not sum to identity (error {err:.2e})")
        for e in els:
            e.setflags(write=False)
        object.__setattr__(self, "elements", tuple(els))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.elements)

    @classmethod
    def from_basis(cls, basis: np.ndarray) -> "Povm":
        """Projective measurement onto the columns of a unitary matrix."""
        basis = np.asarray(basis, dtype=complex)
        return cls(tuple(np.outer(basis[:, i], basis[:, i].conj()) for i in range(basis.shape[1])))

    @classmethod
    def from_vectors(cls, vecs: np.ndarray) -> "Povm":
        """Rank-one POVM |v_y><v_y| from the (unnormalised) columns of ``vecs``."""
        vecs = np.asarray(vecs, dtype=complex)
        return cls(tuple(np.outer(vecs[:, i], vecs[:, i].conj()) for i in range(vecs.shape[1])))

    @classmethod
    def trivial(cls, dim: int) -> "Povm":
        return cls((np.eye(dim, dtype=complex),))

    def probabilities(self, rho) -> np.ndarray:
        mat = _as_matrix(rho)
        return np.real(np.einsum("yij,ji->y", self.stacked, mat))

    def rank_one_vectors(self, tol: float = 1e-12) -> np.ndarray | None:
        """Columns v_y with element = |v_y><v_y|, or None if some element has rank > 1."""
        cols = []
        for e in self.elements:
            w, v = np.linalg.eigh(e)
            big = w > tol * max(1.0, w[-1])
            if big.sum() > 1:
                return None
            if big.sum() == 1:
                cols.append(np.sqrt(w[-1]) * v[:, -1])
        return np.array(cols).T


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Classical labels with probabilities paired with states of equal dimension."""

    probs: np.ndarray
    states: np.ndarray  # stacked (n, d, d)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if isinstance(self.states, np.ndarray):
            mats = np.array(self.states, dtype=complex)
        else:
            mats = np.array([_as_matrix(s) for s in self.states], dtype=complex)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("states must be a stack of square matrices")
        if len(p) != len(mats):
            raise ValueError("probability and state counts differ")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        _check_dim(mats.shape[1])
        for m in mats:
            check_density_matrix(m, tol=1e-9)
        p.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "states", mats)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return len(self.probs)

    @classmethod
    def from_pure(cls, vectors, probs=None) -> "Ensemble":
        """Pure-state ensemble from the columns of ``vectors`` (normalised here)."""
        vecs = np.asarray(vectors, dtype=complex)
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        n = vecs.shape[1]
        probs = np.full(n, 1.0 / n) if probs is None else np.asarray(probs, dtype=float)
        probs = probs / probs.sum()
        return cls(probs, np.einsum("in,jn->nij", vecs, vecs.conj()))

    def average(self) -> np.ndarray:
        return np.einsum("x,xij->ij", self.probs, self.states)

    def density_operators(self) -> list[DensityOperator]:
        return [DensityOperator(m) for m in self.states]

    def map(self, ch: KrausChannel) -> "Ensemble":
        out = np.array([ch.apply(m) for m in self.states])
        out = 0.5 * (out + out.conj().transpose(0, 2, 1))
        return Ensemble(self.probs, out)

    def joint_distribution(self, povm: Povm) -> np.ndarray:
        if povm.dim != self.dim:
            raise ValueError(f"POVM dimension {povm.dim} != ensemble dimension {self.dim}")
        cond = np.real(np.einsum("yij,xji->xy", povm.stacked, self.states))
        joint = self.probs[:, None] * np.clip(cond, 0.0, None)
        return joint / joint.sum()
