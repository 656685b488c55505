"""Value types for classical and quantum states, channels and measurements.

Everything here is immutable after construction: the backing numpy arrays
are copied and marked read-only, so instances can be shared freely.
Classical channels use the row convention ``W[x, y] = W(y|x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
TP_TOL = 1e-9
NORM_TOL = 1e-12


class DimensionError(ValueError):
    """Operands have incompatible dimensions."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(m, 2))) if m.size else 1.0


@dataclass(frozen=True, eq=False)
class ProbVector:
    entries: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.entries, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be a nonempty 1-d array")
        if not np.all(np.isfinite(p)):
            raise ValueError("probability vector has non-finite entries")
        if np.any(p < -NORM_TOL):
            raise ValueError(f"negative probability {p.min():.3g}")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
        object.__setattr__(self, "entries", _readonly(np.clip(p, 0.0, None)))

    @property
    def alphabet_size(self) -> int:
        return self.entries.size

    def __len__(self):
        return self.entries.size

    def __getitem__(self, i):
        return self.entries[i]

    @classmethod
    def uniform(cls, n: int) -> "ProbVector":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point(cls, n: int, i: int) -> "ProbVector":
        p = np.zeros(n)
        p[i] = 1.0
        return cls(p)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.diag(self.entries).astype(complex))

    def __repr__(self):
        return f"ProbVector({np.array2string(self.entries, precision=6)})"


@dataclass(frozen=True, eq=False)
class ClassicalChannel:
    """Row-stochastic matrix; ``matrix[x]`` is the output distribution on input x."""

    matrix: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("channel matrix must be a nonempty 2-d array")
        for x in range(w.shape[0]):
            ProbVector(w[x])
        object.__setattr__(self, "matrix", _readonly(np.clip(w, 0.0, None)))

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def row(self, x: int) -> ProbVector:
        return ProbVector(self.matrix[x])

    @property
    def rows(self) -> list[ProbVector]:
        return [self.row(x) for x in range(self.input_size)]

    @classmethod
    def from_rows(cls, rows: Sequence) -> "ClassicalChannel":
        return cls(np.array([np.asarray(getattr(r, "entries", r), dtype=float) for r in rows]))

    @classmethod
    def identity(cls, n: int) -> "ClassicalChannel":
        return cls(np.eye(n))

    def __repr__(self):
        return f"ClassicalChannel({self.input_size}->{self.output_size})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
            raise ValueError("density matrix must be square")
        scale = _scale(m)
        if np.abs(m - m.conj().T).max() > HERM_TOL * scale:
            raise ValueError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix has trace {tr:.15g}")
        if np.linalg.eigvalsh(m).min() < -HERM_TOL * scale:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=complex) / d)

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, d: int, i: int) -> "DensityMatrix":
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        return cls(m)

    def diagonal(self) -> ProbVector:
        d = np.clip(np.diag(self.matrix).real, 0.0, None)
        return ProbVector(d / d.sum())

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map in Kraus form; ``kraus`` has shape (r, out_dim, in_dim)."""

    kraus: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValueError("Kraus operators must form an (r, out, in) array")
        gram = np.einsum("kji,kjl->il", k.conj(), k)
        if np.abs(gram - np.eye(k.shape[2])).max() > TP_TOL:
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus", _readonly(k))

    @property
    def in_dim(self) -> int:
        return self.kraus.shape[2]

    @property
    def out_dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def kraus_ops(self) -> list[np.ndarray]:
        return list(self.kraus)

    @classmethod
    def identity(cls, d: int) -> "QuantumChannel":
        return cls(np.eye(d, dtype=complex)[None])

    @classmethod
    def unitary(cls, u) -> "QuantumChannel":
        return cls(np.asarray(u, dtype=complex)[None])

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        """Apply the map to an arbitrary (not necessarily normalized) operator."""
        k = self.kraus
        return (k @ m @ k.conj().transpose(0, 2, 1)).sum(axis=0)

    def adjoint_matrix(self, m: np.ndarray) -> np.ndarray:
        """Heisenberg-picture map: sum_k K^dag m K."""
        k = self.kraus
        return (k.conj().transpose(0, 2, 1) @ m @ k).sum(axis=0)

    def __repr__(self):
        return f"QuantumChannel({self.in_dim}->{self.out_dim}, rank={self.kraus.shape[0]})"


@dataclass(frozen=True, eq=False)
class Povm:
    elements: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2] or e.shape[0] == 0:
            raise ValueError("POVM elements must form an (m, d, d) array")
        for el in e:
            if np.abs(el - el.conj().T).max() > HERM_TOL * _scale(el):
                raise ValueError("POVM element is not Hermitian")
            if np.linalg.eigvalsh((el + el.conj().T) / 2).min() < -HERM_TOL:
                raise ValueError("POVM element is not positive semidefinite")
        if np.abs(e.sum(axis=0) - np.eye(e.shape[1])).max() > TP_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", _readonly(e))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def num_outcomes(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def computational(cls, d: int) -> "Povm":
        e = np.zeros((d, d, d), dtype=complex)
        for i in range(d):
            e[i, i, i] = 1.0
        return cls(e)

    @classmethod
    def from_basis(cls, u: np.ndarray) -> "Povm":
        """Rank-one projective measurement onto the columns of a unitary."""
        u = np.asarray(u, dtype=complex)
        return cls(np.einsum("ik,jk->kij", u, u.conj()))

    @classmethod
    def from_projector(cls, p: np.ndarray) -> "Povm":
        p = np.asarray(p, dtype=complex)
        return cls(np.stack([p, np.eye(p.shape[0]) - p]))


@dataclass(frozen=True, eq=False)
class TestOperator:
    """A (possibly randomized) test: the probability of accepting the null.

    Classical tests are vectors over an alphabet, quantum tests Hermitian
    matrices with spectrum in [0, 1].
    """

    values: np.ndarray

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v.astype(float)
            if np.any(v < -HERM_TOL) or np.any(v > 1 + HERM_TOL):
                raise ValueError("classical test entries must lie in [0, 1]")
            v = np.clip(v, 0.0, 1.0)
        elif v.ndim == 2 and v.shape[0] == v.shape[1]:
            v = v.astype(complex)
            if np.abs(v - v.conj().T).max() > HERM_TOL * _scale(v):
                raise ValueError("quantum test is not Hermitian")
            v = (v + v.conj().T) / 2
            ev = np.linalg.eigvalsh(v)
            if ev.min() < -HERM_TOL or ev.max() > 1 + HERM_TOL:
                raise ValueError("quantum test spectrum must lie in [0, 1]")
        else:
            raise ValueError("test must be a vector or a square matrix")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def is_classical(self) -> bool:
        return self.values.ndim == 1

    def accept_probability(self, state: Union[ProbVector, DensityMatrix]) -> float:
        if self.is_classical:
            p = state.entries if isinstance(state, ProbVector) else np.diag(state.matrix).real
            if p.size != self.values.size:
                raise DimensionError("test and state have different sizes")
            return float(p @ self.values)
        rho = state.matrix if isinstance(state, DensityMatrix) else np.diag(state.entries)
        if rho.shape != self.values.shape:
            raise DimensionError("test and state have different sizes")
        return float(np.trace(self.values @ rho).real)


Channel = Union[ClassicalChannel, QuantumChannel]
State = Union[ProbVector, DensityMatrix]


def apply_channel(ch: Channel, state: State) -> State:
    if isinstance(ch, ClassicalChannel):
        if isinstance(state, DensityMatrix):
            raise TypeError("classical channel applied to a density matrix; embed it first")
        if state.alphabet_size != ch.input_size:
            raise DimensionError(
                f"channel expects {ch.input_size} input symbols, got {state.alphabet_size}")
        out = state.entries @ ch.matrix
        return ProbVector(out / out.sum())
    if isinstance(state, ProbVector):
        state = state.to_density()
    if state.dim != ch.in_dim:
        raise DimensionError(f"channel expects input dimension {ch.in_dim}, got {state.dim}")
    out = ch.apply_matrix(state.matrix)
    return DensityMatrix(out / np.trace(out).real)


def tensor(a, b):
    """Kronecker product of two states or two channels of the same kind."""
    if isinstance(a, ProbVector) and isinstance(b, ProbVector):
        return ProbVector(np.kron(a.entries, b.entries))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix))
    if isinstance(a, ClassicalChannel) and isinstance(b, ClassicalChannel):
        return ClassicalChannel(np.kron(a.matrix, b.matrix))
    if isinstance(a, QuantumChannel) and isinstance(b, QuantumChannel):
        ka, kb = a.kraus, b.kraus
        k = np.einsum("aij,bkl->abikjl", ka, kb).reshape(
            ka.shape[0] * kb.shape[0], a.out_dim * b.out_dim, a.in_dim * b.in_dim)
        return QuantumChannel(k)
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_power(a, n: int):
    if n < 1:
        raise ValueError("tensor power needs n >= 1")
    out = a
    for _ in range(n - 1):
        out = tensor(out, a)
    return out


def apply_povm(m: Povm, rho: DensityMatrix) -> ProbVector:
    if m.dim != rho.dim:
        raise DimensionError(f"POVM acts on dimension {m.dim}, state has {rho.dim}")
    p = np.einsum("kij,ji->k", m.elements, rho.matrix).real
    p = np.clip(p, 0.0, None)
    return ProbVector(p / p.sum())


def embed_classical(ch: ClassicalChannel) -> QuantumChannel:
    """Kraus operators sqrt(W(y|x)) |y><x| for every nonzero transition."""
    ops = []
    for x, y in zip(*np.nonzero(ch.matrix)):
        k = np.zeros((ch.output_size, ch.input_size), dtype=complex)
        k[y, x] = np.sqrt(ch.matrix[x, y])
        ops.append(k)
    return QuantumChannel(np.array(ops))


def replacer(state: State, in_dim: int | None = None) -> Channel:
    """Constant channel that outputs ``state`` whatever the input.

    ``in_dim`` defaults to the dimension of ``state``.
    """
    if isinstance(state, ProbVector):
        n_in = in_dim or state.alphabet_size
        return ClassicalChannel(np.tile(state.entries, (n_in, 1)))
    n_in = in_dim or state.dim
    vals, vecs = hermitian_eig(state.matrix)
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam <= 0:
            continue
        for j in range(n_in):
            k = np.zeros((state.dim, n_in), dtype=complex)
            k[:, j] = np.sqrt(lam) * v
            ops.append(k)
    return QuantumChannel(np.array(ops))


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel.identity(d)


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if np.abs(m - m.conj().T).max(initial=0.0) > HERM_TOL * _scale(m):
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh((m + m.conj().T) / 2)


def choi_state(ch: QuantumChannel) -> DensityMatrix:
    """Normalized Choi matrix (id x E)(Omega) with Omega maximally entangled.

    The reference system is the first tensor factor.
    """
    d = ch.in_dim
    omega = np.zeros(d * d, dtype=complex)
    omega[:: d + 1] = 1 / np.sqrt(d)
    return apply_channel(tensor(identity_channel(d), ch), DensityMatrix.pure(omega))


def as_quantum(ch: Channel) -> QuantumChannel:
    return embed_classical(ch) if isinstance(ch, ClassicalChannel) else ch
