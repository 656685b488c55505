"""Seeded random instance generators used by the test and acceptance suites."""

from __future__ import annotations

import numpy as np

from .core import ClassicalChannel, DensityMatrix, ProbVector, QuantumChannel


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream derived from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def rand_prob(d: int, rng: np.random.Generator, floor: float = 0.0) -> ProbVector:
    p = rng.dirichlet(np.ones(d))
    if floor:
        p = (p + floor) / (1 + d * floor)
    return ProbVector(p)


def rand_channel(n_in: int, n_out: int, rng: np.random.Generator,
                 floor: float = 0.0) -> ClassicalChannel:
    return ClassicalChannel(np.array([rand_prob(n_out, rng, floor).entries for _ in range(n_in)]))


def rand_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble density matrix of the given rank (full rank by default)."""
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def rand_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def rand_quantum_channel(d_in: int, d_out: int, rng: np.random.Generator,
                         rank: int = 2) -> QuantumChannel:
    """Random CPTP map from a Haar isometry into out x environment."""
    v = rand_unitary(d_out * rank, rng)[:, :d_in]
    k = v.reshape(d_out, rank, d_in).transpose(1, 0, 2)
    return QuantumChannel(k)


def rand_commuting_pair(d: int, rng: np.random.Generator) -> tuple[DensityMatrix, DensityMatrix]:
    u = rand_unitary(d, rng)
    p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
    return (DensityMatrix(u @ np.diag(p) @ u.conj().T),
            DensityMatrix(u @ np.diag(q) @ u.conj().T))
