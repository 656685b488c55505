"""Channel divergences: the exact classical value, stabilized lower bounds for
quantum channels, the max-divergence of channels, and two-level brackets on
the regularized divergence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import (ClassicalChannel, DensityMatrix, DimensionError, ProbVector, QuantumChannel,
                   as_quantum, choi_state, identity_channel, tensor)
from .divergences import dmax, kl_array, relative_entropy_gradients
from .optim import DEFAULT_RESTARTS, maximize_on_sphere

Channel = Union[ClassicalChannel, QuantumChannel]

MAX_JOINT_DIM = 64


class DimensionBlowUp(ValueError):
    """The requested tensor power exceeds the dense-linear-algebra budget."""


@dataclass
class ChannelDivReport:
    lower: float
    upper: float
    witness_state: Union[DensityMatrix, ProbVector, None] = None
    per_n_values: dict[int, float] = field(default_factory=dict)


def _check_shapes(e, f):
    if isinstance(e, ClassicalChannel) and isinstance(f, ClassicalChannel):
        if e.shape != f.shape:
            raise DimensionError(f"channel shapes differ: {e.shape} vs {f.shape}")
        return
    e, f = as_quantum(e), as_quantum(f)
    if (e.in_dim, e.out_dim) != (f.in_dim, f.out_dim):
        raise DimensionError("channel shapes differ")


def classical_channel_divergence(e: ClassicalChannel, f: ClassicalChannel) -> float:
    """max_x D(e(.|x) || f(.|x)); for classical channels this is also the
    regularized and amortized divergence."""
    _check_shapes(e, f)
    return max(kl_array(e.matrix[x], f.matrix[x]) for x in range(e.input_size))


def classical_channel_divergence_argmax(e: ClassicalChannel, f: ClassicalChannel) -> tuple[float, int]:
    vals = [kl_array(e.matrix[x], f.matrix[x]) for x in range(e.input_size)]
    x = int(np.argmax(vals))
    return vals[x], x


def _stabilized_objective(e: QuantumChannel, f: QuantumChannel, finite: bool):
    d = e.in_dim
    ee = tensor(identity_channel(d), e)
    ff = tensor(identity_channel(d), f)
    last = {}

    def evaluate(psi):
        key = psi.tobytes()
        if last.get("key") != key:
            proj = np.outer(psi, psi.conj())
            rho, sigma = ee.apply_matrix(proj), ff.apply_matrix(proj)
            val, g_r, g_s = relative_entropy_gradients(rho, sigma)
            if finite and math.isinf(val):
                # finite channel D_max bounds D on every input: numerical support artefact
                val = -math.inf
            last.update(key=key, val=val, g_r=g_r, g_s=g_s)
        return last

    def value(psi):
        return evaluate(psi)["val"]

    def grad(psi):
        st = evaluate(psi)
        if st["g_r"] is None:
            return np.zeros_like(psi)
        h = ee.adjoint_matrix(st["g_r"]) + ff.adjoint_matrix(st["g_s"])
        return 2.0 * (h @ psi)

    return value, grad


def _basis_inputs(d: int) -> list[np.ndarray]:
    """|x>_R |x>_A for each input symbol, plus the maximally entangled state."""
    out = []
    for x in range(d):
        v = np.zeros(d * d, dtype=complex)
        v[x * d + x] = 1.0
        out.append(v)
    omega = np.zeros(d * d, dtype=complex)
    omega[:: d + 1] = 1.0
    out.append(omega / np.sqrt(d))
    return out


def quantum_channel_divergence_lower(e: Channel, f: Channel, restarts: int = DEFAULT_RESTARTS,
                                     seed: int = 0, extra_starts=()) -> ChannelDivReport:
    """Lower bound on the stabilized channel relative entropy.

    Maximizes D((id x e)(psi) || (id x f)(psi)) over pure psi on R x A with
    R of the input dimension. Deterministic basis inputs are always among
    the starting points. ``upper`` is the channel max-divergence.
    """
    _check_shapes(e, f)
    eq, fq = as_quantum(e), as_quantum(f)
    d = eq.in_dim
    upper = dmax_channel(eq, fq)
    value, grad = _stabilized_objective(eq, fq, finite=math.isfinite(upper))
    rep = maximize_on_sphere(value, grad, d * d, restarts=restarts, seed=seed,
                             starts=list(extra_starts) + _basis_inputs(d))
    witness = DensityMatrix.pure(rep.argument)
    lower = rep.value
    if math.isinf(lower):
        upper = math.inf
    return ChannelDivReport(lower=lower, upper=upper, witness_state=witness,
                            per_n_values={1: lower})


def dmax_channel(e: Channel, f: Channel) -> float:
    """D_max between the channels' normalized Choi states."""
    _check_shapes(e, f)
    return dmax(choi_state(as_quantum(e)), choi_state(as_quantum(f)))


def _square_witness(psi: np.ndarray, d: int) -> np.ndarray:
    """psi x psi on (R1 A1)(R2 A2), reordered to (R1 R2)(A1 A2)."""
    t = np.kron(psi, psi).reshape(d, d, d, d)
    return t.transpose(0, 2, 1, 3).reshape(-1)


def regularized_bracket(e: Channel, f: Channel, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                        max_joint_dim: int = MAX_JOINT_DIM) -> ChannelDivReport:
    """Bracket [max(D_1, D_2 / 2), D_max] on the regularized channel divergence.

    Levels beyond two copies are not attempted.
    """
    _check_shapes(e, f)
    eq, fq = as_quantum(e), as_quantum(f)
    d, b = eq.in_dim, eq.out_dim
    joint = d * d * b * b
    if joint > max_joint_dim:
        raise DimensionBlowUp(
            f"two-copy stabilized output has dimension {joint} > {max_joint_dim}")
    one = quantum_channel_divergence_lower(eq, fq, restarts=restarts, seed=seed)
    upper = dmax_channel(eq, fq)
    if math.isinf(one.lower):
        return ChannelDivReport(lower=math.inf, upper=math.inf, witness_state=one.witness_state,
                                per_n_values={1: math.inf})
    psi1 = np.linalg.eigh(one.witness_state.matrix)[1][:, -1]
    two = quantum_channel_divergence_lower(
        tensor(eq, eq), tensor(fq, fq), restarts=max(1, restarts // 4), seed=seed + 1,
        extra_starts=[_square_witness(psi1, d)])
    per_n = {1: one.lower, 2: two.lower / 2}
    lower = max(per_n.values())
    witness = one.witness_state if per_n[1] >= per_n[2] else two.witness_state
    return ChannelDivReport(lower=lower, upper=upper, witness_state=witness, per_n_values=per_n)
