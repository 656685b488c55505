"""State divergences: relative entropy (classical and quantum), max-divergence,
the hypothesis-testing divergence with exact Neyman-Pearson tests, and a
certified lower bound on the measured relative entropy.

All logarithms are base two. Infinite values are returned as ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as sla

from .core import DensityMatrix, DimensionError, Povm, ProbVector, TestOperator, hermitian_eig

LN2 = math.log(2.0)
ZERO_PROB = 1e-12       # classical support threshold
ZERO_EIG_REL = 1e-10    # eigenvalues below this fraction of the largest count as zero
LEAK_TOL = 1e-9         # mass of rho outside supp(sigma) that triggers +inf


@dataclass(frozen=True)
class NpTest:
    """Optimal randomized test for a single pair at level eps."""

    threshold: float
    inner_fraction: float
    test: TestOperator
    achieved_alpha: float
    achieved_beta: float

    __test__ = False


def _arr(p: Union[ProbVector, np.ndarray]) -> np.ndarray:
    return p.entries if isinstance(p, ProbVector) else np.asarray(p, dtype=float)


def _mat(r: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    return r.matrix if isinstance(r, DensityMatrix) else np.asarray(r, dtype=complex)


def kl_array(p: np.ndarray, q: np.ndarray) -> float:
    """Relative entropy of two probability arrays (no validation)."""
    if np.any((p > ZERO_PROB) & (q <= ZERO_PROB)):
        return math.inf
    mask = (p > 0) & (q > 0)
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def kl_divergence(p: ProbVector, q: ProbVector) -> float:
    p, q = _arr(p), _arr(q)
    if p.shape != q.shape:
        raise DimensionError(f"alphabet sizes differ: {p.size} vs {q.size}")
    return kl_array(p, q)


def binary_entropy(eps: float) -> float:
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if eps in (0.0, 1.0):
        return 0.0
    return -eps * math.log2(eps) - (1 - eps) * math.log2(1 - eps)


def _support_split(sigma: np.ndarray):
    vals, vecs = hermitian_eig(sigma)
    cut = ZERO_EIG_REL * max(vals.max(), 0.0)
    keep = vals > cut
    return vals[keep], vecs[:, keep], vecs[:, ~keep]


def _leakage(rho: np.ndarray, kernel: np.ndarray) -> float:
    if kernel.shape[1] == 0:
        return 0.0
    return float(np.einsum("ik,ij,jk->", kernel.conj(), rho, kernel).real)


def _check_dims(rho, sigma):
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimensions differ: {rho.shape[0]} vs {sigma.shape[0]}")


def quantum_relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    r, s = _mat(rho), _mat(sigma)
    _check_dims(r, s)
    s_vals, s_vecs, s_ker = _support_split(s)
    if _leakage(r, s_ker) > LEAK_TOL:
        return math.inf
    r_vals = np.linalg.eigvalsh(r)
    r_vals = r_vals[r_vals > 0]
    neg_entropy = float(np.sum(r_vals * np.log2(r_vals)))
    weights = np.einsum("ik,ij,jk->k", s_vecs.conj(), r, s_vecs).real
    cross = float(np.sum(weights * np.log2(s_vals)))
    return neg_entropy - cross


def relative_entropy_gradients(rho: np.ndarray, sigma: np.ndarray, floor: float = 1e-14):
    """D(rho||sigma) with its gradients: dD = Tr(G_rho drho) + Tr(G_sigma dsigma).

    Eigenvalues of rho below ``floor`` are floored inside the gradient only.
    Returns ``(inf, None, None)`` on a support violation.
    """
    s_vals, s_vecs, s_ker = _support_split(sigma)
    if _leakage(rho, s_ker) > LEAK_TOL:
        return math.inf, None, None
    r_vals, r_vecs = np.linalg.eigh(rho)
    pos = r_vals > 0
    value = float(np.sum(r_vals[pos] * np.log(r_vals[pos])))
    w = np.einsum("ik,ij,jk->k", s_vecs.conj(), rho, s_vecs).real
    value = (value - float(np.sum(w * np.log(s_vals)))) / LN2

    log_rho = (r_vecs * np.log(np.maximum(r_vals, floor))) @ r_vecs.conj().T
    mu, wv = np.linalg.eigh(sigma)
    mu = np.maximum(mu, floor)
    log_mu = np.log(mu)
    diff = mu[:, None] - mu[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(np.abs(diff) > 1e-12 * mu.max(), (log_mu[:, None] - log_mu[None, :]) / diff,
                      1.0 / np.maximum(mu[:, None], mu[None, :]))
    rho_t = wv.conj().T @ rho @ wv
    frechet = wv @ (rho_t * dd) @ wv.conj().T
    log_sigma = (wv * log_mu) @ wv.conj().T
    g_rho = (log_rho + np.eye(rho.shape[0]) - log_sigma) / LN2
    g_sigma = -frechet / LN2
    return value, g_rho, g_sigma


def dmax(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    r, s = _mat(rho), _mat(sigma)
    _check_dims(r, s)
    s_vals, s_vecs, s_ker = _support_split(s)
    if _leakage(r, s_ker) > LEAK_TOL:
        return math.inf
    inv_sqrt = s_vecs / np.sqrt(s_vals)
    m = inv_sqrt.conj().T @ r @ inv_sqrt
    lam = float(np.linalg.eigvalsh((m + m.conj().T) / 2).max())
    return math.log2(lam) if lam > 0 else -math.inf


def dmax_classical(p: ProbVector, q: ProbVector) -> float:
    p, q = _arr(p), _arr(q)
    if np.any((p > ZERO_PROB) & (q <= ZERO_PROB)):
        return math.inf
    mask = p > 0
    return math.log2(float(np.max(p[mask] / q[mask])))


def _neg_log(beta: float) -> float:
    return math.inf if beta <= 0.0 else -math.log2(beta)


def _check_eps(eps: float):
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")


def dh_classical(p: ProbVector, q: ProbVector, eps: float) -> tuple[float, NpTest]:
    """-log2 of the smallest type-II error at type-I error at most eps.

    Symbols are accepted in decreasing likelihood-ratio order (q = 0 first,
    ties by ascending index); the boundary symbol is accepted fractionally.
    """
    _check_eps(eps)
    p, q = _arr(p), _arr(q)
    if p.shape != q.shape:
        raise DimensionError(f"alphabet sizes differ: {p.size} vs {q.size}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.where(p > 0, np.inf, 0.0))
    order = np.argsort(-ratio, kind="stable")
    target = 1.0 - eps
    m = np.zeros_like(p)
    acc = 0.0
    threshold, gamma = math.inf, 1.0
    for i in order:
        if acc >= target - 1e-15 or p[i] <= 0.0:
            break
        threshold = float(ratio[i])
        if acc + p[i] <= target + 1e-15:
            m[i] = 1.0
            acc += p[i]
            gamma = 1.0
        else:
            gamma = (target - acc) / p[i]
            m[i] = gamma
            acc = target
            break
    beta = float(q @ m)
    alpha = float(1.0 - p @ m)
    test = NpTest(threshold=threshold, inner_fraction=float(gamma), test=TestOperator(m),
                  achieved_alpha=max(alpha, 0.0), achieved_beta=beta)
    return _neg_log(beta), test


def _np_projectors(r: np.ndarray, s: np.ndarray, t: float):
    vals, vecs = np.linalg.eigh(r - t * s)
    tol = 1e-9 * (1.0 + t)
    plus = vecs[:, vals > tol]
    zero = vecs[:, np.abs(vals) <= tol]
    return plus @ plus.conj().T, zero @ zero.conj().T


def np_breakpoints(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Finite t >= 0 where an eigenvalue of r - t s crosses zero (descending)."""
    with np.errstate(all="ignore"):
        w = sla.eigvals(r, s, homogeneous_eigvals=True)
    alpha, beta = w
    ok = np.abs(beta) > 1e-13 * np.maximum(np.abs(alpha), 1.0)
    t = (alpha[ok] / beta[ok])
    t = t[np.abs(t.imag) <= 1e-8 * np.maximum(np.abs(t.real), 1.0)].real
    t = np.sort(t[t >= -1e-12])[::-1]
    t = np.clip(t, 0.0, None)
    out = []
    for v in t:
        if not out or abs(out[-1] - v) > 1e-10 * max(1.0, v):
            out.append(v)
    return np.array(out)


def dh_quantum(rho: DensityMatrix, sigma: DensityMatrix, eps: float) -> tuple[float, NpTest]:
    """Quantum Neyman-Pearson test M = P_+(t) + gamma * P_0(t) at the exact level eps."""
    _check_eps(eps)
    r, s = _mat(rho), _mat(sigma)
    _check_dims(r, s)
    d = r.shape[0]
    target = 1.0 - eps

    def finish(t, gamma, m):
        m = (m + m.conj().T) / 2
        beta = max(float(np.trace(s @ m).real), 0.0)
        alpha = max(1.0 - float(np.trace(r @ m).real), 0.0)
        return _neg_log(beta), NpTest(float(t), float(gamma), TestOperator(m), alpha, beta)

    if target <= 0.0:
        return finish(math.inf, 0.0, np.zeros((d, d), dtype=complex))
    _, _, s_ker = _support_split(s)
    if s_ker.shape[1]:
        ker_proj = s_ker @ s_ker.conj().T
        if float(np.trace(r @ ker_proj).real) >= target - 1e-12:
            return finish(math.inf, 1.0, ker_proj)

    def levels(t):
        plus, zero = _np_projectors(r, s, t)
        return plus, zero, float(np.trace(r @ plus).real), float(np.trace(r @ zero).real)

    # jumps of Tr(r P_+(t)) happen at breakpoints and are filled by randomizing on P_0
    for t in list(np_breakpoints(r, s)) + [0.0]:
        plus, zero, a_plus, a_zero = levels(t)
        if a_plus <= target + 1e-12 and target <= a_plus + a_zero + 1e-12:
            gamma = 0.0 if a_zero <= 1e-15 else min(max((target - a_plus) / a_zero, 0.0), 1.0)
            return finish(t, gamma, plus + gamma * zero)

    # otherwise the level is crossed continuously while P_+(t) rotates
    lo, hi = 0.0, 1.0
    while levels(hi)[2] > target and hi < 1e15:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if levels(mid)[2] >= target:
            lo = mid
        else:
            hi = mid
    plus, _, a_plus, _ = levels(lo)
    if a_plus < target - 1e-9:
        raise RuntimeError("no Neyman-Pearson threshold bracketed the target level")
    return finish(lo, 0.0, plus)


# ---------------------------------------------------------------------------
# Measured relative entropy (lower bound)
# ---------------------------------------------------------------------------

def _measured_value(r: np.ndarray, s: np.ndarray, u: np.ndarray) -> float:
    p = np.clip(np.einsum("ik,ij,jk->k", u.conj(), r, u).real, 0.0, None)
    q = np.clip(np.einsum("ik,ij,jk->k", u.conj(), s, u).real, 0.0, None)
    return kl_array(p / p.sum(), q / q.sum())


def _ascend_unitary(r, s, u, max_iter=300, tol=1e-12):
    val = _measured_value(r, s, u)
    eta = 0.5
    for _ in range(max_iter):
        if not math.isfinite(val):
            break
        rt = u.conj().T @ r @ u
        st = u.conj().T @ s @ u
        p = np.clip(np.diag(rt).real, 1e-300, None)
        q = np.clip(np.diag(st).real, 1e-300, None)
        a = np.log2(p / q) + 1 / LN2
        b = -p / (q * LN2)
        g = 1j * (a[:, None] * rt - rt * a[None, :]) + 1j * (b[:, None] * st - st * b[None, :])
        gn2 = float(np.sum(np.abs(g) ** 2))
        if gn2 < 1e-20:
            break
        eta *= 2.0
        while eta > 1e-12:
            cand = u @ sla.expm(1j * eta * g)
            cval = _measured_value(r, s, cand)
            if cval >= val + 1e-4 * eta * gn2:
                break
            eta /= 2.0
        else:
            break
        if cval - val < tol:
            u, val = cand, cval
            break
        u, val = cand, cval
    return u, val


def measured_relative_entropy_lower(rho: DensityMatrix, sigma: DensityMatrix,
                                    restarts: int = 8, seed: int = 0) -> tuple[float, Povm]:
    """Best relative entropy of measurement outcomes found over von Neumann
    measurements and two-outcome Neyman-Pearson projections.

    A lower bound on the measured relative entropy and hence on
    :func:`quantum_relative_entropy`.
    """
    r, s = _mat(rho), _mat(sigma)
    _check_dims(r, s)
    d = r.shape[0]
    _, s_vecs, s_ker = _support_split(s)
    if _leakage(r, s_ker) > LEAK_TOL:
        proj = s_vecs @ s_vecs.conj().T
        return math.inf, Povm.from_projector(proj)

    best_val, best_povm = -math.inf, None

    def consider(val, povm):
        nonlocal best_val, best_povm
        if val > best_val:
            best_val, best_povm = val, povm

    for t in list(np_breakpoints(r, s)) + [0.5, 1.0, 2.0]:
        plus, _ = _np_projectors(r, s, t)
        if 0 < np.trace(plus).real < d - 0.5:
            m = Povm.from_projector(plus)
            pr = np.einsum("kij,ji->k", m.elements, r).real
            ps = np.einsum("kij,ji->k", m.elements, s).real
            consider(kl_array(np.clip(pr, 0, None), np.clip(ps, 0, None)), m)

    starts = [np.eye(d, dtype=complex), np.linalg.eigh(s)[1], np.linalg.eigh(r)[1],
              np.linalg.eigh(r + 0.6180339887 * s)[1]]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    for _ in range(restarts):
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        qm, rr = np.linalg.qr(z)
        starts.append(qm * (np.diag(rr) / np.abs(np.diag(rr))))
    for u0 in starts:
        consider(_measured_value(r, s, u0), u0)
        u, val = _ascend_unitary(r, s, u0)
        consider(val, u)
    if isinstance(best_povm, np.ndarray):
        q_, _ = np.linalg.qr(best_povm)
        best_povm = Povm.from_basis(q_)
    return best_val, best_povm
