"""Stein-exponent solvers for composite channel discrimination.

Finite classical sets get an exact LP for the parallel exponent; convex
classical sets get a primal/dual minimax pair; the worst-case i.i.d. value
bounds every adaptive strategy from above. Quantum sets are handled through
certified brackets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import (ClassicalChannel, DimensionError, ProbVector, QuantumChannel, as_quantum,
                   identity_channel, tensor, tensor_power)
from .channel_div import (MAX_JOINT_DIM, DimensionBlowUp,
                          dmax_channel, quantum_channel_divergence_lower, regularized_bracket)
from .divergences import ZERO_PROB, kl_array, relative_entropy_gradients
from .optim import (CAP, DEFAULT_RESTARTS, LinearProgram, MaxOfSmooth, SimplexProductDomain,
                    minimize_convex_on_simplices, solve_lp)

Channel = Union[ClassicalChannel, QuantumChannel]

MAX_ALPHABET = 4096
LN2 = math.log(2.0)
_LOG_FLOOR = 1e-300


class PreconditionError(ValueError):
    """The selected solver does not apply to the given hypothesis sets."""


@dataclass(frozen=True)
class HypothesisSet:
    """Finite vertex set of channels; ``take_hull`` means its convex hull."""

    vertices: tuple
    take_hull: bool = False

    def __post_init__(self):
        verts = tuple(self.vertices)
        if not verts:
            raise ValueError("hypothesis set needs at least one vertex")
        kinds = {type(v) for v in verts}
        if len(kinds) != 1 or not kinds <= {ClassicalChannel, QuantumChannel}:
            raise DimensionError("vertices must be all classical or all quantum channels")
        shapes = {self._shape(v) for v in verts}
        if len(shapes) != 1:
            raise DimensionError(f"vertices have differing shapes: {sorted(shapes)}")
        object.__setattr__(self, "vertices", verts)

    @staticmethod
    def _shape(v) -> tuple[int, int]:
        return v.shape if isinstance(v, ClassicalChannel) else (v.in_dim, v.out_dim)

    @property
    def is_classical(self) -> bool:
        return isinstance(self.vertices[0], ClassicalChannel)

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape(self.vertices[0])

    def __len__(self):
        return len(self.vertices)

    def stacked(self) -> np.ndarray:
        """Classical vertices as an array of shape (k, inputs, outputs)."""
        return np.stack([v.matrix for v in self.vertices])


@dataclass
class ExponentReport:
    value: float
    lower: float
    upper: float
    input_certificate: Optional[np.ndarray] = None
    pair_certificate: object = None
    duality_gap: float = 0.0
    capped: bool = False
    details: dict = field(default_factory=dict)

    @property
    def bracket(self) -> tuple[float, float]:
        return self.lower, self.upper


def _check_pair(s: HypothesisSet, t: HypothesisSet):
    if s.is_classical != t.is_classical:
        raise PreconditionError("hypothesis sets mix classical and quantum channels")
    if s.shape != t.shape:
        raise DimensionError(f"set shapes differ: {s.shape} vs {t.shape}")


# ---------------------------------------------------------------------------
# KL over hulls: value and gradient in the mixing weights
# ---------------------------------------------------------------------------

def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL (bits) for arrays (m, y); +inf on support violations."""
    out = np.empty(p.shape[0])
    for i in range(p.shape[0]):
        out[i] = kl_array(p[i], q[i])
    return out


def _hull_pieces(a: np.ndarray, b: np.ndarray):
    """Per-input KL pieces for mixtures of the rows of ``a`` and ``b``.

    ``a`` has shape (ks, X, Y), ``b`` shape (kt, X, Y). The returned callable
    maps concatenated weights (w, v) to (values (X,), grads (X, ks + kt)).
    Infinite pieces are replaced by the cap.
    """
    ks = a.shape[0]

    def parts(z: np.ndarray):
        w, v = z[:ks], z[ks:]
        p = np.tensordot(w, a, axes=1)
        q = np.tensordot(v, b, axes=1)
        vals = np.minimum(_kl_rows(p, q), CAP)
        lp = np.log2(np.maximum(p, _LOG_FLOOR))
        lq = np.log2(np.maximum(q, _LOG_FLOOR))
        ratio = np.where(p > 0, p / np.maximum(q, _LOG_FLOOR), 0.0)
        gw = np.einsum("ixy,xy->xi", a, lp - lq + 1.0 / LN2)
        gv = -np.einsum("jxy,xy->xj", b, ratio) / LN2
        return vals, np.hstack([gw, gv])

    return parts


def _allowed_vertices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Indices of ``a``-vertices whose supports fit inside the ``b``-hull support."""
    support = b.max(axis=0) > ZERO_PROB
    return np.array([i for i in range(a.shape[0])
                     if not np.any((a[i] > ZERO_PROB) & ~support)], dtype=int)


def _hull_minimize(a: np.ndarray, b: np.ndarray, nu: Optional[np.ndarray] = None,
                   tol: float = 1e-9, max_iter: int = 200):
    """min over hull weights of max_x KL (nu=None) or of sum_x nu_x KL.

    Returns (value, w, v, gap); the value is exact at the returned weights and
    value - gap is a certified lower bound on the minimum.
    """
    ks, kt = a.shape[0], b.shape[0]
    keep = _allowed_vertices(a, b)
    if keep.size == 0:
        w = np.full(ks, 1.0 / ks)
        v = np.full(kt, 1.0 / kt)
        return math.inf, w, v, 0.0
    parts = _hull_pieces(a[keep], b)
    domain = SimplexProductDomain([keep.size, kt])
    if nu is None:
        obj = MaxOfSmooth(parts)
    else:
        def obj(z):
            vals, grads = parts(z)
            return float(nu @ vals), nu @ grads
    rep = minimize_convex_on_simplices(obj, domain, tol=tol, max_iter=max_iter)
    w = np.zeros(ks)
    w[keep] = rep.argument[:keep.size]
    v = rep.argument[keep.size:]
    # exact re-evaluation, no cap
    vals = _kl_rows(np.tensordot(w, a, axes=1), np.tensordot(v, b, axes=1))
    value = float(vals.max()) if nu is None else float(nu @ np.where(nu > 0, vals, 0.0))
    gap = float(rep.gap) if np.isfinite(rep.gap) else math.inf
    return value, w, v, gap


def _vertex_pair_min(a: np.ndarray, b: np.ndarray):
    best = (math.inf, 0, 0)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            val = float(_kl_rows(a[i], b[j]).max())
            if val < best[0]:
                best = (val, i, j)
    return best


# ---------------------------------------------------------------------------
# Worst-case i.i.d. bound
# ---------------------------------------------------------------------------

def _classical_hull_min(s: HypothesisSet, t: HypothesisSet):
    """Minimum of max_x KL over the sets, honoring each set's hull flag.

    Returns (value, s_weights, t_weights, gap).
    """
    a, b = s.stacked(), t.stacked()
    val, i, j = _vertex_pair_min(a, b)
    best = (val, np.eye(len(s))[i], np.eye(len(t))[j], 0.0)
    if not (s.take_hull or t.take_hull):
        return best
    s_choices = [None] if s.take_hull else range(len(s))
    t_choices = [None] if t.take_hull else range(len(t))
    lower = math.inf
    for si in s_choices:
        for tj in t_choices:
            a_h = a if si is None else a[si:si + 1]
            b_h = b if tj is None else b[tj:tj + 1]
            hv, hw, hv2, gap = _hull_minimize(a_h, b_h)
            lower = min(lower, hv - gap)
            if hv < best[0]:
                w = hw if si is None else np.eye(len(s))[si]
                v = hv2 if tj is None else np.eye(len(t))[tj]
                best = (hv, w, v, 0.0)
    val = best[0]
    gap = max(val - lower, 0.0) if math.isfinite(val) else 0.0
    return val, best[1], best[2], gap


def worst_case_iid_exponent(s: HypothesisSet, t: HypothesisSet, restarts: int = 8,
                            seed: int = 0) -> ExponentReport:
    """min over (E, F) of the regularized channel divergence.

    Classical sets are exact up to the reported optimizer gap; hull flags
    widen the search to mixing weights. Quantum sets are treated vertex-wise
    (hull flags ignored) and return a bracket: the true minimum lies between
    the smallest lower bound and the smallest upper bound over pairs.
    """
    _check_pair(s, t)
    if s.is_classical:
        val, w, v, gap = _classical_hull_min(s, t)
        a, b = s.stacked(), t.stacked()
        rows = _kl_rows(np.tensordot(w, a, axes=1), np.tensordot(v, b, axes=1))
        x = int(np.argmax(rows))
        lower = max(val - gap, 0.0) if math.isfinite(val) else val
        return ExponentReport(value=val, lower=lower, upper=val,
                              input_certificate=ProbVector.point(a.shape[1], x).entries,
                              pair_certificate={"s_weights": w, "t_weights": v},
                              duality_gap=gap)
    reports = {}
    for i, e in enumerate(s.vertices):
        for j, f in enumerate(t.vertices):
            try:
                reports[i, j] = regularized_bracket(e, f, restarts=restarts, seed=seed)
            except DimensionBlowUp:
                reports[i, j] = quantum_channel_divergence_lower(e, f, restarts=restarts, seed=seed)
    lower = min(r.lower for r in reports.values())
    upper = min(r.upper for r in reports.values())
    (i, j) = min(reports, key=lambda k: (reports[k].lower, reports[k].upper))
    return ExponentReport(value=lower, lower=lower, upper=upper,
                          pair_certificate={"s_index": i, "t_index": j},
                          details={"per_pair": {f"{a},{b}": r.per_n_values
                                                for (a, b), r in reports.items()}})


# ---------------------------------------------------------------------------
# Parallel exponent for finite classical sets
# ---------------------------------------------------------------------------

def pairwise_divergence_table(s: HypothesisSet, t: HypothesisSet) -> np.ndarray:
    """d[x, i, j] = KL(row_x(E_i) || row_x(F_j)), +inf allowed."""
    a, b = s.stacked(), t.stacked()
    d = np.empty((a.shape[1], len(s), len(t)))
    for i in range(len(s)):
        for j in range(len(t)):
            d[:, i, j] = _kl_rows(a[i], b[j])
    return d


def _parallel_lp(d: np.ndarray, cap: float):
    """max t s.t. sum_x q_x d[x, k] >= t for every pair k, q in the simplex."""
    n_x, n_pairs = d.shape
    dc = np.minimum(d, cap)
    c = np.zeros(n_x + 1)
    c[-1] = 1.0
    a_ub = np.hstack([-dc.T, np.ones((n_pairs, 1))])
    a_eq = np.zeros((1, n_x + 1))
    a_eq[0, :n_x] = 1.0
    rep = solve_lp(LinearProgram(c, a_ub, np.zeros(n_pairs), a_eq, np.ones(1), sense="max"))
    return rep.value, rep.argument[:n_x]


def parallel_exponent_finite_classical(s: HypothesisSet, t: HypothesisSet,
                                       cap: float = CAP) -> ExponentReport:
    """Stein exponent of parallel strategies for finite classical sets.

    The optimal input is a diagonal mixture sum_x q_x |xx><xx| (a copy of the
    input register is kept), so the exponent is the LP value
    max_q min_{i,j} sum_x q_x D(E_i(x) || F_j(x)). Infinite table entries are
    replaced by ``cap``; the LP is re-solved at ten times the cap and the
    value is declared infinite if it moves.
    """
    _check_pair(s, t)
    if not s.is_classical:
        raise PreconditionError("parallel-finite needs classical channels")
    if s.take_hull or t.take_hull:
        raise PreconditionError("parallel-finite needs finite sets (take_hull = false)")
    d = pairwise_divergence_table(s, t)
    n_x = d.shape[0]
    flat = d.reshape(n_x, -1)
    value, q = _parallel_lp(flat, cap)
    value_big, _ = _parallel_lp(flat, 10.0 * cap)
    unstable = abs(value_big - value) > 1e-6 * max(1.0, abs(value))
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    slack = q @ np.minimum(flat, cap) - value
    active = np.flatnonzero(slack <= 1e-9 * max(1.0, abs(value)))
    capped_entry = np.isinf(flat) & (q[:, None] > 1e-12)
    capped = bool(unstable or capped_entry[:, active].any())
    pairs = [divmod(int(k), len(t)) for k in active]
    if unstable:
        value = math.inf
    return ExponentReport(value=value, lower=value, upper=value, input_certificate=q,
                          pair_certificate=pairs, capped=capped,
                          details={"table": d})


# ---------------------------------------------------------------------------
# Convex classical sets: primal/dual minimax
# ---------------------------------------------------------------------------

def _primal_multipliers(a: np.ndarray, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Input weights nu from the KKT multipliers of the tangent-plane LP at z.

    At a primal minimizer these are the optimal dual variables of the
    minimax problem, so they seed the cutting-plane loop close to optimum.
    """
    from scipy.optimize import linprog

    vals, grads = _hull_pieces(a, b)(z)
    ks = a.shape[0]
    dim = z.size
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    a_ub = np.hstack([grads, -np.ones((len(vals), 1))])
    b_ub = grads @ z - vals
    a_eq = np.zeros((2, dim + 1))
    a_eq[0, :ks], a_eq[1, ks:dim] = 1.0, 1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.ones(2),
                  bounds=[(0, None)] * dim + [(None, None)], method="highs")
    n_x = a.shape[1]
    if res.status != 0:
        return np.full(n_x, 1.0 / n_x)
    lam = np.clip(-res.ineqlin.marginals, 0.0, None)
    return lam / lam.sum() if lam.sum() > 0 else np.full(n_x, 1.0 / n_x)


def convex_classical_exponent(s: HypothesisSet, t: HypothesisSet, tol: float = 1e-6,
                              max_rounds: int = 200) -> ExponentReport:
    """Exponent for convex hulls of classical channels, with a duality certificate.

    Primal: min over hull weights of max_x D(E(x) || F(x)).
    Dual: max over input distributions nu of min over hull weights of
    sum_x nu_x D(E(x) || F(x)), solved by cutting planes in nu. Each inner
    minimum is certified with its Frank-Wolfe gap, so ``lower`` is a valid
    lower bound and ``duality_gap = primal - dual`` is nonnegative up to
    solver tolerance.
    """
    _check_pair(s, t)
    if not s.is_classical:
        raise PreconditionError("convex exponent needs classical channels")
    if not (s.take_hull and t.take_hull):
        raise PreconditionError("convex exponent needs hull-flagged sets")
    a, b = s.stacked(), t.stacked()
    primal, w, v, pgap = _classical_hull_min(s, t)
    n_x = a.shape[1]

    if math.isinf(primal):
        return ExponentReport(value=math.inf, lower=math.inf, upper=math.inf,
                              pair_certificate={"s_weights": w, "t_weights": v})

    cuts: list[np.ndarray] = []
    dual, best_nu = -math.inf, np.full(n_x, 1.0 / n_x)
    upper_model = math.inf
    nu = _primal_multipliers(a, b, np.concatenate([w, v]))
    for _ in range(max_rounds):
        val, wk, vk, gap = _hull_minimize(a, b, nu=nu)
        certified = val - gap
        if certified > dual:
            dual, best_nu = certified, nu.copy()
        if primal - dual <= tol:
            break
        rows = _kl_rows(np.tensordot(wk, a, axes=1), np.tensordot(vk, b, axes=1))
        cuts.append(np.minimum(rows, CAP))
        # master: max z s.t. z <= nu . cut_k, nu in simplex
        c = np.zeros(n_x + 1)
        c[-1] = 1.0
        a_ub = np.hstack([-np.array(cuts), np.ones((len(cuts), 1))])
        a_eq = np.zeros((1, n_x + 1))
        a_eq[0, :n_x] = 1.0
        rep = solve_lp(LinearProgram(c, a_ub, np.zeros(len(cuts)), a_eq, np.ones(1)))
        upper_model = rep.value
        nu = np.clip(rep.argument[:n_x], 0.0, None)
        nu /= nu.sum()
        if upper_model - dual <= tol:
            break
    dual = max(min(dual, primal), 0.0)
    return ExponentReport(value=primal, lower=dual, upper=primal, input_certificate=best_nu,
                          pair_certificate={"s_weights": w, "t_weights": v},
                          duality_gap=primal - dual,
                          details={"primal_gap": pgap, "cutting_plane_bound": upper_model})


# ---------------------------------------------------------------------------
# Exact finite-n composite test
# ---------------------------------------------------------------------------

def composite_test_lp(p_rows: np.ndarray, q_rows: np.ndarray, eps: float):
    """Optimal composite test as an LP.

    Minimize max_k q_rows[k] . M subject to p_rows[k] . (1 - M) <= eps and
    0 <= M <= 1. Returns ``(beta, M)``.
    """
    p_rows = np.atleast_2d(np.asarray(p_rows, dtype=float))
    q_rows = np.atleast_2d(np.asarray(q_rows, dtype=float))
    n = p_rows.shape[1]
    if q_rows.shape[1] != n:
        raise DimensionError("composite test rows live on different alphabets")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.vstack([
        np.hstack([q_rows, -np.ones((q_rows.shape[0], 1))]),
        np.hstack([-p_rows, np.zeros((p_rows.shape[0], 1))]),
        np.hstack([np.eye(n), np.zeros((n, 1))]),
    ])
    b_ub = np.concatenate([np.zeros(q_rows.shape[0]),
                           eps - p_rows.sum(axis=1),
                           np.ones(n)])
    rep = solve_lp(LinearProgram(c, a_ub, b_ub, sense="min"))
    m = np.clip(rep.argument[:n], 0.0, 1.0)
    beta = max(float(np.max(q_rows @ m)), 0.0)
    return beta, m


def composite_test_exponent_exact(s_n: Sequence, t_n: Sequence, eps: float):
    """-log2 of the optimal worst-case type-II error between two finite sets.

    Returns ``(value, TestOperator)``; the value is +inf when some test has
    zero type-II error on every member of ``t_n``.
    """
    from .core import TestOperator

    p_rows = np.array([np.asarray(getattr(p, "entries", p), dtype=float) for p in s_n])
    q_rows = np.array([np.asarray(getattr(q, "entries", q), dtype=float) for q in t_n])
    if p_rows.shape[1] > MAX_ALPHABET:
        raise DimensionBlowUp(f"alphabet of size {p_rows.shape[1]} exceeds {MAX_ALPHABET}")
    beta, m = composite_test_lp(p_rows, q_rows, eps)
    value = math.inf if beta <= 0.0 else -math.log2(beta)
    return value, TestOperator(m)


# ---------------------------------------------------------------------------
# Finite-n hull brackets
# ---------------------------------------------------------------------------

def _power_rows(m: np.ndarray, n: int) -> np.ndarray:
    out = m
    for _ in range(n - 1):
        x1, y1 = out.shape
        x2, y2 = m.shape
        out = np.einsum("ab,cd->acbd", out, m).reshape(x1 * x2, y1 * y2)
    return out


def _simplex_grid(k: int, m: int) -> list[np.ndarray]:
    return [np.array(c, dtype=float) / m for c in itertools.product(range(m + 1), repeat=k)
            if sum(c) == m]


def _level_vertices(h: HypothesisSet, n: int, extra: Sequence[np.ndarray] = (),
                    resolution: int = 4) -> np.ndarray:
    """n-fold i.i.d. members used as hull vertices at level n.

    Finite sets contribute their vertex tensor powers. Convex sets contribute
    tensor powers of mixtures on a simplex grid plus the supplied weights,
    since every point of the hull generates its own i.i.d. member.
    """
    a = h.stacked()
    weights = [np.eye(len(h))[i] for i in range(len(h))]
    if h.take_hull and n > 1:
        weights += _simplex_grid(len(h), resolution) + [np.asarray(e) for e in extra]
    mats, seen = [], set()
    for w in weights:
        key = tuple(np.round(w, 12))
        if key in seen:
            continue
        seen.add(key)
        mats.append(_power_rows(np.tensordot(w, a, axes=1), n))
    return np.array(mats)


def _hull_objective_quantum(rhos, sigmas):
    """D(sum w_i rho_i || sum v_j sigma_j) with gradient in (w, v)."""
    ks = len(rhos)
    rho_arr = np.array(rhos)
    sig_arr = np.array(sigmas)

    def f(z):
        w, v = z[:ks], z[ks:]
        rho = np.tensordot(w, rho_arr, axes=1)
        sig = np.tensordot(v, sig_arr, axes=1)
        val, g_r, g_s = relative_entropy_gradients(rho, sig)
        if g_r is None:
            return CAP, np.zeros_like(z)
        gw = np.einsum("ij,kji->k", g_r, rho_arr).real
        gv = np.einsum("ij,kji->k", g_s, sig_arr).real
        return min(val, CAP), np.concatenate([gw, gv])

    return f


def level_n_hull_bracket(s: HypothesisSet, t: HypothesisSet, n: int = 1,
                         restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                         rounds: int = 3) -> ExponentReport:
    """(1/n) min over hulls of the n-fold vertex tensor sets of D(E || F).

    Classical sets are solved exactly over the level-n vertex set
    (deterministic inputs suffice for each hull element). For convex sets the
    i.i.d. members form a continuum; they are represented by tensor powers of
    grid mixtures and of the level-1 optimum, so ``lower`` certifies the
    minimum over that finite enrichment only. Quantum sets alternate between a witness search at the
    current pair and a convex minimization with the witness held fixed; any
    fixed witness gives a lower bound, and D_max at the best pair gives an
    upper bound.
    """
    _check_pair(s, t)
    if n not in (1, 2):
        raise PreconditionError("level-n brackets are limited to n in {1, 2}")
    if s.is_classical:
        extra_s, extra_t = (), ()
        if n > 1 and (s.take_hull or t.take_hull):
            one = level_n_hull_bracket(s, t, 1)
            extra_s = (one.pair_certificate["s_weights"],)
            extra_t = (one.pair_certificate["t_weights"],)
        a, b = _level_vertices(s, n, extra_s), _level_vertices(t, n, extra_t)
        hs = HypothesisSet(tuple(ClassicalChannel(m) for m in a), take_hull=True)
        ht = HypothesisSet(tuple(ClassicalChannel(m) for m in b), take_hull=True)
        val, w, v, gap = _classical_hull_min(hs, ht)
        lower = max(val - gap, 0.0) if math.isfinite(val) else val
        return ExponentReport(value=val / n, lower=lower / n, upper=val / n,
                              pair_certificate={"s_weights": w, "t_weights": v},
                              duality_gap=gap / n,
                              details={"level": n, "level_vertices": (len(a), len(b))})

    es = [tensor_power(as_quantum(e), n) for e in s.vertices]
    fs = [tensor_power(as_quantum(f), n) for f in t.vertices]
    d_in, d_out = es[0].in_dim, es[0].out_dim
    if d_in * d_out > MAX_JOINT_DIM:
        raise DimensionBlowUp(f"stabilized output dimension {d_in * d_out} > {MAX_JOINT_DIM}")
    ks, kt = len(es), len(fs)
    w, v = np.full(ks, 1.0 / ks), np.full(kt, 1.0 / kt)
    ext = identity_channel(d_in)
    domain = SimplexProductDomain([ks, kt])
    lower, upper, best_pair = 0.0, math.inf, (w, v)
    witnesses = []
    for r in range(rounds):
        e_mix = _mix_channels(es, w)
        f_mix = _mix_channels(fs, v)
        rep = quantum_channel_divergence_lower(e_mix, f_mix, restarts=restarts, seed=seed + r)
        psi = rep.witness_state.matrix
        witnesses.append(psi)
        rhos = [tensor(ext, e).apply_matrix(psi) for e in es]
        sigmas = [tensor(ext, f).apply_matrix(psi) for f in fs]
        obj = _hull_objective_quantum(rhos, sigmas)
        mrep = minimize_convex_on_simplices(obj, domain, tol=1e-9, max_iter=2000)
        if np.isfinite(mrep.gap):
            lower = max(lower, mrep.value - mrep.gap)
        w, v = mrep.argument[:ks], mrep.argument[ks:]
        up = dmax_channel(_mix_channels(es, w), _mix_channels(fs, v))
        if up < upper:
            upper, best_pair = up, (w, v)
    lower = min(lower, upper)
    return ExponentReport(value=lower / n, lower=lower / n, upper=upper / n,
                          pair_certificate={"s_weights": best_pair[0], "t_weights": best_pair[1]},
                          details={"level": n, "rounds": rounds})


def _mix_channels(chs: Sequence[QuantumChannel], weights: np.ndarray) -> QuantumChannel:
    """Convex combination as a Kraus channel (weighted Kraus sets concatenated)."""
    ops = [math.sqrt(max(wi, 0.0)) * k for wi, ch in zip(weights, chs) for k in ch.kraus]
    norm = sum(max(wi, 0.0) for wi in weights)
    return QuantumChannel(np.array(ops) / math.sqrt(norm))
