"""Discrimination protocols for classical channels.

Hypothesis families, exact evaluation of parallel and adaptive strategies by
forward dynamic programming over output histories, the adversarial sampling
model with exact best-response adversaries, a universal method-of-types test,
Monte Carlo fallbacks, and the built-in two-by-two example with a
separation between adaptive and parallel strategies.

Histories are lumped: two histories are merged when the policy is in the same
state and every hypothesis member assigns them the same probability. Merging
is exact because the policy's future and every error probability depend on a
history only through that data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .channel_div import DimensionBlowUp
from .core import ClassicalChannel, DimensionError, ProbVector, TestOperator
from .exponents import (HypothesisSet, PreconditionError, _hull_minimize, composite_test_lp)

MAX_OUTCOMES = 4096
MAX_MEMBERS = 4096
DEFAULT_EPS = 0.05
DEFAULT_SAMPLES = 1_000_000
_KEY_DIGITS = 9

Choice = Union[int, ProbVector, np.ndarray]


class SizeCapError(DimensionBlowUp):
    """Exact evaluation would exceed the outcome cap."""


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

FAMILY_KINDS = ("iid", "arbitrarily_varying", "slightly_varying")


@dataclass(frozen=True)
class HypothesisFamily:
    """n-fold family generated by a hypothesis set.

    ``iid``: E^{x n} for a member E. ``arbitrarily_varying``: any product of
    members. ``slightly_varying``: products whose factors are pairwise within
    ``epsilon`` in the worst-input total-variation distance.
    """

    base: HypothesisSet
    kind: str = "iid"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("slightly-varying epsilon must lie in [0, 1]")

    @property
    def is_classical(self) -> bool:
        return self.base.is_classical


def channel_distance(e: ClassicalChannel, f: ClassicalChannel) -> float:
    """max over inputs of the total-variation distance between output rows."""
    if e.shape != f.shape:
        raise DimensionError(f"channel shapes differ: {e.shape} vs {f.shape}")
    return float(0.5 * np.abs(e.matrix - f.matrix).sum(axis=1).max())


def _same(e, f) -> bool:
    return e.shape == f.shape and np.allclose(e.matrix, f.matrix, rtol=0.0, atol=1e-12)


def family_member_check(fam: HypothesisFamily, seq: Sequence[ClassicalChannel]) -> bool:
    """Whether the product of ``seq`` belongs to the n-fold family."""
    if not fam.is_classical:
        raise PreconditionError("membership checks are implemented for classical channels")
    shape = fam.base.shape
    for ch in seq:
        if ch.shape != shape:
            raise DimensionError(f"sequence channel has shape {ch.shape}, family uses {shape}")
    if not seq:
        return True
    verts = fam.base.vertices
    if fam.kind == "iid":
        return any(_same(seq[0], v) for v in verts) and all(_same(c, seq[0]) for c in seq)
    if fam.kind == "arbitrarily_varying":
        return all(any(_same(c, v) for v in verts) for c in seq)
    return all(channel_distance(a, b) <= fam.epsilon + 1e-12
               for a, b in itertools.combinations(seq, 2))


def _members(fam: HypothesisFamily, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertex stack (K, X, Y) and member index sequences (M, n)."""
    if not fam.is_classical:
        raise PreconditionError("protocol evaluation needs classical channels")
    stack = fam.base.stacked()
    k = stack.shape[0]
    if fam.kind == "iid":
        seqs = np.repeat(np.arange(k)[:, None], n, axis=1)
    elif fam.kind == "arbitrarily_varying":
        if k ** n > MAX_MEMBERS:
            raise SizeCapError(f"{k}^{n} arbitrarily varying members exceed {MAX_MEMBERS}")
        seqs = np.array(list(itertools.product(range(k), repeat=n)), dtype=int).reshape(-1, n)
    else:
        raise PreconditionError("slightly-varying families support membership checks only")
    return stack, seqs


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

@dataclass
class AdaptivePolicy:
    """Input choices driven by a finite-state memory of past inputs and outputs.

    ``choose(state)`` returns an input symbol or an input distribution;
    ``update(state, x, y)`` returns the next state. States must be hashable.
    ``final_test``, if given, is a test over output histories Y^n (index
    sum_k y_k |Y|^(n-1-k)); otherwise the optimal composite test is used.
    """

    input_size: int
    output_size: int
    choose: Callable[[Hashable], Choice]
    update: Callable[[Hashable, int, int], Hashable]
    initial_state: Hashable = ()
    horizon: Optional[int] = None
    final_test: Optional[TestOperator] = None
    name: str = "policy"

    @classmethod
    def from_table(cls, table: dict, input_size: int, output_size: int,
                   horizon: Optional[int] = None, final_test: Optional[TestOperator] = None,
                   default: Optional[Choice] = None) -> "AdaptivePolicy":
        """Policy given as a map from output-history tuples to choices."""
        def choose(state):
            if state in table:
                return table[state]
            if default is None:
                raise KeyError(f"policy table has no entry for history {state}")
            return default

        return cls(input_size, output_size, choose, lambda s, x, y: s + (y,), (), horizon,
                   final_test, name="table")

    @classmethod
    def from_sequence(cls, inputs: Sequence[Choice], input_size: int, output_size: int,
                      name: str = "sequence") -> "AdaptivePolicy":
        """Non-adaptive policy: the k-th input is ``inputs[k]``."""
        inputs = list(inputs)
        return cls(input_size, output_size, lambda k: inputs[k], lambda k, x, y: k + 1, 0,
                   len(inputs), name=name)

    @classmethod
    def constant(cls, choice: Choice, input_size: int, output_size: int) -> "AdaptivePolicy":
        return cls(input_size, output_size, lambda s: choice, lambda s, x, y: s, 0,
                   name="constant")


def _choice_weights(choice: Choice, input_size: int) -> list[tuple[int, float]]:
    if isinstance(choice, (int, np.integer)):
        if not 0 <= int(choice) < input_size:
            raise DimensionError(f"input {choice} outside alphabet of size {input_size}")
        return [(int(choice), 1.0)]
    w = np.asarray(getattr(choice, "entries", choice), dtype=float)
    if w.shape != (input_size,):
        raise DimensionError(f"input distribution has shape {w.shape}, expected ({input_size},)")
    return [(x, float(p)) for x, p in enumerate(w) if p > 0]


@dataclass
class AdversaryPolicy:
    """Vertex choice for every sample history; ``choices[k]`` has |Omega|^k entries."""

    horizon: int
    alphabet_size: int
    choices: list

    def choose(self, history: Sequence[int]) -> int:
        idx = 0
        for o in history:
            idx = idx * self.alphabet_size + int(o)
        return int(self.choices[len(history)][idx])

    def table(self, depth: Optional[int] = None) -> dict:
        """History tuples to vertex indices, up to ``depth`` steps."""
        depth = self.horizon if depth is None else min(depth, self.horizon)
        out = {}
        for k in range(depth):
            for h in itertools.product(range(self.alphabet_size), repeat=k):
                out[h] = self.choose(h)
        return out


@dataclass
class ErrorPair:
    alpha: float
    beta: float
    worst_case_witness: dict = field(default_factory=dict)
    n: int = 1
    details: dict = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        return math.inf if self.beta <= 0.0 else -math.log2(self.beta) / self.n


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

def _key(p: np.ndarray) -> tuple:
    with np.errstate(divide="ignore"):
        return tuple(np.round(np.log2(p), _KEY_DIGITS))


def _final_errors(p_cls: np.ndarray, q_cls: np.ndarray, eps: float,
                  test: Optional[np.ndarray]):
    """Worst-case errors over members; rows are members, columns classes."""
    if test is None:
        _, test = composite_test_lp(p_cls, q_cls, eps)
    alphas = p_cls @ (1.0 - test)
    betas = q_cls @ test
    return alphas, betas, test


def _check_pair(s: HypothesisFamily, t: HypothesisFamily):
    if s.base.shape != t.base.shape:
        raise DimensionError(f"family shapes differ: {s.base.shape} vs {t.base.shape}")


def evaluate_adaptive_strategy(policy: AdaptivePolicy, s: HypothesisFamily, t: HypothesisFamily,
                               n: int, eps: float = DEFAULT_EPS,
                               max_classes: int = MAX_OUTCOMES) -> ErrorPair:
    """Exact worst-case errors of one adaptive strategy.

    Runs a forward pass over lumped histories, carrying the probability of
    each history under every member of both families. The final test is the
    optimal composite test on the lumped histories unless the policy fixes
    one. Raises :class:`SizeCapError` when more than ``max_classes`` lumped
    histories would be needed.
    """
    _check_pair(s, t)
    if (policy.input_size, policy.output_size) != s.base.shape:
        raise DimensionError("policy alphabets do not match the channels")
    if n < 1:
        raise ValueError("horizon must be positive")
    stack_s, seq_s = _members(s, n)
    stack_t, seq_t = _members(t, n)
    ms = seq_s.shape[0]
    n_y = policy.output_size
    fixed = policy.final_test
    if fixed is not None and fixed.values.shape != (n_y ** n,):
        raise DimensionError(f"final test must have {n_y ** n} entries")

    # class: key -> [state, probs (ms + mt,), multiplicity, y-history index]
    classes = {None: [policy.initial_state, np.ones(ms + seq_t.shape[0]), 1.0, 0]}
    for k in range(n):
        a_k = np.concatenate([stack_s[seq_s[:, k]], stack_t[seq_t[:, k]]])  # (M, X, Y)
        nxt: dict = {}
        for state, probs, mult, yh in classes.values():
            for x, rx in _choice_weights(policy.choose(state), policy.input_size):
                for y in range(n_y):
                    p = probs * (rx * a_k[:, x, y])
                    if not p.any():
                        continue
                    new_state = policy.update(state, x, y)
                    y_idx = yh * n_y + y
                    key = (new_state, _key(p)) if fixed is None else (new_state, y_idx, _key(p))
                    if key in nxt:
                        nxt[key][2] += mult
                    else:
                        nxt[key] = [new_state, p, mult, y_idx]
        if len(nxt) > max_classes:
            raise SizeCapError(f"{len(nxt)} lumped histories at step {k + 1} exceed {max_classes}")
        classes = nxt

    # the final test ignores the policy state; merge once more
    merged: dict = {}
    for state, probs, mult, yh in classes.values():
        key = _key(probs) if fixed is None else (yh,)
        if key in merged:
            merged[key][1] += mult
        else:
            merged[key] = [probs, mult, yh]
    probs = np.array([v[0] * v[1] for v in merged.values()]).T  # (M, C)
    test = None if fixed is None else fixed.values[[v[2] for v in merged.values()]]
    alphas, betas, test = _final_errors(probs[:ms], probs[ms:], eps, test)
    i, j = int(np.argmax(alphas)), int(np.argmax(betas))
    return ErrorPair(alpha=float(min(max(alphas[i], 0.0), 1.0)),
                     beta=float(min(max(betas[j], 0.0), 1.0)),
                     worst_case_witness={"s_member": seq_s[i].tolist(),
                                         "t_member": seq_t[j].tolist()},
                     n=n, details={"classes": len(merged)})


def _copy_outputs(stack: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Joint (input, output) distribution per vertex for input weights ``nu``.

    The input register is kept, so inputs outside the support are dropped.
    """
    support = np.flatnonzero(nu > 0)
    joint = nu[support][None, :, None] * stack[:, support, :]
    return joint.reshape(stack.shape[0], -1)


def evaluate_parallel_strategy(s: HypothesisFamily, t: HypothesisFamily,
                               inputs: Union[Choice, Sequence[Choice]], n: int,
                               eps: float = DEFAULT_EPS) -> tuple[ErrorPair, float]:
    """Exact worst-case errors of a parallel strategy and its finite-n exponent.

    ``inputs`` is one choice used for every copy or a list of n per-copy
    choices; a distribution means the diagonal input with a kept copy of
    the input register. Products are formed explicitly when the joint
    alphabet is at most 4096 symbols and by lumping identical probability
    vectors otherwise.
    """
    _check_pair(s, t)
    n_x, n_y = s.base.shape
    if isinstance(inputs, (list, tuple)):
        per_copy = list(inputs)
        if len(per_copy) != n:
            raise ValueError(f"{len(per_copy)} per-copy inputs given for n = {n}")
    else:
        per_copy = [inputs] * n
    nus = []
    for c in per_copy:
        w = np.zeros(n_x)
        for x, p in _choice_weights(c, n_x):
            w[x] = p
        nus.append(w)
    stack_s, seq_s = _members(s, n)
    stack_t, seq_t = _members(t, n)
    ms = seq_s.shape[0]
    copies_s = [_copy_outputs(stack_s, nu) for nu in nus]
    copies_t = [_copy_outputs(stack_t, nu) for nu in nus]
    sizes = [c.shape[1] for c in copies_s]

    def member_rows(copies, seqs):
        rows = np.ones((seqs.shape[0], 1))
        for k, c in enumerate(copies):
            rows = (rows[:, :, None] * c[seqs[:, k]][:, None, :]).reshape(seqs.shape[0], -1)
        return rows

    if math.prod(sizes) <= MAX_OUTCOMES:
        rows = np.vstack([member_rows(copies_s, seq_s), member_rows(copies_t, seq_t)])
        mode = "product"
    else:
        cls = {(): (np.ones(ms + seq_t.shape[0]), 1.0)}
        for k in range(n):
            c = np.vstack([copies_s[k][seq_s[:, k]], copies_t[k][seq_t[:, k]]])
            nxt: dict = {}
            for probs, mult in cls.values():
                for o in range(c.shape[1]):
                    p = probs * c[:, o]
                    if not p.any():
                        continue
                    key = _key(p)
                    if key in nxt:
                        nxt[key] = (nxt[key][0], nxt[key][1] + mult)
                    else:
                        nxt[key] = (p, mult)
            if len(nxt) > MAX_OUTCOMES:
                raise SizeCapError(f"{len(nxt)} lumped outcomes exceed {MAX_OUTCOMES}")
            cls = nxt
        rows = np.array([p * m for p, m in cls.values()]).T
        mode = "lumped"
    alphas, betas, _ = _final_errors(rows[:ms], rows[ms:], eps, None)
    i, j = int(np.argmax(alphas)), int(np.argmax(betas))
    pair = ErrorPair(alpha=float(min(max(alphas[i], 0.0), 1.0)),
                     beta=float(min(max(betas[j], 0.0), 1.0)),
                     worst_case_witness={"s_member": seq_s[i].tolist(),
                                         "t_member": seq_t[j].tolist()},
                     n=n, details={"mode": mode, "outcomes": rows.shape[1]})
    return pair, pair.exponent


# ---------------------------------------------------------------------------
# Adversarial sampling model
# ---------------------------------------------------------------------------

def _as_rows(vertices) -> np.ndarray:
    rows = np.array([np.asarray(getattr(v, "entries", v), dtype=float) for v in vertices])
    if rows.ndim != 2:
        raise DimensionError("vertices must share one alphabet")
    return rows


def _check_region(region, omega: int, n: int) -> np.ndarray:
    values = np.asarray(getattr(region, "values", region), dtype=float)
    if omega ** n > MAX_OUTCOMES:
        raise SizeCapError(f"{omega}^{n} sample histories exceed {MAX_OUTCOMES}")
    if values.shape != (omega ** n,):
        raise DimensionError(f"test has {values.size} entries, expected {omega ** n}")
    return values


def adversary_best_response(test_region: Union[TestOperator, np.ndarray], q_vertices,
                            n: int) -> tuple[float, AdversaryPolicy]:
    """Largest acceptance probability an adaptive adversary can force.

    At every step the adversary picks one of ``q_vertices`` after seeing the
    previous samples. Backward induction over sample histories (index
    sum_k o_k |Omega|^(n-1-k)) gives the exact optimum and an optimal policy.
    Mixing vertices never helps since each step's contribution is affine.
    """
    q = _as_rows(q_vertices)
    omega = q.shape[1]
    value = _check_region(test_region, omega, n)
    choices = [None] * n
    for k in range(n - 1, -1, -1):
        cont = value.reshape(-1, omega) @ q.T  # (omega^k, K)
        choices[k] = np.argmax(cont, axis=1)
        value = cont[np.arange(cont.shape[0]), choices[k]]
    return float(value[0]), AdversaryPolicy(n, omega, choices)


def adversary_value(policy: AdversaryPolicy, test_region, q_vertices) -> float:
    """Acceptance probability of ``test_region`` under one adversary policy."""
    q = _as_rows(q_vertices)
    omega = q.shape[1]
    values = _check_region(test_region, omega, policy.horizon)
    dist = np.ones(1)
    for k in range(policy.horizon):
        dist = (dist[:, None] * q[policy.choices[k]]).reshape(-1)
    return float(dist @ values)


def _type_table(omega: int, n: int):
    """Sequence index -> type index, and the list of types as count vectors."""
    digits = np.array(list(itertools.product(range(omega), repeat=n)), dtype=int).reshape(-1, n)
    counts = np.stack([(digits == o).sum(axis=1) for o in range(omega)], axis=1)
    types, inverse = np.unique(counts, axis=0, return_inverse=True)
    return inverse.reshape(-1), types


def hull_distance(p: np.ndarray, vertices: np.ndarray) -> float:
    """min over the hull of ``vertices`` of KL(p || mixture)."""
    a = p[None, None, :]
    b = vertices[:, None, :]
    val, _, _, _ = _hull_minimize(a, b, nu=np.ones(1))
    return val


@dataclass
class UniversalTest:
    test: TestOperator
    radius: float
    boundary_fraction: float
    alpha: float


def universal_adversarial_test(p_vertices, q_vertices, n: int,
                               eps: float = DEFAULT_EPS) -> UniversalTest:
    """Method-of-types test for the adversarial model.

    Accepts the null when the empirical type lies within a KL ball around the
    hull of ``p_vertices``. The radius is the smallest type distance whose
    exact worst-case type-I error is at most ``eps``; the boundary type
    classes are accepted with probability gamma, chosen by bisection so the
    type-I error equals ``eps`` whenever that is attainable.
    ``q_vertices`` only fixes the alphabet; the test does not depend on it.
    """
    p = _as_rows(p_vertices)
    omega = p.shape[1]
    if _as_rows(q_vertices).shape[1] != omega:
        raise DimensionError("vertex sets live on different alphabets")
    if omega ** n > MAX_OUTCOMES:
        raise SizeCapError(f"{omega}^{n} sample histories exceed {MAX_OUTCOMES}")
    seq_type, types = _type_table(omega, n)
    dist = np.array([hull_distance(tp / n, p) for tp in types])
    levels = np.unique(np.round(dist, 12))

    def alpha_of(accept_types: np.ndarray) -> float:
        reject = 1.0 - accept_types[seq_type]
        return adversary_best_response(reject, p, n)[0]

    accept = np.zeros(len(types))
    chosen, gamma, alpha = levels[-1], 1.0, 0.0
    for r in levels:
        inner = (np.round(dist, 12) < r).astype(float)
        boundary = np.round(dist, 12) == r
        full = alpha_of(inner + boundary)
        if full <= eps + 1e-12:
            lo, hi = 0.0, 1.0
            if alpha_of(inner) <= eps + 1e-12:
                hi = 0.0
            else:
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if alpha_of(inner + mid * boundary) > eps:
                        lo = mid
                    else:
                        hi = mid
            chosen, gamma = r, hi
            accept = inner + hi * boundary
            alpha = alpha_of(accept)
            break
    return UniversalTest(TestOperator(accept[seq_type]), float(chosen), float(gamma), float(alpha))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class MonteCarloResult:
    alpha: float
    beta: float
    ci_low: float
    ci_high: float
    samples: int
    threshold: float
    n: int

    @property
    def exponent(self) -> float:
        return math.inf if self.beta <= 0.0 else -math.log2(self.beta) / self.n


def clopper_pearson(k: int, m: int, level: float = 0.95) -> tuple[float, float]:
    a = (1.0 - level) / 2.0
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a, k, m - k + 1))
    hi = 1.0 if k == m else float(stats.beta.ppf(1.0 - a, k + 1, m - k))
    return lo, hi


def _simulate_loglik(policy: AdaptivePolicy, stack: np.ndarray, seq: np.ndarray,
                     all_stacks: list, all_seqs: list, n: int, samples: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Log2-likelihoods under every member of ``all_seqs`` for histories drawn
    from the member ``seq``; returns one array (samples, members) per family."""
    state_ids = {policy.initial_state: 0}
    states = [policy.initial_state]
    sid = np.zeros(samples, dtype=int)
    logs = [np.zeros((samples, sq.shape[0])) for sq in all_seqs]
    with np.errstate(divide="ignore"):
        for k in range(n):
            xs = np.empty(samples, dtype=int)
            for u in np.unique(sid):
                idx = np.flatnonzero(sid == u)
                w = _choice_weights(policy.choose(states[u]), policy.input_size)
                if len(w) == 1:
                    xs[idx] = w[0][0]
                else:
                    sym, pr = zip(*w)
                    xs[idx] = rng.choice(sym, size=idx.size, p=np.array(pr) / sum(pr))
            rows = stack[seq[k]][xs]  # (samples, Y)
            ys = (rng.random(samples)[:, None] > np.cumsum(rows, axis=1)).sum(axis=1)
            ys = np.minimum(ys, rows.shape[1] - 1)
            for fam_i, (st, sq) in enumerate(zip(all_stacks, all_seqs)):
                logs[fam_i] += np.log2(st[sq[:, k]][:, xs, ys].T)
            new = np.empty(samples, dtype=int)
            combos = np.unique(np.stack([sid, xs, ys], axis=1), axis=0)
            for u, x, y in combos:
                ns = policy.update(states[u], int(x), int(y))
                if ns not in state_ids:
                    state_ids[ns] = len(states)
                    states.append(ns)
                mask = (sid == u) & (xs == x) & (ys == y)
                new[mask] = state_ids[ns]
            sid = new
    return logs


def simulate_adaptive_mc(policy: AdaptivePolicy, s: HypothesisFamily, t: HypothesisFamily,
                         n: int, eps: float = DEFAULT_EPS, samples: int = DEFAULT_SAMPLES,
                         seed: int = 0, level: float = 0.95) -> MonteCarloResult:
    """Monte Carlo errors of a generalized likelihood-ratio test.

    The statistic is max_i log P_i(h) - max_j Q_j(h); its threshold is the
    smallest empirical eps-quantile over null members, so each estimated
    type-I error is at most eps. The worst type-II error over alternative
    members is reported with a Clopper-Pearson interval. Member m draws from
    the stream (seed, m), so results do not depend on evaluation order.
    """
    _check_pair(s, t)
    stack_s, seq_s = _members(s, n)
    stack_t, seq_t = _members(t, n)
    stacks, seqs = [stack_s, stack_t], [seq_s, seq_t]

    def statistic(logs):
        return logs[0].max(axis=1) - logs[1].max(axis=1)

    thresholds = []
    for m in range(seq_s.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence([seed, m]))
        st = statistic(_simulate_loglik(policy, stack_s, seq_s[m], stacks, seqs, n, samples, rng))
        thresholds.append(np.quantile(st, eps, method="lower"))
    tau = float(min(thresholds))
    alpha = 0.0
    for m in range(seq_s.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence([seed, m]))
        st = statistic(_simulate_loglik(policy, stack_s, seq_s[m], stacks, seqs, n, samples, rng))
        alpha = max(alpha, float(np.mean(st < tau)))
    worst = (-1, 0)
    for m in range(seq_t.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence([seed, seq_s.shape[0] + m]))
        st = statistic(_simulate_loglik(policy, stack_t, seq_t[m], stacks, seqs, n, samples, rng))
        hits = int(np.sum(st >= tau))
        if hits > worst[0]:
            worst = (hits, m)
    lo, hi = clopper_pearson(worst[0], samples, level)
    return MonteCarloResult(alpha=alpha, beta=worst[0] / samples, ci_low=lo, ci_high=hi,
                            samples=samples, threshold=tau, n=n)


# ---------------------------------------------------------------------------
# Exponent fits
# ---------------------------------------------------------------------------

def estimate_exponent(values: dict, n_min: int = 8, n_max: Optional[int] = None
                      ) -> tuple[float, float]:
    """Least-squares slope of -log2(beta) against n, and the fit's r^2.

    A perfectly flat sequence has r^2 = 1 by convention.
    """
    pts = sorted((int(n), float(b)) for n, b in values.items()
                 if n >= n_min and (n_max is None or n <= n_max))
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points in [{n_min}, {n_max}], got {len(pts)}")
    ns = np.array([p[0] for p in pts], dtype=float)
    betas = np.array([p[1] for p in pts])
    if np.any(betas <= 0) or np.any(betas > 1):
        raise ValueError("betas must lie in (0, 1]")
    y = -np.log2(betas)
    slope, icept = np.polyfit(ns, y, 1)
    resid = y - (slope * ns + icept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(slope), r2


# ---------------------------------------------------------------------------
# Built-in example: two channel pairs told apart by a flag bit
# ---------------------------------------------------------------------------

def _rational(rows) -> ClassicalChannel:
    return ClassicalChannel(np.array([[float(Fraction(v)) for v in r] for r in rows]))


def example12() -> tuple[HypothesisSet, HypothesisSet, AdaptivePolicy]:
    """Two-input channels with outputs (a, b) in {0,1}^2, ordered 00, 01, 10, 11.

    The second output bit flags which pair is in use. E1/F1 differ only on
    input 0, E2/F2 only on input 1. The canonical adaptive policy feeds input
    0 first and then repeats the flag bit it observed, so every later use
    probes the informative input.
    """
    e1 = _rational([["1/2", 0, "1/2", 0], ["1/2", 0, "1/2", 0]])
    e2 = _rational([[0, "1/2", 0, "1/2"], [0, "1/2", 0, "1/2"]])
    f1 = _rational([["3/4", 0, "1/4", 0], ["1/2", 0, "1/2", 0]])
    f2 = _rational([[0, "1/2", 0, "1/2"], [0, "3/4", 0, "1/4"]])
    s = HypothesisSet((e1, e2))
    t = HypothesisSet((f1, f2))

    def choose(state):
        return 0 if state is None else state

    def update(state, x, y):
        return y % 2 if state is None else state

    policy = AdaptivePolicy(2, 4, choose, update, initial_state=None, name="example12-canonical")
    return s, t, policy


def alternating_inputs(n: int) -> list[int]:
    return [k % 2 for k in range(n)]
