"""Acceptance checks, one per criterion.

Run with pytest (one PASS/FAIL line is printed per criterion) or directly:
``python tests/test_acceptance.py``. Every check also enforces its runtime
limit.
"""

import math
import sys
import time

import numpy as np
import pytest

from chandisc.channel_div import classical_channel_divergence, regularized_bracket
from chandisc.core import apply_channel, embed_classical
from chandisc.divergences import (binary_entropy, dh_classical, dh_quantum, dmax, kl_array,
                                  kl_divergence, quantum_relative_entropy)
from chandisc.exponents import (HypothesisSet, _hull_minimize, composite_test_exponent_exact,
                                convex_classical_exponent, parallel_exponent_finite_classical,
                                worst_case_iid_exponent)
from chandisc.instances import (rand_channel, rand_commuting_pair, rand_density, rand_prob,
                                rand_quantum_channel, rng_for)
from chandisc.protocols import (HypothesisFamily, adversary_best_response, alternating_inputs,
                                estimate_exponent, evaluate_adaptive_strategy,
                                evaluate_parallel_strategy, example12,
                                universal_adversarial_test)

LOG43 = math.log2(4 / 3)


def c1():
    s, t, _ = example12()
    v = worst_case_iid_exponent(s, t).value
    err = abs(v - LOG43 / 2)
    return err <= 1e-9, f"value {v:.12f}, |error| {err:.1e} (tol 1e-9)"


def c2():
    s, t, _ = example12()
    rep = parallel_exponent_finite_classical(s, t)
    iid = worst_case_iid_exponent(s, t).value
    e_val = abs(rep.value - LOG43 / 4)
    e_w = float(np.abs(rep.input_certificate - 0.5).max())
    e_r = abs(iid / rep.value - 2.0)
    ok = e_val <= 1e-6 and e_w <= 1e-6 and e_r <= 1e-6
    return ok, (f"value {rep.value:.12f} (|error| {e_val:.1e}), weights "
                f"{np.round(rep.input_certificate, 9).tolist()}, ratio {iid / rep.value:.9f}")


def c3():
    s, t, policy = example12()
    fs, ft = HypothesisFamily(s), HypothesisFamily(t)
    ada, par = {}, {}
    for n in range(4, 17):
        ada[n] = evaluate_adaptive_strategy(policy, fs, ft, n, 0.05).beta
        par[n] = evaluate_parallel_strategy(fs, ft, alternating_inputs(n), n, 0.05)[0].beta
    sa, ra = estimate_exponent(ada, 8, 16)
    sp, rp = estimate_exponent(par, 8, 16)
    dominated = all(ada[n] < par[n] for n in ada)
    ok = 0.15 <= sa <= 0.22 and 0.07 <= sp <= 0.12 and dominated
    return ok, (f"adaptive slope {sa:.4f} (band [0.15, 0.22], r2 {ra:.3f}), parallel slope "
                f"{sp:.4f} (band [0.07, 0.12], r2 {rp:.3f}), adaptive better at all n>=4: "
                f"{dominated}")


def c4():
    rng = rng_for(401)
    worst_c = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 7))
        p, q = rand_prob(d, rng), rand_prob(d, rng)
        eps = float(rng.choice([0.0, 0.1, 0.5]))
        a = dh_classical(p, q, eps)[0]
        b = composite_test_exponent_exact([p], [q], eps)[0]
        worst_c = max(worst_c, 0.0 if a == b else abs(a - b))
    worst_q = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 5))
        r, sg = rand_commuting_pair(d, rng)
        eps = float(rng.choice([0.0, 0.1, 0.5]))
        # common eigenbasis of the commuting pair
        u = np.linalg.eigh(r.matrix + math.pi * sg.matrix)[1]
        p = np.clip(np.real(np.einsum("ij,jk,ki->i", u.conj().T, r.matrix, u)), 0, None)
        q = np.clip(np.real(np.einsum("ij,jk,ki->i", u.conj().T, sg.matrix, u)), 0, None)
        a = dh_quantum(r, sg, eps)[0]
        b = dh_classical(p / p.sum(), q / q.sum(), eps)[0]
        worst_q = max(worst_q, 0.0 if a == b else abs(a - b))
    return worst_c <= 1e-9 and worst_q <= 1e-9, (
        f"max |dh - composite| {worst_c:.1e}, max |dh_quantum - dh_classical| {worst_q:.1e} "
        f"(tol 1e-9)")


def c5():
    rng = rng_for(501)
    worst = math.inf
    for _ in range(1000):
        eps = float(rng.uniform(0.01, 0.9))
        p, q = rand_prob(int(rng.integers(2, 6)), rng), None
        q = rand_prob(p.alphabet_size, rng)
        bound = (kl_divergence(p, q) + binary_entropy(eps)) / (1 - eps)
        worst = min(worst, bound - dh_classical(p, q, eps)[0])
    for _ in range(1000):
        eps = float(rng.uniform(0.01, 0.9))
        r, sg = rand_density(2, rng), rand_density(2, rng)
        bound = (quantum_relative_entropy(r, sg) + binary_entropy(eps)) / (1 - eps)
        worst = min(worst, bound - dh_quantum(r, sg, eps)[0])
    return worst >= -1e-9, f"min slack {worst:.3e} (tol -1e-9)"


def c6():
    rng = rng_for(601)
    worst_pd, worst_iid = 0.0, 0.0
    for _ in range(50):
        k = int(rng.integers(2, 4))
        n_x, n_y = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        s = HypothesisSet(tuple(rand_channel(n_x, n_y, rng) for _ in range(k)), take_hull=True)
        t = HypothesisSet(tuple(rand_channel(n_x, n_y, rng) for _ in range(k)), take_hull=True)
        rep = convex_classical_exponent(s, t)
        iid = worst_case_iid_exponent(s, t).value
        worst_pd = max(worst_pd, rep.value - rep.lower)
        worst_iid = max(worst_iid, abs(rep.value - iid))
    ok = worst_pd <= 1e-3 and worst_iid <= 1e-3
    return ok, f"max primal-dual {worst_pd:.1e}, max |convex - iid| {worst_iid:.1e} (tol 1e-3)"


def _hull_kl(p, q):
    """min over the two hulls of KL."""
    return _hull_minimize(p[:, None, :], q[:, None, :], nu=np.ones(1))[0]


def c7():
    rng = rng_for(11)
    ns = (6, 8, 10, 12)
    far, non_monotone = [], []
    for i in range(10):
        p = np.array([rand_prob(2, rng).entries for _ in range(2)])
        q = np.array([rand_prob(2, rng).entries for _ in range(2)])
        target = _hull_kl(p, q)
        exps = []
        for n in ns:
            test = universal_adversarial_test(p, q, n, 0.05).test
            beta = adversary_best_response(test, q, n)[0]
            exps.append(-math.log2(beta) / n if beta > 0 else math.inf)
        if not abs(exps[-1] - target) <= 0.08:
            far.append(f"#{i}: {exps[-1]:.4f} vs {target:.4f}")
        if any(b < a - 1e-9 for a, b in zip(exps, exps[1:])):
            non_monotone.append(f"#{i}: {np.round(exps, 4).tolist()}")
    ok = not far and not non_monotone
    return ok, (f"{10 - len(far)}/10 within 0.08 at n=12, {10 - len(non_monotone)}/10 "
                f"monotone; off: {far}; non-monotone: {non_monotone}")


def c8():
    rng = rng_for(801)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        p, q = rand_prob(d, rng), rand_prob(d, rng)
        w = rand_channel(d, int(rng.integers(2, 5)), rng)
        lhs = kl_divergence(p, q)
        rhs = kl_divergence(apply_channel(w, p), apply_channel(w, q))
        if math.isfinite(rhs):
            worst = max(worst, rhs - lhs)
    for fn in (quantum_relative_entropy, dmax):
        for _ in range(1000):
            r, sg = rand_density(2, rng), rand_density(2, rng)
            ch = rand_quantum_channel(2, int(rng.integers(2, 4)), rng)
            lhs = fn(r, sg)
            rhs = fn(apply_channel(ch, r), apply_channel(ch, sg))
            if math.isfinite(rhs):
                worst = max(worst, rhs - lhs)
    return worst <= 1e-8, f"max increase under processing {worst:.1e} (tol 1e-8)"


def c9():
    rng = rng_for(901)
    worst16 = -math.inf
    for _ in range(100):
        d = int(rng.integers(2, 5))
        s_n = [rand_prob(d, rng) for _ in range(int(rng.integers(1, 4)))]
        t_n = [rand_prob(d, rng) for _ in range(int(rng.integers(1, 4)))]
        eps = float(rng.uniform(0.0, 0.5))
        comp = composite_test_exponent_exact(s_n, t_n, eps)[0]
        pair = min(dh_classical(p, q, eps)[0] for p in s_n for q in t_n)
        if math.isfinite(comp):
            worst16 = max(worst16, comp - pair)
    worst26 = -math.inf
    grid = np.linspace(0, 1, 101)
    for _ in range(100):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(2, 4))
        verts = np.array([rand_prob(d, rng).entries for _ in range(k)])
        sigma = rand_prob(d, rng).entries
        if k == 2:
            ws = np.stack([grid, 1 - grid], axis=1)
        else:
            ws = np.array([[a, b, 1 - a - b] for a in grid for b in grid if a + b <= 1 + 1e-12])
        hull = min(kl_array(np.clip(w, 0, None) @ verts, sigma) for w in ws)
        vert = min(kl_array(v, sigma) for v in verts)
        worst26 = max(worst26, (vert - math.log2(d + 1)) - hull)
    ok = worst16 <= 1e-9 and worst26 <= 1e-6
    return ok, (f"max composite - pairwise {worst16:.1e} (tol 1e-9); max violation of the "
                f"dimension bound {worst26:.2f} (tol 1e-6)")


def c10():
    rng = rng_for(1001)
    worst_low, worst_order = -math.inf, -math.inf
    for i in range(50):
        e, f = rand_channel(2, 2, rng, floor=0.02), rand_channel(2, 2, rng, floor=0.02)
        rep = regularized_bracket(embed_classical(e), embed_classical(f), restarts=4, seed=i)
        worst_low = max(worst_low, classical_channel_divergence(e, f) - rep.lower)
        worst_order = max(worst_order, rep.lower - rep.upper)
    ok = worst_low <= 1e-4 and worst_order <= 0.0
    return ok, (f"max classical - lower {worst_low:.1e} (tol 1e-4), max lower - upper "
                f"{worst_order:.1e}")


CRITERIA = [(1, c1, 1), (2, c2, 1), (3, c3, 120), (4, c4, 30), (5, c5, 30), (6, c6, 120),
            (7, c7, 180), (8, c8, 60), (9, c9, 60), (10, c10, 120)]


def evaluate(number, fn, limit):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < limit
    line = (f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}; "
            f"runtime {elapsed:.2f} s (limit {limit} s)")
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("number,fn,limit", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, fn, limit, capsys):
    ok, line = evaluate(number, fn, limit)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
