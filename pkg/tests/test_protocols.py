import itertools

import numpy as np
import pytest

from chandisc.core import ClassicalChannel, TestOperator
from chandisc.divergences import kl_divergence
from chandisc.exponents import HypothesisSet, PreconditionError, composite_test_lp
from chandisc.instances import rand_channel, rand_prob, rng_for
from chandisc.protocols import (AdaptivePolicy, AdversaryPolicy, HypothesisFamily, SizeCapError,
                                adversary_best_response, adversary_value, alternating_inputs,
                                channel_distance, clopper_pearson, estimate_exponent,
                                evaluate_adaptive_strategy, evaluate_parallel_strategy,
                                family_member_check, simulate_adaptive_mc,
                                universal_adversarial_test)


def fam(vertices, kind="iid", eps=0.0):
    return HypothesisFamily(HypothesisSet(tuple(vertices)), kind, eps)


# --- the built-in example ------------------------------------------------------

def test_example_channels(ex12):
    (e1, e2), (f1, f2) = ex12[0].vertices, ex12[1].vertices
    np.testing.assert_array_equal(f1.matrix, [[0.75, 0, 0.25, 0], [0.5, 0, 0.5, 0]])
    np.testing.assert_array_equal(f2.matrix, [[0, 0.5, 0, 0.5], [0, 0.75, 0, 0.25]])
    assert kl_divergence(e2.row(0), f2.row(0)) == 0.0
    assert kl_divergence(e1.row(1), f1.row(1)) == 0.0
    assert alternating_inputs(5) == [0, 1, 0, 1, 0]


# --- families ------------------------------------------------------------------

def test_membership(ex12):
    e1, e2 = ex12[0].vertices
    iid = HypothesisFamily(ex12[0])
    av = HypothesisFamily(ex12[0], "arbitrarily_varying")
    assert family_member_check(iid, [e1, e1, e1])
    assert not family_member_check(iid, [e1, e2])
    assert family_member_check(av, [e1, e2, e1])
    other = rand_channel(2, 4, rng_for(70))
    assert not family_member_check(av, [e1, other])
    d = channel_distance(e1, e2)
    assert d == pytest.approx(1.0)
    sv = HypothesisFamily(ex12[0], "slightly_varying", 0.5)
    assert not family_member_check(sv, [e1, e2])
    assert family_member_check(HypothesisFamily(ex12[0], "slightly_varying", 1.0), [e1, e2])


def test_family_validation(ex12):
    with pytest.raises(ValueError):
        HypothesisFamily(ex12[0], "sometimes")
    with pytest.raises(ValueError):
        HypothesisFamily(ex12[0], "slightly_varying", 1.5)
    with pytest.raises(PreconditionError):
        evaluate_parallel_strategy(HypothesisFamily(ex12[0], "slightly_varying", 0.1),
                                   HypothesisFamily(ex12[1]), 0, 2)


def test_member_cap(ex12):
    big = HypothesisFamily(ex12[0], "arbitrarily_varying")
    with pytest.raises(SizeCapError):
        evaluate_parallel_strategy(big, HypothesisFamily(ex12[1]), 0, 13)


# --- exact DP against brute force ------------------------------------------------

def _brute_history_probs(table, chans, n, n_y):
    """Probability of every y-history (big-endian index) under a product of chans."""
    out = np.zeros(n_y ** n)
    for ys in itertools.product(range(n_y), repeat=n):
        p = 1.0
        for k in range(n):
            x = table[tuple(ys[:k])]
            p *= chans[k].matrix[x, ys[k]]
        out[int(np.ravel_multi_index(ys, (n_y,) * n))] = p
    return out


def _random_table(rng, n, n_x, n_y):
    return {h: int(rng.integers(n_x)) for k in range(n)
            for h in itertools.product(range(n_y), repeat=k)}


@pytest.mark.parametrize("kind", ["iid", "arbitrarily_varying"])
def test_adaptive_dp_matches_enumeration(kind):
    rng = rng_for(71)
    n, n_x, n_y = 3, 2, 3
    for _ in range(5):
        s = [rand_channel(n_x, n_y, rng) for _ in range(2)]
        t = [rand_channel(n_x, n_y, rng) for _ in range(2)]
        table = _random_table(rng, n, n_x, n_y)
        pol = AdaptivePolicy.from_table(table, n_x, n_y)
        got = evaluate_adaptive_strategy(pol, fam(s, kind), fam(t, kind), n, eps=0.1)
        if kind == "iid":
            seqs = [(i,) * n for i in range(2)]
        else:
            seqs = list(itertools.product(range(2), repeat=n))
        p_rows = np.array([_brute_history_probs(table, [s[i] for i in q], n, n_y) for q in seqs])
        q_rows = np.array([_brute_history_probs(table, [t[i] for i in q], n, n_y) for q in seqs])
        beta, _ = composite_test_lp(p_rows, q_rows, 0.1)
        assert got.beta == pytest.approx(beta, abs=1e-10)
        assert got.alpha <= 0.1 + 1e-9


def test_fixed_final_test_and_conditioning():
    rng = rng_for(72)
    n, k, n_x, n_y = 4, 2, 2, 2
    e = rand_channel(n_x, n_y, rng)
    table = _random_table(rng, n, n_x, n_y)
    prefix = (1, 0)
    single = fam([e])
    for _ in range(5):
        suffix_event = rng.integers(0, 2, size=n_y ** (n - k)).astype(float)
        test = np.zeros(n_y ** n)
        for ys in itertools.product(range(n_y), repeat=n - k):
            idx = np.ravel_multi_index(prefix + ys, (n_y,) * n)
            test[idx] = suffix_event[np.ravel_multi_index(ys, (n_y,) * (n - k))]
        pol = AdaptivePolicy.from_table(table, n_x, n_y, final_test=TestOperator(test))
        joint = 1 - evaluate_adaptive_strategy(pol, single, single, n).alpha
        p_prefix = _brute_history_probs(table, [e] * n, n, n_y).reshape((n_y,) * n)[prefix].sum()
        # the continuation is an (n - k)-step protocol on the same i.i.d. member
        shifted = {h: table[prefix + h] for h in table if len(h) < n - k}
        pol2 = AdaptivePolicy.from_table(shifted, n_x, n_y, final_test=TestOperator(suffix_event))
        cond = 1 - evaluate_adaptive_strategy(pol2, single, single, n - k).alpha
        assert joint == pytest.approx(p_prefix * cond, abs=1e-12)


def test_hull_enrichment_leaves_worst_case_unchanged():
    rng = rng_for(73)
    n, n_x, n_y = 3, 2, 2
    for _ in range(5):
        s = [rand_channel(n_x, n_y, rng) for _ in range(2)]
        t = [rand_channel(n_x, n_y, rng) for _ in range(2)]
        table = _random_table(rng, n, n_x, n_y)
        test = TestOperator(rng.uniform(0, 1, size=n_y ** n))
        pol = AdaptivePolicy.from_table(table, n_x, n_y, final_test=test)
        base = evaluate_adaptive_strategy(pol, fam(s, "arbitrarily_varying"),
                                          fam(t, "arbitrarily_varying"), n)

        def mix(vs):
            w = rng.uniform()
            return ClassicalChannel(w * vs[0].matrix + (1 - w) * vs[1].matrix)
        rich = evaluate_adaptive_strategy(pol, fam(s + [mix(s)], "arbitrarily_varying"),
                                          fam(t + [mix(t)], "arbitrarily_varying"), n)
        assert rich.alpha == pytest.approx(base.alpha, abs=1e-12)
        assert rich.beta == pytest.approx(base.beta, abs=1e-12)


def test_permutation_invariance():
    rng = rng_for(74)
    s = [rand_channel(2, 2, rng) for _ in range(2)]
    t = [rand_channel(2, 2, rng) for _ in range(2)]
    for kind in ("iid", "arbitrarily_varying"):
        a, _ = evaluate_parallel_strategy(fam(s, kind), fam(t, kind), [0, 1, 1], 3, 0.1)
        b, _ = evaluate_parallel_strategy(fam(s, kind), fam(t, kind), [1, 0, 1], 3, 0.1)
        assert a.alpha == pytest.approx(b.alpha, abs=1e-12)
        assert a.beta == pytest.approx(b.beta, abs=1e-12)


def test_parallel_equals_adaptive_sequence():
    rng = rng_for(75)
    s = [rand_channel(2, 3, rng) for _ in range(2)]
    t = [rand_channel(2, 3, rng) for _ in range(2)]
    seq = [0, 1, 1, 0]
    par, _ = evaluate_parallel_strategy(fam(s), fam(t), seq, 4, 0.1)
    ada = evaluate_adaptive_strategy(AdaptivePolicy.from_sequence(seq, 2, 3), fam(s), fam(t), 4, 0.1)
    assert par.beta == pytest.approx(ada.beta, abs=1e-10)


@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_adaptive_dominates_constant_parallel(ex12, eps):
    s, t, canonical = ex12
    fs, ft = HypothesisFamily(s), HypothesisFamily(t)
    choices = (0, 1, np.array([0.5, 0.5]))
    for n in range(1, 9):
        par = [evaluate_parallel_strategy(fs, ft, c, n, eps)[0].beta for c in choices]
        # parallel strategies are adaptive ones that ignore the history
        ada = [evaluate_adaptive_strategy(AdaptivePolicy.constant(c, 2, 4), fs, ft, n, eps).beta
               for c in choices]
        ada.append(evaluate_adaptive_strategy(canonical, fs, ft, n, eps).beta)
        assert min(ada) <= min(par) + 1e-12
        np.testing.assert_allclose(ada[:3], par, atol=1e-10)
        if n >= 4:
            assert ada[-1] < min(par)


def test_class_cap(ex12):
    s, t, _ = ex12
    pol = AdaptivePolicy.from_sequence(alternating_inputs(6), 2, 4)
    with pytest.raises(SizeCapError):
        evaluate_adaptive_strategy(pol, HypothesisFamily(s), HypothesisFamily(t), 6,
                                   max_classes=2)


def test_equal_families_flat_exponent(ex12):
    s, _, policy = ex12
    fs = HypothesisFamily(s)
    betas = {n: evaluate_adaptive_strategy(policy, fs, fs, n, 0.05).beta for n in range(8, 13)}
    slope, _ = estimate_exponent(betas)
    assert abs(slope) <= 1e-3


# --- adversary -------------------------------------------------------------------

def test_adversary_singleton_is_product_probability():
    rng = rng_for(76)
    p = rand_prob(3, rng).entries
    region = rng.integers(0, 2, size=27).astype(float)
    value, _ = adversary_best_response(region, [p], 3)
    prod = np.einsum("a,b,c->abc", p, p, p).ravel()
    assert value == pytest.approx(prod @ region, abs=1e-14)


def test_adversary_beats_every_enumerated_policy():
    rng = rng_for(77)
    for n in (1, 2, 3):
        q = [rand_prob(2, rng).entries for _ in range(2)]
        region = rng.uniform(0, 1, size=2 ** n)
        best, pol = adversary_best_response(region, q, n)
        assert adversary_value(pol, region, q) == pytest.approx(best, abs=1e-14)
        vals = []
        for bits in itertools.product(range(2), repeat=2 ** n - 1):
            it = iter(bits)
            choices = [np.array([next(it) for _ in range(2 ** k)]) for k in range(n)]
            vals.append(adversary_value(AdversaryPolicy(n, 2, choices), region, q))
        assert best == pytest.approx(max(vals), abs=1e-14)


def test_adversary_cap():
    with pytest.raises(SizeCapError):
        adversary_best_response(np.zeros(2 ** 13), [[0.5, 0.5]], 13)


def test_adversary_policy_table_depth():
    _, pol = adversary_best_response(np.ones(8), [[0.5, 0.5], [0.2, 0.8]], 3)
    assert len(pol.table(2)) == 1 + 2


def test_universal_test_level():
    rng = rng_for(78)
    p = [rand_prob(2, rng).entries for _ in range(2)]
    q = [rand_prob(2, rng).entries for _ in range(2)]
    for n in (4, 6, 8):
        ut = universal_adversarial_test(p, q, n, 0.05)
        assert ut.alpha <= 0.05 + 1e-9
        worst_alpha, _ = adversary_best_response(1 - ut.test.values, p, n)
        assert worst_alpha == pytest.approx(ut.alpha, abs=1e-12)


# --- Monte Carlo and fits -----------------------------------------------------------

def test_clopper_pearson():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi


def test_monte_carlo_agrees_with_exact(ex12):
    s, t, policy = ex12
    fs, ft = HypothesisFamily(s), HypothesisFamily(t)
    n = 6
    exact = evaluate_adaptive_strategy(policy, fs, ft, n, 0.05)
    mc = simulate_adaptive_mc(policy, fs, ft, n, 0.05, samples=20000, seed=3)
    again = simulate_adaptive_mc(policy, fs, ft, n, 0.05, samples=20000, seed=3)
    assert mc.beta == again.beta and mc.threshold == again.threshold
    assert mc.alpha <= 0.05 + 1e-12
    # the exact test is optimal, so the GLR test cannot beat it beyond sampling error
    assert mc.ci_high >= exact.beta


def test_estimate_exponent_oracles():
    c = 0.3
    slopes = []
    for n_max in (20, 60, 200, 1000):
        vals = {n: 2.0 ** (-c * n) * n / 1000 for n in range(8, n_max + 1)}
        slopes.append(estimate_exponent(vals)[0])
    # the log(n) prefactor biases short windows downward; the bias shrinks like 1/n
    assert all(a < b < c for a, b in zip(slopes, slopes[1:]))
    assert slopes[-1] == pytest.approx(c, abs=0.01)
    slope, r2 = estimate_exponent({n: 0.5 for n in range(8, 12)})
    assert abs(slope) <= 1e-12 and r2 == 1.0
    with pytest.raises(ValueError):
        estimate_exponent({8: 0.5, 9: 0.4})
