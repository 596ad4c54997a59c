import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from domsparse import analysis as A
from domsparse import families as F
from domsparse import samplers as S
from domsparse.core import DomainError, restrict
from domsparse.rng import RngStream

from instances import chi2_statistic, random_dpp, spanning_trees, uniform

P_MIN = 1e-3


def gof(samples, mu):
    obs, exp = chi2_statistic(samples, A.enumerate_family(mu))
    assert obs.sum() == len(samples)
    return chisquare(obs, exp).pvalue


def test_exact_sample_single_entry():
    d = A.enumerate_family(F.TableFamily(3, 1, {(2,): 1.0}))
    rng = RngStream(0).generator()
    assert {S.exact_sample(d, rng) for _ in range(20)} == {(2,)}


def test_exact_sample_uniform_frequencies():
    d = A.enumerate_family(uniform(4, 2))
    rng = RngStream(1).generator()
    counts = Counter(S.exact_sample(d, rng) for _ in range(60_000))
    assert len(counts) == 6
    assert all(abs(c / 60_000 - 1 / 6) < 0.01 for c in counts.values())


def test_exact_sample_reproducible():
    d = A.enumerate_family(spanning_trees(4))
    a = [S.exact_sample(d, RngStream(5).generator()) for _ in range(3)]
    g1, g2 = RngStream(5).generator(), RngStream(5).generator()
    assert [S.exact_sample(d, g1) for _ in range(50)] == [S.exact_sample(d, g2) for _ in range(50)]
    assert a[0] == a[1]


def test_floyd_sample_is_uniform():
    rng = RngStream(2).generator()
    counts = Counter(tuple(S.floyd_sample(5, 2, rng).tolist()) for _ in range(20_000))
    assert set(counts) == set(itertools.combinations(range(5), 2))
    assert chisquare(list(counts.values())).pvalue > P_MIN


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 40), st.data())
def test_subset_excluding_properties(n, data):
    excl = data.draw(st.sets(st.integers(0, max(n - 1, 0)), max_size=n)) if n else set()
    m = data.draw(st.integers(0, n - len(excl)))
    out = S.uniform_subset_excluding(n, excl, m, RngStream(data.draw(st.integers(0, 100))).generator())
    assert len(out) == m == len(set(out.tolist()))
    assert not set(out.tolist()) & excl
    assert all(0 <= x < n for x in out.tolist())
    assert list(out) == sorted(out)


def test_floyd_rejects_bad_sizes():
    with pytest.raises(DomainError):
        S.floyd_sample(3, 4, RngStream(0).generator())


def test_downup_paired_ell_one_is_stuck():
    mu = F.make_paired(8)
    rng = RngStream(3).generator()
    state = (1, 5)
    for _ in range(30):
        state = S.downup_step(mu, state, 1, rng)
        assert state == (1, 5)


def test_downup_full_resample_is_exact():
    mu = random_dpp(6, 2, seed=8)
    rng = RngStream(4).generator()
    draws = [S.downup_step(mu, (0, 1) if mu.log_weight((0, 1)) > -np.inf else mu.initial_state(rng), 2, rng)
             for _ in range(30_000)]
    assert gof(draws, mu) > P_MIN


def test_containment_examples():
    assert S.subset_containment_probability(4, 3, 1, 0) == pytest.approx((2 / 3, 3 / 4, 3 / 4))
    assert S.subset_containment_probability(7, 5, 0, 2) == (1.0, 1.0, 1.0)
    assert S.subset_containment_probability(9, 9, 3, 2).exact == pytest.approx(1.0)
    with pytest.raises(DomainError):
        S.subset_containment_probability(5, 2, 2, 1)


def test_containment_matches_enumeration_small():
    for n in range(1, 9):
        for t in range(n + 1):
            for v in range(t + 1):
                Ts = list(itertools.combinations(range(n - v), t - v))
                for u in range(t - v + 1):
                    hits = sum(set(range(u)) <= set(T) for T in Ts)
                    assert S.subset_containment_probability(n, t, u, v).exact == pytest.approx(hits / len(Ts), rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 400), st.data())
def test_containment_sandwich(n, data):
    t = data.draw(st.integers(0, n))
    v = data.draw(st.integers(0, min(t, 12)))
    u = data.draw(st.integers(0, min(t - v, 12)))
    lo, ex, hi = S.subset_containment_probability(n, t, u, v)
    assert 0 <= lo <= ex <= hi <= 1


def test_choose_t_examples():
    assert S.choose_t(100, 2, 1.0, C=1, epsilon=0.25, c0=1) == 4
    assert S.choose_t(100, 2, 0.5, C=1, epsilon=0.25, c0=1) == 11
    with pytest.raises(DomainError):
        S.choose_t(100, 2, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 10_000), st.integers(1, 8), st.floats(0.05, 1.0), st.floats(1, 10), st.floats(0.01, 0.25),
       st.floats(0.01, 100))
def test_choose_t_clamped(n, k, alpha, C, eps, c0):
    if n < 2 * k:
        return
    t = S.choose_t(n, k, alpha, C, eps, c0)
    assert 2 * k <= t <= n


def test_chain_config_invariants():
    with pytest.raises(DomainError):
        S.ChainConfig(t=4, steps=0)
    with pytest.raises(DomainError):
        S.ChainConfig(t=4, epsilon=0.3)
    with pytest.raises(DomainError):
        S.ChainConfig(t=4, inner="magic")
    with pytest.raises(DomainError):
        S.ChainConfig(t=3).validate_for(4, 2)


def test_intermediate_at_full_size_is_fresh_sample():
    mu = spanning_trees(4)
    cfg = S.ChainConfig(t=6)
    rng = RngStream(6).generator()
    draws = [S.intermediate_step(mu, (0, 1, 2), cfg, rng) for _ in range(16_000)]
    assert gof(draws, mu) > P_MIN


@pytest.mark.parametrize("mu, t, S0", [(uniform(5, 2), 4, (0, 1)), (F.make_paired(8), 4, (0, 4))], ids=["uniform", "paired"])
def test_one_step_law_matches_kernel_row(mu, t, S0):
    d = A.enumerate_family(mu)
    row = A.exact_transition_matrix(d, t).row(S0)
    cfg = S.ChainConfig(t=t, inner="exact")
    rng = RngStream(7).generator()
    draws = Counter(S.intermediate_step(mu, S0, cfg, rng) for _ in range(40_000))
    obs = [draws.get(tuple(s.tolist()), 0) for s in d.sets]
    assert chisquare(obs, row * 40_000).pvalue > P_MIN


def test_paired_small_t_domination_ratio():
    # at t=4 the oracle kernel moves to each other pair w.p. 1/30, ratio 2/15
    P = A.exact_transition_matrix(F.make_paired(8), 4)
    assert P.min_domination_ratio() == pytest.approx(2 / 15)


def test_downup_inner_sampler_matches_restricted_law():
    mu = random_dpp(8, 3, seed=11)
    R = np.arange(8)
    nu = restrict(mu, R)
    rng = RngStream(8).generator()
    start = mu.initial_state(rng)
    for flip in (False, True):
        cfg = S.ChainConfig(t=8, inner="downup", inner_steps=4, complement=flip)
        draws, state = [], start
        for _ in range(5_000):
            state = S.downsample(nu, state, cfg, rng)
            draws.append(state)
        assert gof(draws, mu) > P_MIN


def test_run_chain_zero_steps_and_determinism():
    mu = F.make_paired(8)
    cfg = S.ChainConfig(t=6, steps=3)
    assert S.run_chain(mu, (2, 6), cfg, RngStream(0).generator(), steps=0) == (2, 6)
    a = [S.run_chain(mu, (2, 6), cfg, RngStream(9, (i,))) for i in range(20)]
    b = [S.run_chain(mu, (2, 6), cfg, RngStream(9, (i,))) for i in range(20)]
    assert a == b


def test_steps_for_target():
    assert S.steps_for_target(0.01) == 5
    assert S.steps_for_target(0.05) == 3


def test_calibration_reproduces_t_min():
    cal = S.calibrate_c0([F.make_paired(8)], alpha=0.5, C=1.0)
    assert cal.t_min == {0: 7}
    assert S.choose_t(8, 2, 0.5, 1.0, 0.25, cal.c0) == 7


def test_rejection_acceptance_numbers():
    d = A.enumerate_family(F.make_paired(6))
    mean, top, acc = S.rejection_acceptance(d, 3)
    assert (mean, top) == pytest.approx((0.2, 1 / 3))
    assert acc == pytest.approx(0.6)


def test_rejection_without_start_is_exact():
    mu = F.make_paired(6)
    M = S.max_intermediate_mass(mu, None, 3)
    rng = RngStream(10).generator()
    out = [S.rejection_intermediate_step(mu, None, 3, M, rng) for _ in range(20_000)]
    tries = sum(t for _, t in out)
    assert abs(len(out) / tries - 0.6) < 0.02
    assert gof([s for s, _ in out], mu) > P_MIN


def test_rejection_with_start_matches_weighted_kernel():
    # accepted law of S is proportional to mu(S) * #{T : S inside S0 | T}
    mu = random_dpp(6, 2, seed=5)
    d = A.enumerate_family(mu)
    S0 = tuple(d.sets[int(np.argmax(d.probs))].tolist())
    rest = [e for e in range(6) if e not in S0]
    weight = np.array([sum(set(s) <= set(S0) | set(T) for T in itertools.combinations(rest, 2)) for s in d.sets.tolist()])
    law = d.probs * weight / (d.probs * weight).sum()
    M = S.max_intermediate_mass(mu, S0, 4)
    rng = RngStream(12).generator()
    draws = Counter(S.rejection_intermediate_step(mu, S0, 4, M, rng)[0] for _ in range(20_000))
    obs = [draws.get(tuple(s.tolist()), 0) for s in d.sets]
    assert chisquare(obs, law * 20_000).pvalue > P_MIN


def test_rejection_with_equal_masses_accepts_immediately():
    mu = uniform(5, 2)
    rng = RngStream(11).generator()
    assert all(S.rejection_intermediate_step(mu, (0, 1), 5, 10.0, rng)[1] == 1 for _ in range(50))


def test_rejection_bound_violation():
    mu = F.make_paired(6)
    with pytest.raises(S.SamplerError) as err:
        S.rejection_intermediate_step(mu, (0, 3), 6, 0.5, RngStream(0).generator())
    assert "mass" in err.value.witness


def test_initial_state_table_and_trees():
    table = F.TableFamily(4, 2, {(1, 3): 2.0})
    assert S.find_initial_state(table, 0) == (1, 3)
    trees = spanning_trees(4)
    tree_set = {tuple(s) for s in A.enumerate_family(trees).sets.tolist()}
    assert all(S.find_initial_state(trees, RngStream(i)) in tree_set for i in range(1000))


def test_initial_state_greedy_without_hook():
    mu = F.make_partition_constrained(uniform(6, 3), [[0, 1, 2], [3, 4, 5]], [1, 2])
    for i in range(20):
        s = S.find_initial_state(mu, i)
        assert mu.log_weight(s) > -np.inf


def test_initial_state_empty_support_fails_cleanly():
    mu = F.make_partition_constrained(F.make_paired(4), [[0, 1], [2, 3]], [2, 0])
    with pytest.raises(S.InitialStateError) as err:
        S.find_initial_state(mu, 0)
    assert "prefixes" in err.value.witness
    assert '"witness"' in err.value.to_json()
