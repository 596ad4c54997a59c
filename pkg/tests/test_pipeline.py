import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from domsparse import analysis as A
from domsparse import families as F
from domsparse import pipeline as P
from domsparse.core import DomainError, ExternalField, SubdivisionMap, restrict, subdivide
from domsparse.rng import RngStream
from domsparse.samplers import ChainConfig, exact_sample

from instances import chi2_statistic, random_dpp, random_table, spanning_trees, uniform


def exact_sampler(mu):
    d = A.enumerate_family(mu)
    return lambda rng: exact_sample(d, rng)


def test_estimates_uniform_sum_exactly_k():
    mu = uniform(4, 2)
    est = P.estimate_marginals(mu, exact_sampler(mu), 500, 0.5, RngStream(0).generator())
    assert est.p.sum() == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(est.p, 0.5, atol=0.05)


def test_estimates_blend_of_exact_marginals():
    mu = F.TableFamily(4, 2, {(0, 1): 1.0, (0, 2): 1.0})
    est = P.estimate_marginals(mu, exact_sampler(mu), 10_000, 0.5, RngStream(1).generator())
    assert est.p[0] == pytest.approx(0.75, abs=1e-12)
    assert est.p[3] == pytest.approx(0.25, abs=1e-12)
    assert est.p[1] == pytest.approx(0.5, abs=0.01)


def test_estimates_reject_bad_inputs():
    mu = uniform(4, 2)
    with pytest.raises(DomainError):
        P.estimate_marginals(mu, exact_sampler(mu), 0)
    with pytest.raises(DomainError):
        P.estimate_marginals(mu, exact_sampler(mu), 10, eta=1.0)
    with pytest.raises(DomainError):
        P.MarginalEstimates(np.array([1.0, 0.5, 0.5]), 1, 0.5, 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.floats(0.01, 0.99), st.integers(0, 2**31 - 1))
def test_estimate_invariants_and_linear_ground_set(n, k, eta, seed):
    k = min(k, n)
    raw = np.random.default_rng(seed).exponential(size=n) ** 3
    est = P.MarginalEstimates.from_marginals(raw, k, eta)
    assert abs(est.p.sum() - k) <= 1e-9
    assert (est.p >= eta * k / n - 1e-12).all()
    smap, _ = P.isotropic_transform(uniform(n, k), est)
    assert smap.size <= 2 * n


def test_isotropic_transform_example():
    est = P.MarginalEstimates(np.array([1.0, 0.5, 0.25, 0.25]), 0, 0.5, 2)
    smap, sub = P.isotropic_transform(uniform(4, 2), est)
    assert smap.counts.tolist() == [2, 1, 1, 1]
    assert smap.size == 5 and sub.n == 5


def test_isotropic_transform_uniform_is_identity():
    mu = uniform(6, 3)
    est = P.MarginalEstimates.from_marginals(A.exact_marginals(mu), 3)
    smap, _ = P.isotropic_transform(mu, est)
    assert smap.is_trivial()


def test_near_isotropy_constant():
    rng = np.random.default_rng(3)
    for _ in range(10):
        mu = random_table(6, 2, rng)
        marg = A.exact_marginals(mu)
        est = P.MarginalEstimates.from_marginals(marg, 2)
        smap, sub = P.isotropic_transform(mu, est)
        copy_marg = A.exact_marginals(sub)
        assert copy_marg.max() <= 4 * 2 * 2 / smap.size


def test_sparse_domain_trivial_subdivision():
    smap = SubdivisionMap([1] * 8)
    dom = P.draw_sparse_domain(smap, (0, 4), 5, RngStream(0).generator())
    assert len(dom.R) == 5 and {0, 4} <= set(dom.R.tolist())
    assert dom.counts.tolist() == [1] * 5
    assert np.all(dom.field.values()[dom.R] == 1.0)
    assert np.all(np.delete(dom.field.values(), dom.R) == 0.0)


def test_sparse_domain_all_copies_drawn():
    smap = SubdivisionMap([2, 1, 1, 2])
    dom = P.draw_sparse_domain(smap, (0, 1), 6, RngStream(1).generator())
    assert dom.counts.tolist() == [2, 1, 1, 2]
    assert np.all(dom.field.values() == 1.0)


def test_sparse_domain_rejects_large_t():
    with pytest.raises(DomainError):
        P.draw_sparse_domain(SubdivisionMap([1, 1, 1, 1]), (0, 1), 5, RngStream(0).generator())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=4, max_size=12), st.integers(0, 2**31 - 1), st.data())
def test_sparse_domain_invariants(counts, seed, data):
    smap = SubdivisionMap(counts)
    S0 = tuple(sorted(data.draw(st.sets(st.integers(0, len(counts) - 1), min_size=2, max_size=2))))
    t = data.draw(st.integers(4, smap.size))
    dom = P.draw_sparse_domain(smap, S0, t, RngStream(seed).generator())
    assert len(dom.R) <= t
    assert dom.counts.sum() == t
    sub_counts = smap.counts[dom.R]
    assert ((1 <= dom.counts) & (dom.counts <= sub_counts)).all()
    assert np.allclose(dom.field.values()[dom.R], dom.counts / sub_counts)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sparse_field_law_equals_materialized_subdivision(seed):
    """Over every copy-set draw, downsampling the reweighted original family
    gives the same original-space law as downsampling the subdivided family."""
    rng = np.random.default_rng(seed)
    mu = random_table(4, 2, rng, density=0.8)
    counts = [int(c) for c in rng.integers(1, 3, size=4)]
    smap = SubdivisionMap(counts)
    sub = subdivide(mu, smap)
    d = A.enumerate_family(mu)
    S0 = tuple(d.sets[0].tolist())
    occupied = {int(smap.offsets[i]) for i in S0}
    free = [f for f in range(smap.size) if f not in occupied]
    t = min(5, smap.size)
    total_a = np.zeros(len(d))
    total_b = np.zeros(len(d))
    for T in itertools.combinations(free, t - 2):
        copies = sorted(occupied | set(T))
        dsub = A.enumerate_family(restrict(sub, copies))
        for Sc, p in dsub.entries:
            orig = tuple(sorted(smap.from_flat(f)[0] for f in Sc))
            total_a[d.index(orig)] += p
        c = np.bincount([smap.from_flat(f)[0] for f in copies], minlength=4)
        R = np.flatnonzero(c)
        dom = P.SparseDomain(R, ExternalField.restriction(4, {int(i): c[i] / counts[i] for i in R}), c[R])
        dfield = A.enumerate_family(dom.family(mu))
        for S, p in dfield.entries:
            total_b[d.index(S)] += p
    assert np.allclose(total_a, total_b, atol=1e-12)


def test_sparsified_full_domain_is_fresh_sample():
    mu = random_dpp(5, 2, seed=6)
    est = P.MarginalEstimates.from_marginals(A.exact_marginals(mu), 2)
    smap, _ = P.isotropic_transform(mu, est)
    cfg = ChainConfig(t=smap.size, steps=1)
    rng = RngStream(2).generator()
    draws = [P.sparsified_sample(mu, est, cfg, rng, S0=(0, 1) if mu.log_weight((0, 1)) > -np.inf else None)
             for _ in range(10_000)]
    obs, exp = chi2_statistic(draws, A.enumerate_family(mu))
    assert chisquare(obs, exp).pvalue > 1e-3


def test_sparsified_sampler_law_on_trees():
    mu = spanning_trees(4)
    est = P.MarginalEstimates.from_marginals(A.exact_marginals(mu) + np.array([0.2, 0, 0, 0, 0, 0]), 3)
    t = P.default_t(mu, est, alpha=1.0)
    sampler = P.SparsifiedSampler(mu, est, ChainConfig(t=t, steps=2), RngStream(3))
    obs, exp = chi2_statistic(sampler.samples(8_000), A.enumerate_family(mu))
    assert chisquare(obs, exp).pvalue > 1e-3


def test_sample_many_is_deterministic_and_parallel_invariant():
    mu = F.make_paired(8)
    cfg = ChainConfig(t=6, steps=2)
    a = P.sample_many(mu, None, cfg, 40, seed=5, chains=4)
    b = P.sample_many(mu, None, cfg, 40, seed=5, chains=4, parallel=2)
    assert a == b and len(a) == 40
    assert P.sample_many(mu, None, cfg, 0, seed=5) == []


def test_marginal_cache_roundtrip(tmp_path):
    est = P.MarginalEstimates.from_marginals([1.0, 1.0, 2.0, 0.0], 2, 0.5, 17)
    path = tmp_path / "m.json"
    P.save_marginals(path, est, "abc")
    back = P.load_marginals(path, "abc")
    assert np.array_equal(back.p, est.p) and back.sample_count == 17
    with pytest.raises(P.MarginalCacheError):
        P.load_marginals(path, "def")


def test_count_table_exact_path():
    mu = F.TableFamily(3, 1, {(0,): 2.0, (1,): 3.0, (2,): 5.0})
    rep = P.count_partition_function(mu, 0.1, 0.05, RngStream(0))
    assert rep.estimate == pytest.approx(10.0)
    assert rep.samples_used == 0 and rep.ci[0] <= rep.estimate <= rep.ci[1]


def test_count_forced_telescoping():
    rep = P.count_partition_function(uniform(6, 2), 0.1, 0.05, RngStream(1), base_max_sets=1)
    assert len(rep.factors) == 2
    assert rep.estimate == pytest.approx(15.0, rel=0.1)
    assert rep.ci[0] <= rep.estimate <= rep.ci[1]
    assert rep.to_json()["samples_used"] == rep.samples_used > 0


def test_count_table_telescoping():
    mu = F.TableFamily(3, 1, {(0,): 2.0, (1,): 3.0, (2,): 5.0})
    rep = P.count_partition_function(mu, 0.1, 0.05, RngStream(2), base_max_sets=1)
    assert len(rep.factors) == 1
    assert rep.estimate == pytest.approx(10.0, rel=0.1)


def test_count_rejects_bad_epsilon():
    with pytest.raises(DomainError):
        P.count_partition_function(uniform(4, 2), 0.0, 0.1)
