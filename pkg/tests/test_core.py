import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domsparse.analysis import enumerate_family, exact_marginals
from domsparse.core import (
    DomainError,
    EmptySupportError,
    ExplicitDistribution,
    ExternalField,
    SubdivisionMap,
    apply_external_field,
    complement,
    down_operator,
    ksubset,
    reindex,
    restrict,
    subdivide,
)
from domsparse.families import TableFamily, make_paired, make_uniform

from instances import random_table


def test_ksubset_sorts_and_validates():
    assert ksubset([3, 1, 2], 4, 3) == (1, 2, 3)
    with pytest.raises(DomainError):
        ksubset([1, 1], 4, 2)
    with pytest.raises(DomainError):
        ksubset([0, 4], 4, 2)
    with pytest.raises(DomainError):
        ksubset([0, 1], 4, 3)


def test_explicit_distribution_rejects_bad_tables():
    with pytest.raises(DomainError):
        ExplicitDistribution(3, 1, np.array([[0], [1]]), np.array([0.5, 0.4]))
    with pytest.raises(DomainError):
        ExplicitDistribution.from_dict(3, 2, {(0, 1): 0.5, (1, 0): 0.5})


def test_explicit_distribution_sorted_and_positive():
    d = ExplicitDistribution.from_log_weights(4, 2, [(2, 3), (0, 1), (1, 2)], [0.0, math.log(2), -math.inf])
    assert [tuple(s) for s in d.sets.tolist()] == [(0, 1), (2, 3)]
    assert d.prob((0, 1)) == pytest.approx(2 / 3)
    assert d.Z == pytest.approx(3.0)


def test_field_conventions():
    assert ExternalField.multiplicative(3).value(2) == 1.0
    r = ExternalField.restriction(3, {1: 2.0})
    assert r.values().tolist() == [0.0, 2.0, 0.0]
    with pytest.raises(DomainError):
        ExternalField(3, {0: -1.0})
    with pytest.raises(DomainError):
        ExternalField(3, {5: 1.0})


def test_apply_field_dimension_mismatch():
    with pytest.raises(DomainError):
        apply_external_field(make_uniform(4, 2), ExternalField.multiplicative(5))


def test_field_reweights_uniform():
    mu = apply_external_field(make_uniform(3, 1), ExternalField.from_vector([1.0, 2.0, 1.0]))
    d = enumerate_family(mu)
    assert d.probs.tolist() == pytest.approx([0.25, 0.5, 0.25])


def test_restriction_to_too_few_elements_is_empty():
    with pytest.raises(EmptySupportError):
        enumerate_family(restrict(make_uniform(5, 3), [0, 1]))


def test_restriction_of_paired():
    d = enumerate_family(restrict(make_paired(6), [0, 1, 3, 4]))
    assert [tuple(s) for s in d.sets.tolist()] == [(0, 3), (1, 4)]


def test_complement_of_uniform_and_involution():
    mu = make_uniform(5, 2)
    c = complement(mu)
    assert c.k == 3
    assert complement(c) is mu
    assert len(enumerate_family(c)) == 10


def test_complement_inside_restriction():
    nu = restrict(make_paired(8), [0, 4, 1, 5, 2])
    c = complement(nu)
    assert c.k == 3
    d = enumerate_family(c)
    assert [tuple(s) for s in d.sets.tolist()] == [(0, 2, 4), (1, 2, 5)]


def test_reindex_relabels():
    mu = make_paired(6)
    local = reindex(mu, [1, 3, 4])
    d = enumerate_family(local)
    assert [tuple(s) for s in d.sets.tolist()] == [(0, 2)]
    assert local.lift((0, 2)) == (1, 4)


def test_subdivision_map_roundtrip():
    m = SubdivisionMap([2, 1, 3])
    assert m.size == 6
    assert [m.from_flat(f) for f in range(6)] == [(0, 0), (0, 1), (1, 0), (2, 0), (2, 1), (2, 2)]
    assert m.to_flat(2, 1) == 4
    assert SubdivisionMap([1, 1]).is_trivial()
    with pytest.raises(DomainError):
        SubdivisionMap([1, 0])


def test_subdivided_marginals_split_evenly():
    mu = TableFamily(3, 2, {(0, 1): 1.0, (0, 2): 3.0})
    smap = SubdivisionMap([2, 1, 1])
    P = exact_marginals(mu)
    Psub = exact_marginals(subdivide(mu, smap))
    assert Psub[:2].tolist() == pytest.approx([P[0] / 2, P[0] / 2])
    assert Psub[2:].tolist() == pytest.approx(P[1:].tolist())


def test_down_operator_uniform():
    d = enumerate_family(make_uniform(4, 2))
    down = down_operator(d, 1)
    assert down.probs.tolist() == pytest.approx([0.25] * 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_complement_preserves_probabilities(n, k, seed):
    k = min(k, n - 1)
    mu = random_table(n, k, np.random.default_rng(seed))
    d = enumerate_family(mu)
    dc = enumerate_family(complement(mu))
    full = set(mu.ground().tolist())
    for S, p in d.entries:
        assert dc.prob(tuple(sorted(full - set(S)))) == pytest.approx(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_unit_field_is_identity(n, k, seed):
    k = min(k, n - 1)
    mu = random_table(n, k, np.random.default_rng(seed))
    a = enumerate_family(mu)
    b = enumerate_family(apply_external_field(mu, ExternalField.multiplicative(n)))
    assert np.array_equal(a.sets, b.sets)
    assert np.allclose(a.probs, b.probs, atol=1e-14)
