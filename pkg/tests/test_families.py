import itertools
import json

import numpy as np
import pytest

from domsparse import families as F
from domsparse.analysis import enumerate_family, exact_marginals
from domsparse.core import DomainError
from domsparse.rng import RngStream

from instances import k4_matchings, singleton_blowup, spanning_trees


def brute_force_matchings(vertices, edges):
    """Perfect matchings of the graph on ``vertices`` by trying every edge subset."""
    vs = set(vertices)
    sub = [e for e in edges if e[0] in vs and e[1] in vs]
    total = 0
    for combo in itertools.combinations(sub, len(vs) // 2):
        covered = [v for e in combo for v in e]
        total += len(set(covered)) == len(vs)
    return total


def test_paired_support():
    d = enumerate_family(F.make_paired(8))
    assert [tuple(s) for s in d.sets.tolist()] == [(0, 4), (1, 5), (2, 6), (3, 7)]
    assert exact_marginals(d).tolist() == pytest.approx([0.25] * 8)


def test_paired_rejects_odd_n():
    with pytest.raises(DomainError):
        F.make_paired(7)


@pytest.mark.parametrize("v, trees", [(3, 3), (4, 16), (5, 125)])
def test_spanning_tree_counts_match_cayley(v, trees):
    assert len(enumerate_family(spanning_trees(v))) == trees


def test_graphic_matroid_rejects_disconnected_graph():
    with pytest.raises(DomainError):
        F.make_matroid(F.MatroidSpec.graphic([(0, 1), (2, 3)], 4))


def test_partition_matroid_bases():
    mu = F.make_matroid(F.MatroidSpec.partition([[0, 1, 2], [3, 4]], [1, 1]))
    d = enumerate_family(mu)
    assert len(d) == 6
    assert all((s[0] <= 2) and (s[1] >= 3) for s in d.sets.tolist())


def test_partition_matroid_rejects_bad_quota():
    with pytest.raises(DomainError):
        F.make_matroid(F.MatroidSpec.partition([[0, 1], [2]], [1, 2]))


@pytest.mark.parametrize("v", [4, 6])
def test_perfect_matching_dp_against_brute_force(v):
    edges = F.complete_graph_edges(v)
    fam = F.make_matchings(F.MatchingSpec(v, tuple(edges), v // 2))
    assert fam.matchings(tuple(range(v))) == brute_force_matchings(range(v), edges)


def test_matching_dp_on_sparse_graph():
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 5), (3, 4)]
    fam = F.make_matchings(F.MatchingSpec(6, tuple(edges), 2))
    for S in itertools.combinations(range(6), 4):
        assert fam.matchings(S) == brute_force_matchings(S, edges)


def test_k4_matching_families():
    d1 = enumerate_family(k4_matchings(1))
    assert len(d1) == 6
    d2 = enumerate_family(k4_matchings(2))
    assert [tuple(s) for s in d2.sets.tolist()] == [(0, 1, 2, 3)]


def test_blowup_of_singletons_is_paired():
    a = enumerate_family(singleton_blowup(2))
    b = enumerate_family(F.make_paired(4))
    assert np.array_equal(a.sets, b.sets)
    assert np.allclose(a.probs, b.probs)


def test_singleton_blowup_instance_shape():
    mu = F.make_singleton_blowup(64, 3)
    d = enumerate_family(mu)
    assert len(d) == 21
    assert exact_marginals(d)[63] == 0.0


def test_dpp_weights_are_minors():
    L = F.random_psd_kernel(5, RngStream(1).generator())
    mu = F.make_dpp(L, 2)
    for S in itertools.combinations(range(5), 2):
        assert np.exp(mu.log_weight(S)) == pytest.approx(np.linalg.det(L[np.ix_(S, S)]))


def test_dpp_rejects_indefinite_kernel():
    with pytest.raises(DomainError, match="eigenvalue"):
        F.make_dpp(np.array([[1.0, 2.0], [2.0, 1.0]]), 1)


def test_nonsymmetric_kernel_has_psd_symmetric_part():
    L = F.random_nonsymmetric_kernel(6, RngStream(2).generator())
    assert not np.allclose(L, L.T)
    assert np.linalg.eigvalsh(L + L.T).min() > -1e-12
    F.make_dpp(L, 2)


def test_low_rank_dpp_matches_dense():
    V = RngStream(4).generator().standard_normal((6, 3))
    dense = F.make_dpp(V @ V.T, 2)
    low = F.LowRankDppFamily(V, 2)
    sets = np.array(list(itertools.combinations(range(6), 2)))
    assert np.allclose(dense.log_weights(sets), low.log_weights(sets))


def test_reed_solomon_support():
    mu = F.make_reed_solomon(F.ReedSolomonSpec(5, 3, 1, seed=3))
    d = enumerate_family(mu)
    assert len(d) == 25
    for S in d.sets.tolist():
        assert [e // 5 for e in S] == [0, 1, 2]
    S = tuple(d.sets[7].tolist())
    assert mu.contains_support_set(list(S) + [3, 12])
    assert not mu.contains_support_set(list(S[:2]))


def test_reed_solomon_validation():
    with pytest.raises(DomainError):
        F.ReedSolomonSpec(6, 3, 1)
    with pytest.raises(DomainError):
        F.ReedSolomonSpec(5, 3, 3)


def test_partition_constrained_filters_base():
    mu = F.make_partition_constrained(F.make_uniform(4, 2), [[0, 1], [2, 3]], [1, 1])
    assert len(enumerate_family(mu)) == 4


def test_spec_parsing_and_strictness():
    spec = {"family": "matroid", "kind": "graphic", "edges": F.complete_graph_edges(4), "seed": 1}
    assert len(enumerate_family(F.family_from_spec(spec))) == 16
    with pytest.raises(F.FamilySpecError, match="unknown keys"):
        F.family_from_spec({"family": "paired", "n": 4, "colour": "red"})
    with pytest.raises(F.FamilySpecError):
        F.family_from_spec({"family": "nope"})


def test_random_dpp_spec_is_seeded():
    spec = {"family": "dpp", "n": 5, "k": 2, "kernel": "symmetric", "seed": 9}
    a, b = F.family_from_spec(spec), F.family_from_spec(json.loads(json.dumps(spec)))
    assert np.array_equal(a.L, b.L)


def test_fingerprint_ignores_key_order():
    a = {"family": "paired", "n": 6, "seed": 0}
    b = {"seed": 0, "n": 6, "family": "paired"}
    assert F.spec_fingerprint(a) == F.spec_fingerprint(b)
    assert F.spec_fingerprint(a) != F.spec_fingerprint({**a, "n": 8})
