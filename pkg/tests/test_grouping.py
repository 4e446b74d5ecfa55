from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acsel.errors import ValidationError
from acsel.geometry import Dataset, standardize
from acsel.grouping import (correlation, format_groups, group_community, group_naive, make_groups, parse_groups,
                            threshold_adjacency)


def bfs_components(adj):
    """Reference connected components by breadth-first search."""
    n = adj.shape[0]
    label = [-1] * n
    k = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = k
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in range(n):
                if adj[u, v] != 0 and label[v] < 0:
                    label[v] = k
                    queue.append(v)
        k += 1
    return [sorted(i for i in range(n) if label[i] == label[p]) for p in range(n)]


def random_corr(p, seed, n=30):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 3))
    x = z @ rng.normal(size=(3, p)) + 0.7 * rng.normal(size=(n, p))
    return correlation(standardize(Dataset(x, rng.normal(size=n))))


def test_correlation_identical_orthogonal_negated():
    x = np.array([1.0, -1.0, 1.0, -1.0])
    w = np.array([1.0, 1.0, -1.0, -1.0])
    sd = standardize(Dataset(np.column_stack([x, x, w, -x]), np.arange(4.0)))
    c = correlation(sd)
    assert abs(c[0, 1] - 1) < 1e-12
    assert abs(c[0, 2]) < 1e-12
    assert abs(c[0, 3] + 1) < 1e-12
    assert np.all(np.diag(c) == 1.0)
    assert np.array_equal(c, c.T)


def test_naive_extremes():
    c = random_corr(6, 0)
    assert all(np.array_equal(g, np.arange(6)) for g in group_naive(c, 0.0).groups)
    assert group_naive(c, 1.0).all_singletons()


def test_naive_threshold_arithmetic():
    c = np.array([[1.0, 0.8, 0.3], [0.8, 1.0, 0.1], [0.3, 0.1, 1.0]])
    gm = group_naive(c, 0.5)
    assert gm.groups[0].tolist() == [0, 1]
    assert gm.groups[2].tolist() == [2]


def test_naive_boundary_is_inclusive():
    c = np.array([[1.0, -0.5], [-0.5, 1.0]])
    assert group_naive(c, 0.5).groups[0].tolist() == [0, 1]


def test_naive_duplicate_columns_group_at_one():
    x = np.arange(5.0) ** 2
    sd = standardize(Dataset(np.column_stack([x, x, np.sin(x)]), np.arange(5.0)))
    gm = group_naive(correlation(sd), 1.0)
    assert gm.groups[0].tolist() == [0, 1]
    assert gm.groups[2].tolist() == [2]


def test_adjacency_rules():
    c = np.array([[1.0, 0.6, -0.4], [0.6, 1.0, 1.0], [-0.4, 1.0, 1.0]])
    a = threshold_adjacency(c, 0.5)
    assert a[0, 1] == 0.6 and a[1, 0] == 0.6
    assert a[0, 2] == 0.0
    assert np.all(np.diag(a) == 0)
    assert np.all(threshold_adjacency(c, 1.0) == 0)


def test_community_two_blocks():
    c = np.eye(4)
    c[0, 1] = c[1, 0] = 0.9
    c[2, 3] = c[3, 2] = -0.7
    gm = group_community(c, 0.5)
    assert [g.tolist() for g in gm.groups] == [[0, 1], [0, 1], [2, 3], [2, 3]]
    assert group_community(c, 1.0).all_singletons()


def test_community_chain_is_one_component():
    c = np.array([[1.0, 0.9, 0.2], [0.9, 1.0, 0.9], [0.2, 0.9, 1.0]])
    gm = group_community(c, 0.5)
    assert all(g.tolist() == [0, 1, 2] for g in gm.groups)
    # the naive map keeps the chain ends apart
    assert group_naive(c, 0.5).groups[0].tolist() == [0, 1]


@pytest.mark.parametrize("seed", range(5))
def test_community_matches_bfs_oracle(seed):
    c = random_corr(15, seed)
    for c0 in (0.3, 0.5, 0.7):
        gm = group_community(c, c0)
        assert [g.tolist() for g in gm.groups] == bfs_components(threshold_adjacency(c, c0))


def test_label_propagation_is_a_seeded_partition():
    c = random_corr(12, 3)
    a = make_groups(c, 0.4, "community-lp")
    b = make_groups(c, 0.4, "community-lp")
    assert [g.tolist() for g in a.groups] == [g.tolist() for g in b.groups]
    for p, g in enumerate(a.groups):
        assert p in g
        for q in g:
            assert np.array_equal(a.groups[q], g)


def test_unknown_method_and_bad_c0():
    c = np.eye(2)
    with pytest.raises(ValidationError):
        make_groups(c, 0.5, "louvain")
    with pytest.raises(ValidationError):
        group_naive(c, 1.5)


def test_format_parse_round_trip():
    gm = group_naive(random_corr(7, 9), 0.4)
    text = format_groups(gm)
    back = parse_groups(text, 0.4)
    assert [g.tolist() for g in back.groups] == [g.tolist() for g in gm.groups]
    assert text.splitlines()[0].startswith("0: ")


def test_membership_matrix_columns():
    gm = group_naive(np.array([[1.0, 0.9], [0.9, 1.0]]), 0.5)
    assert gm.membership().all()
    assert gm.sizes.tolist() == [2, 2]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_property_nesting_and_reflexivity(seed, a, b):
    lo, hi = sorted((a, b))
    c = random_corr(8, seed, n=12)
    for method in ("naive", "community"):
        coarse, fine = make_groups(c, lo, method), make_groups(c, hi, method)
        for p in range(8):
            assert p in fine.groups[p]
            assert set(fine.groups[p]) <= set(coarse.groups[p])
    naive = group_naive(c, hi)
    m = naive.membership()
    assert np.array_equal(m, m.T)


def test_singletons_agree_at_one():
    c = random_corr(10, 4)
    assert group_naive(c, 1.0).all_singletons() and group_community(c, 1.0).all_singletons()
