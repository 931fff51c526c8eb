import itertools

import numpy as np
import pytest

from mssms.hitting import (
    SetSystem,
    brute_force_min_hitting_sets,
    enumerate_min_hitting_sets,
    min_hitting_set,
    min_hitting_set_size,
    sample_min_hitting_set,
)


@pytest.fixture
def triangle():
    """Edges of a triangle: every minimum hitting set has two vertices."""
    return SetSystem.of([(1, 2), (2, 3), (1, 3)])


def test_set_system_properties(triangle):
    """Test ground set, width and the hit predicate."""
    assert triangle.ground == frozenset({1, 2, 3})
    assert triangle.l == 2
    assert triangle.is_hit_by([1, 2])
    assert not triangle.is_hit_by([1])


def test_empty_member_rejected():
    """Test that an empty set cannot be part of a system."""
    with pytest.raises(ValueError):
        SetSystem.of([(1,), ()])


def test_min_size_and_cap(triangle):
    """Test the minimum size and the cap."""
    assert min_hitting_set_size(triangle, 3) == 2
    assert min_hitting_set_size(triangle, 1) is None
    assert min_hitting_set_size(SetSystem.of([]), 0) == 0


def test_enumeration_is_sorted_and_complete(triangle):
    """Test the full lexicographic list of minimum hitting sets."""
    assert enumerate_min_hitting_sets(triangle, 2) == [(1, 2), (1, 3), (2, 3)]
    assert min_hitting_set(triangle, 2) == (1, 2)
    assert enumerate_min_hitting_sets(triangle, 1) is None


def test_disjoint_sets_reach_the_count_bound():
    """Test that s disjoint sets of size l have exactly l^s minimum hitting sets."""
    system = SetSystem.of([(0, 1, 2), (3, 4, 5)])
    found = enumerate_min_hitting_sets(system, 2)
    assert len(found) == 9
    assert all(len(h) == 2 for h in found)


def test_matches_bruteforce_on_all_small_graphs():
    """Test enumeration against subset enumeration on every graph with 4 vertices."""
    edges = list(itertools.combinations(range(4), 2))
    for mask in range(1, 2 ** len(edges)):
        system = SetSystem.of(e for bit, e in enumerate(edges) if mask >> bit & 1)
        assert enumerate_min_hitting_sets(system, 4) == brute_force_min_hitting_sets(system, 4)


def test_sampling_is_uniform_over_minimum_sets():
    """Test that every minimum hitting set gets drawn, none more than its share."""
    system = SetSystem.of([(0, 1), (2, 3)])
    rng = np.random.default_rng(7)
    draws = [sample_min_hitting_set(system, 2, rng) for _ in range(4000)]
    counts = {h: draws.count(h) for h in set(draws)}
    assert set(counts) == {(0, 2), (0, 3), (1, 2), (1, 3)}
    assert all(800 < c < 1200 for c in counts.values())


def test_sampling_over_cap_returns_none():
    """Test that sampling beyond the cap yields nothing."""
    system = SetSystem.of([(0,), (1,)])
    assert sample_min_hitting_set(system, 1, np.random.default_rng(0)) is None
