from fractions import Fraction

import pytest

from mssms.metric import (
    MetricError,
    all_configurations,
    assign_servers,
    build_space,
    cluster_space,
    config_distance,
    config_distance_bruteforce,
    explicit_space,
    format_fraction,
    hungarian,
    line_space,
    make_configuration,
    make_request,
    min_matching,
    replace_point,
    scaled_union_space,
    serves,
    to_fraction,
    uniform_space,
)


@pytest.fixture
def line():
    """Points at 0, 1, 3, 7 on the real line."""
    return line_space([0, 1, 3, 7])


def test_uniform_space_distances():
    """Test that every pair of distinct points is at distance 1."""
    space = uniform_space(4)
    assert space.n == 4
    assert space.d(0, 0) == 0
    assert space.d(1, 3) == 1
    assert space.diameter() == 1


def test_line_space_uses_exact_coordinates():
    """Test that line distances are exact rationals."""
    space = line_space(["1/2", 2, 0.25])
    assert space.d(0, 1) == Fraction(3, 2)
    assert space.d(0, 2) == Fraction(1, 4)
    assert space.params["coords"] == (Fraction(1, 2), Fraction(2), Fraction(1, 4))


def test_explicit_space_rejects_triangle_violation():
    """Test that a matrix breaking the triangle inequality is refused."""
    with pytest.raises(MetricError, match="triangle"):
        explicit_space([[0, 1, 5], [1, 0, 1], [5, 1, 0]])


def test_explicit_space_rejects_asymmetric_matrix():
    """Test that an asymmetric matrix is refused."""
    with pytest.raises(MetricError, match="symmetric"):
        explicit_space([[0, 1], [2, 0]])


def test_cluster_space_layout():
    """Test cluster point indexing and the two distance levels."""
    space = cluster_space(2, 3, 10)
    assert space.n == 6
    assert space.cluster_point(1, 1) == 0
    assert space.cluster_point(2, 1) == 3
    assert space.cluster_of(4) == (2, 2)
    assert space.d(0, 2) == 1
    assert space.d(0, 3) == 10
    with pytest.raises(MetricError):
        space.cluster_point(3, 1)


def test_cluster_point_needs_cluster_space():
    """Test that cluster coordinates are only defined on cluster spaces."""
    with pytest.raises(MetricError):
        uniform_space(3).cluster_point(1, 1)


def test_scaled_union_space():
    """Test scaling inside parts and the default separation between them."""
    space = scaled_union_space([uniform_space(2), line_space([0, 2])], [3, "1/2"])
    assert space.n == 4
    assert space.d(0, 1) == 3
    assert space.d(2, 3) == 1
    # default separation: 1 + 3*1 + (1/2)*2
    assert space.d(0, 2) == 5


def test_build_space_dispatch():
    """Test building spaces from descriptors."""
    assert build_space({"kind": "uniform", "n": 3}).n == 3
    assert build_space({"kind": "cluster", "l_clusters": 2, "k_plus_1": 2, "D": 5}).d(0, 2) == 5
    with pytest.raises(MetricError, match="Unknown metric kind"):
        build_space({"kind": "torus"})
    with pytest.raises(MetricError, match="missing"):
        build_space({"kind": "uniform"})


def test_configuration_and_request_helpers():
    """Test canonical forms and request validation."""
    assert make_configuration([3, 1, 1]) == (1, 1, 3)
    assert make_request([2, 0]) == (0, 2)
    with pytest.raises(MetricError):
        make_request([])
    with pytest.raises(MetricError):
        make_request([1, 1])
    with pytest.raises(MetricError):
        make_request([0, 5], n=4)
    with pytest.raises(MetricError):
        make_configuration([0, 4], uniform_space(4))
    assert serves((0, 2), (2, 3))
    assert not serves((0, 1), (2, 3))
    assert replace_point((0, 1, 1), 1, 3) == (0, 1, 3)
    assert len(all_configurations(4, 2)) == 10


def test_min_matching_keeps_shared_points(line):
    """Test that shared points are matched to themselves."""
    cost, pairs = min_matching(line, (0, 1), (1, 3))
    assert cost == 7
    assert (1, 1) in pairs
    assert (0, 3) in pairs


def test_config_distance_matches_bruteforce(line):
    """Test the assignment-based distance against permutations."""
    for X in all_configurations(4, 3):
        for Y in all_configurations(4, 3):
            assert config_distance(line, X, Y) == config_distance_bruteforce(line, X, Y)


def test_config_distance_size_mismatch(line):
    """Test that configurations of different sizes cannot be compared."""
    with pytest.raises(MetricError):
        config_distance(line, (0,), (0, 1))


def test_assign_servers_covers_targets(line):
    """Test that the cheapest distinct servers are sent to the targets."""
    assert assign_servers(line, [0, 3], [1]) == [(0, 1)]
    assignment = assign_servers(line, [0, 3, 3], [2, 1])
    assert sorted(t for _, t in assignment) == [1, 2]
    assert len({s for s, _ in assignment}) == 2
    with pytest.raises(MetricError):
        assign_servers(line, [0], [1, 2])


@pytest.fixture
def near_tie():
    """Four points at distance 1 except d(2,3) = 1 - 10^-20, below float resolution."""
    eps = Fraction(1, 10**20)
    matrix = [[Fraction(0 if i == j else 1) for j in range(4)] for i in range(4)]
    matrix[1][2] = matrix[2][1] = 1 - eps
    return explicit_space(matrix)


def test_config_distance_resolves_near_ties(near_tie):
    """Test that a matching cheaper by less than float resolution is found."""
    expected = 2 - Fraction(1, 10**20)
    assert config_distance_bruteforce(near_tie, (0, 1), (2, 3)) == expected
    assert config_distance(near_tie, (0, 1), (2, 3)) == expected
    _, pairs = min_matching(near_tie, (0, 1), (2, 3))
    assert sorted(pairs) == [(0, 3), (1, 2)]


def test_assign_servers_resolves_near_ties(near_tie):
    """Test that the exact nearest server is sent to a single target."""
    assert assign_servers(near_tie, [0, 1], [2]) == [(1, 2)]


def test_hungarian_rectangular():
    """Test the exact assignment on a rectangular matrix against enumeration."""
    cost = [[Fraction(4), Fraction(1), Fraction(3)], [Fraction(2), Fraction(0), Fraction(5)]]
    columns = hungarian(cost)
    assert len(set(columns)) == 2
    assert sum(cost[i][c] for i, c in enumerate(columns)) == 3
    with pytest.raises(MetricError):
        hungarian([[Fraction(1)], [Fraction(2)]])


def test_float_table_view(line):
    """Test the read-only float view of the distance table."""
    table = line.float_table()
    assert table.shape == (4, 4)
    assert table[0, 3] == 7.0
    assert not table.flags.writeable


def test_fraction_helpers():
    """Test exact conversion and formatting."""
    assert to_fraction(0.1) == Fraction(1, 10)
    assert format_fraction(Fraction(6, 3)) == "2"
    assert format_fraction(Fraction(-3, 4)) == "-3/4"
