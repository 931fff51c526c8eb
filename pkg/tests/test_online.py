from fractions import Fraction

import numpy as np
import pytest

from mssms.generators import gen_harmonic_line, gen_random, phase_fault_bound
from mssms.metric import line_space, uniform_space
from mssms.online import (
    ALGORITHMS,
    GreedyAlgorithm,
    HarmonicAlgorithm,
    HittingSetAlgorithm,
    LazyAdapter,
    RandomizedHittingSetAlgorithm,
    Trace,
    TraceError,
    WorkFunctionAlgorithm,
    get_algorithm,
    harmonic_choices,
    harmonic_distribution,
    harmonic_expected_cost,
    simulate,
    skew_pattern_holds,
    verify_trace,
)


@pytest.fixture
def uniform6():
    return uniform_space(6)


def test_hs_serves_with_lex_first_hitting_set(uniform6):
    """Test that HS occupies the lexicographically first minimum hitting set."""
    hs = HittingSetAlgorithm(uniform6, [0, 1])
    moves = hs.serve((2, 3))
    assert hs.configuration in {(0, 2), (1, 2)}
    assert len(moves) == 1
    assert hs.cost == 1
    hs.serve((3, 4))
    # {(2,3), (3,4)} is hit by the single point 3
    assert 3 in hs.configuration


def test_hs_no_move_without_fault(uniform6):
    """Test that a served request costs nothing."""
    hs = HittingSetAlgorithm(uniform6, [0, 1])
    assert hs.serve((1, 5)) == []
    assert hs.cost == 0
    assert hs.trace.faults == 0


def test_hs_starts_new_phase(uniform6):
    """Test that a phase ends once the faults need more than k points."""
    hs = HittingSetAlgorithm(uniform6, [0])
    hs.serve((1,))
    hs.serve((2,))
    assert hs.phase == 1
    assert hs.trace.phase_fault_counts() == {0: 1, 1: 1}


def test_hs_phase_fault_bound_and_skew_pattern():
    """Test the per-phase fault bound and the skew pattern on random instances."""
    rng = np.random.default_rng(5)
    for k, l in [(1, 2), (2, 2), (2, 3), (3, 2)]:
        inst = gen_random({"kind": "uniform", "n": 7}, k, l, 80, rng)
        trace = simulate(HittingSetAlgorithm(inst.space, inst.initial), inst.requests)
        assert max(trace.phase_fault_counts().values(), default=0) <= phase_fault_bound(k, l)
        assert skew_pattern_holds(trace)
        assert verify_trace(inst.space, inst.initial, trace) == trace.total_cost


def test_rhs_is_reproducible_from_seed():
    """Test that RHS gives the same trace for the same seed."""
    inst = gen_random({"kind": "uniform", "n": 6}, 2, 2, 40, np.random.default_rng(1))
    costs = []
    for _ in range(2):
        rhs = RandomizedHittingSetAlgorithm(inst.space, inst.initial, np.random.default_rng(9))
        costs.append(simulate(rhs, inst.requests).total_cost)
    assert costs[0] == costs[1]


def test_rhs_records_subphases(uniform6):
    """Test that sub-phases follow the minimum hitting set size."""
    rhs = RandomizedHittingSetAlgorithm(uniform6, [0, 1], np.random.default_rng(0))
    rhs.serve((2, 3))
    assert rhs.subphase == 1
    rhs.serve((4, 5))
    assert rhs.subphase in (1, 2)
    counts = rhs.trace.subphase_fault_counts()
    assert sum(counts.values()) == rhs.trace.faults


def test_rhs_rejects_unknown_history(uniform6):
    """Test the history option validation."""
    with pytest.raises(ValueError):
        RandomizedHittingSetAlgorithm(uniform6, [0], history="recent")


def test_harmonic_choices_probabilities():
    """Test that probabilities are proportional to inverse distances."""
    space = line_space([0, 1, 3])
    choices = dict(harmonic_choices(space, [0], (1, 2)))
    assert choices[(0, 1)] == Fraction(3, 4)
    assert choices[(0, 2)] == Fraction(1, 4)
    assert harmonic_choices(space, [1], (1, 2)) == [((0, 1), Fraction(1))]


def test_harmonic_exact_cost_on_line():
    """Test the exact expected cost 2H(m+1) - 1 of the line instance."""
    inst = gen_harmonic_line(10)
    expected = harmonic_expected_cost(inst.space, inst.initial, inst.requests)
    harmonic_11 = sum(Fraction(1, i) for i in range(1, 12))
    assert expected == 2 * harmonic_11 - 1
    assert float(expected) == pytest.approx(5.039755, abs=1e-6)
    history, total = harmonic_distribution(inst.space, inst.initial, inst.requests)
    assert total == expected
    assert all(sum(dist.values()) == 1 for dist in history)


def test_harmonic_sampling_serves_every_request():
    """Test that sampled runs stay feasible."""
    inst = gen_harmonic_line(5)
    for seed in range(5):
        algorithm = HarmonicAlgorithm(inst.space, inst.initial, np.random.default_rng(seed))
        trace = simulate(algorithm, inst.requests)
        assert verify_trace(inst.space, inst.initial, trace) == algorithm.cost


def test_wfa_within_k_server_ratio():
    """Test WFA against the exact optimum on short single-point sequences."""
    from mssms.offline import Instance, opt_dp

    space = uniform_space(4)
    for requests in [[(2,), (3,), (2,), (0,)], [(3,), (2,), (3,), (2,)], [(1,), (2,), (3,)]]:
        inst = Instance.build(space, [0, 1], requests, l=1)
        cost = simulate(WorkFunctionAlgorithm(space, [0, 1]), requests).total_cost
        assert cost <= 3 * opt_dp(inst)[0]


def test_wfa_lazy_mode_serves(uniform6):
    """Test that the lazy WFA only makes single exchanges."""
    wfa = WorkFunctionAlgorithm(uniform6, [0, 1], lazy=True)
    for request in [(2, 3), (4, 5), (2, 5)]:
        moves = wfa.serve(request)
        assert len(moves) <= 1


def test_greedy_picks_closest_pair():
    """Test that greedy moves the closest server-point pair."""
    space = line_space([0, 4, 5, 10])
    greedy = GreedyAlgorithm(space, [0, 3])
    assert greedy.serve((1, 2)) == [(0, 1)]
    assert greedy.positions == [1, 3]


def test_lazy_adapter_moves_one_server_per_fault(uniform6):
    """Test that the adapter only moves on faults and then one server."""
    inner = WorkFunctionAlgorithm(uniform6, [0, 1])
    lazy = LazyAdapter(inner)
    assert lazy.name == "lazy-wfa"
    assert lazy.serve((0, 4)) == []
    moves = lazy.serve((2, 3))
    assert len(moves) == 1
    assert verify_trace(uniform6, [0, 1], lazy.trace) == lazy.cost


def test_get_algorithm_registry(uniform6):
    """Test the factory, including per-algorithm options."""
    assert set(ALGORITHMS) == {"hs", "rhs", "harmonic", "wfa", "greedy"}
    wfa = get_algorithm("wfa", uniform6, [0, 1], options={"wfa": {"lazy": True}})
    assert wfa.lazy is True
    with pytest.raises(ValueError, match="Unknown algorithm"):
        get_algorithm("optimal", uniform6, [0])


def test_verify_trace_detects_tampering(uniform6):
    """Test that a forged cost is caught on replay."""
    hs = HittingSetAlgorithm(uniform6, [0])
    hs.serve((3,))
    hs.trace.records[0].cost = Fraction(0)
    with pytest.raises(TraceError):
        verify_trace(uniform6, [0], hs.trace)


def test_empty_trace():
    """Test the totals of an empty trace."""
    trace = Trace()
    assert trace.total_cost == 0
    assert trace.phases == 0
    assert skew_pattern_holds(trace)
