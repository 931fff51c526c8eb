from fractions import Fraction

import numpy as np
import pytest

from mssms.config import DEFAULT_CONFIG
from mssms.generators import gen_harmonic_line, gen_random
from mssms.harness import adversary_game, compute_opt, run_algorithm, run_trial, run_trials
from mssms.offline import BudgetExceededError


@pytest.fixture
def random_instance():
    return gen_random({"kind": "uniform", "n": 6}, 2, 2, 20, np.random.default_rng(2))


def test_run_trial_is_reproducible(random_instance):
    """Test that (seed, trial) fixes a randomized run."""
    a = run_trial(random_instance, "rhs", 5, 3)
    b = run_trial(random_instance, "rhs", 5, 3)
    assert a.cost == b.cost
    assert a.phase_faults == b.phase_faults


def test_run_trials_keeps_order(random_instance):
    """Test that trials come back in trial order."""
    outcomes = run_trials(random_instance, "rhs", 5, 4)
    assert len(outcomes) == 4
    assert outcomes[3].cost == run_trial(random_instance, "rhs", 5, 3).cost


def test_run_algorithm_deterministic(random_instance):
    """Test a deterministic run with its exact optimum."""
    report = run_algorithm(random_instance, "hs", seed=0)
    assert report.trials == 1
    assert isinstance(report.cost, Fraction)
    assert report.opt is not None
    assert report.cost >= report.opt
    assert max(report.phase_breakdown.values(), default=0) <= 5


def test_run_algorithm_randomized_mean():
    """Test that a randomized run reports the mean and its spread."""
    inst = gen_harmonic_line(4)
    report = run_algorithm(inst, "harmonic", seed=1, trials=200)
    assert report.trials == 200
    assert isinstance(report.cost, float)
    assert report.cost_stddev is not None and report.cost_stddev > 0
    assert report.opt == 1
    assert 2.0 < report.cost < 5.0


def test_run_algorithm_unknown_name(random_instance):
    """Test that an unknown algorithm is refused."""
    with pytest.raises(ValueError):
        run_algorithm(random_instance, "clairvoyant")


def test_compute_opt_over_budget(random_instance, mocker):
    """Test that a budget overflow yields no OPT instead of an error."""
    mocker.patch("mssms.harness.opt_dp", side_effect=BudgetExceededError("too big"))
    assert compute_opt(random_instance, DEFAULT_CONFIG) is None


def test_adversary_game_against_greedy():
    """Test the certified ratio against a greedy algorithm that never changes phase."""
    report = adversary_game("greedy", 2, 2, phases=5, max_requests=200)
    assert report.h == 7
    assert report.phases == 0
    assert report.requests == 200
    assert report.online_cost == 200
    # one (2,0) reference does every swap; the other keeps its establishment cost
    assert report.min_reference_cost == 1
    assert report.ratio_certified
    assert report.total_reference_cost <= report.reference_bound
    row = report.to_run_report(seed=0).row()
    assert row["opt"] == "1"


def test_adversary_game_phase_change_costs_d():
    """Test that every phase change costs the online algorithm at least D."""
    report = adversary_game("hs", 2, 2, phases=1, max_requests=500)
    if report.phases:
        assert report.online_cost >= report.D
    assert report.total_reference_cost <= report.reference_bound


def test_adversary_game_default_phase_count(mocker):
    """Test that the game length defaults to the ratio-certificate phase count."""
    default = mocker.patch("mssms.harness.default_phase_count", return_value=0)
    report = adversary_game("greedy", 2, 2, max_requests=50)
    default.assert_called_once_with(2, 2, Fraction(15))
    assert report.requests == 0


def test_adversary_game_default_capped_by_max_requests():
    """Test that the default game still stops at max_requests."""
    report = adversary_game("greedy", 2, 2, max_requests=40)
    assert report.requests == 40
    assert report.phases == 0
