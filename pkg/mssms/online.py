import logging
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from .hitting import SetSystem, min_hitting_set, min_hitting_set_size, sample_min_hitting_set
from .metric import (
    Configuration,
    MetricSpace,
    Request,
    assign_servers,
    config_distance,
    make_configuration,
    min_matching,
    replace_point,
    serves,
)
from .workfunction import wf_init, wf_update

# (server index, destination point)
Move = Tuple[int, int]


class TraceError(ValueError):
    """Raised when a recorded serve sequence is inconsistent or infeasible."""

    pass


@dataclass
class ServeRecord:
    request: Request
    before: Configuration
    moves: List[Move]
    cost: Fraction
    fault: bool
    phase: Optional[int] = None
    subphase: Optional[int] = None


@dataclass
class Trace:
    records: List[ServeRecord] = field(default_factory=list)

    @property
    def total_cost(self) -> Fraction:
        return sum((r.cost for r in self.records), Fraction(0))

    @property
    def faults(self) -> int:
        return sum(1 for r in self.records if r.fault)

    @property
    def phases(self) -> int:
        return len({r.phase for r in self.records if r.phase is not None})

    def phase_fault_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = defaultdict(int)
        for r in self.records:
            if r.phase is not None and r.fault:
                counts[r.phase] += 1
        return dict(counts)

    def subphase_fault_counts(self) -> Dict[Tuple[int, int], int]:
        """Faults per (phase, minimum hitting set size) of the randomized algorithm."""
        counts: Dict[Tuple[int, int], int] = defaultdict(int)
        for r in self.records:
            if r.fault and r.phase is not None and r.subphase is not None:
                counts[(r.phase, r.subphase)] += 1
        return dict(counts)


class OnlineAlgorithm(ABC):
    """
    Abstract Base Class for online MSSMS algorithms.
    Server i sits at positions[i]; serve() moves servers until the
    request is covered and returns the executed moves.
    """

    name = "abstract"
    randomized = False

    def __init__(
        self,
        space: MetricSpace,
        initial: Sequence[int],
        rng: Optional[np.random.Generator] = None,
    ):
        self.space = space
        self.positions: List[int] = list(initial)
        self.rng = rng
        self.cost = Fraction(0)
        self.trace = Trace()

    @property
    def configuration(self) -> Configuration:
        return make_configuration(self.positions)

    def serve(self, request: Sequence[int]) -> List[Move]:
        request = tuple(request)
        before = self.configuration
        fault = not serves(before, request)
        moves = self._decide(request, fault)
        cost = self._execute(moves)
        if not serves(self.positions, request):
            raise TraceError(f"{self.name} left request {request} unserved")
        phase, subphase = self._phase_info()
        self.trace.records.append(
            ServeRecord(request, before, list(moves), cost, fault, phase, subphase)
        )
        return moves

    @abstractmethod
    def _decide(self, request: Request, fault: bool) -> List[Move]:
        """Chooses the moves that serve the request."""
        pass

    def _phase_info(self) -> Tuple[Optional[int], Optional[int]]:
        return None, None

    def _execute(self, moves: Sequence[Move]) -> Fraction:
        cost = Fraction(0)
        for server, destination in moves:
            cost += self.space.d(self.positions[server], destination)
            self.positions[server] = destination
        self.cost += cost
        return cost

    def _moves_to(self, target: Configuration) -> List[Move]:
        """Realizes a configuration change by a minimum-weight matching."""
        _, pairs = min_matching(self.space, self.positions, target)
        servers_at: Dict[int, List[int]] = defaultdict(list)
        for server, point in enumerate(self.positions):
            servers_at[point].append(server)
        moves = []
        # fixed points first so that they keep their own servers
        for source, destination in sorted(pairs, key=lambda pair: pair[0] != pair[1]):
            server = servers_at[source].pop(0)
            if source != destination:
                moves.append((server, destination))
        return sorted(moves)

    def _occupy(self, hitting_set: Sequence[int]) -> List[Move]:
        assignment = assign_servers(self.space, self.positions, hitting_set)
        return [(s, p) for s, p in assignment if self.positions[s] != p]


class HittingSetAlgorithm(OnlineAlgorithm):
    """
    Deterministic Hitting Set algorithm: on a fault, occupy a minimum hitting
    set of the phase's faulting requests; start a new phase once it needs
    more than k points.
    """

    name = "hs"

    def __init__(self, space, initial, rng=None):
        super().__init__(space, initial, rng)
        self.phase = 0
        self.phase_faults: List[Request] = []

    def _decide(self, request, fault):
        if not fault:
            return []
        k = len(self.positions)
        candidate = self.phase_faults + [request]
        hitting_set = min_hitting_set(SetSystem.of(candidate), k)
        if hitting_set is None:
            self.phase += 1
            logging.debug(f"hs: phase {self.phase} starts with request {request}")
            candidate = [request]
            hitting_set = min_hitting_set(SetSystem.of(candidate), k)
        self.phase_faults = candidate
        return self._occupy(hitting_set)

    def _phase_info(self):
        return self.phase, None


class RandomizedHittingSetAlgorithm(OnlineAlgorithm):
    """
    Randomized Hitting Set: like HS, but the hitting set is drawn uniformly
    among all minimum hitting sets. The sub-phase is the current minimum size s.
    """

    name = "rhs"
    randomized = True

    def __init__(self, space, initial, rng=None, history: str = "all"):
        super().__init__(space, initial, rng or np.random.default_rng())
        if history not in ("all", "faults"):
            raise ValueError(f"Unknown rhs history mode: '{history}'")
        self.history = history
        self.phase = 0
        self.subphase: Optional[int] = None
        self.phase_requests: List[Request] = []

    def _decide(self, request, fault):
        k = len(self.positions)
        if self.history == "all" or fault:
            candidate = self.phase_requests + [request]
            size = min_hitting_set_size(SetSystem.of(candidate), k)
            if size is None:
                self.phase += 1
                candidate, size = [request], 1
            self.phase_requests = candidate
            self.subphase = size
        if not fault:
            return []
        hitting_set = sample_min_hitting_set(SetSystem.of(self.phase_requests), k, self.rng)
        return self._occupy(hitting_set)

    def _phase_info(self):
        return self.phase, self.subphase


def harmonic_choices(
    space: MetricSpace, positions: Sequence[int], request: Request
) -> List[Tuple[Move, Fraction]]:
    """
    (move, probability) pairs of the Harmonic rule: the server at x moves to y
    with probability proportional to 1/d(x, y).
    """
    pairs = [(s, y) for s in range(len(positions)) for y in request]
    for s, y in pairs:
        if space.d(positions[s], y) == 0:
            return [((s, y), Fraction(1))]
    weights = [1 / space.d(positions[s], y) for s, y in pairs]
    total = sum(weights, Fraction(0))
    return [(pair, weight / total) for pair, weight in zip(pairs, weights)]


class HarmonicAlgorithm(OnlineAlgorithm):
    name = "harmonic"
    randomized = True

    def __init__(self, space, initial, rng=None):
        super().__init__(space, initial, rng or np.random.default_rng())

    def _decide(self, request, fault):
        if not fault:
            return []
        choices = harmonic_choices(self.space, self.positions, request)
        if len(choices) == 1:
            return [choices[0][0]]
        probabilities = np.array([float(p) for _, p in choices])
        probabilities /= probabilities.sum()
        picked = int(self.rng.choice(len(choices), p=probabilities))
        return [choices[picked][0]]


def harmonic_distribution(
    space: MetricSpace, initial: Sequence[int], requests: Sequence[Request]
) -> Tuple[List[Dict[Configuration, Fraction]], Fraction]:
    """
    Exact distribution of Harmonic's configuration after every request, and
    its exact expected total cost.
    """
    current: Dict[Configuration, Fraction] = {make_configuration(initial): Fraction(1)}
    history = []
    expected = Fraction(0)
    for request in requests:
        following: Dict[Configuration, Fraction] = defaultdict(Fraction)
        for config, mass in current.items():
            if serves(config, request):
                following[config] += mass
                continue
            for (server, y), p in harmonic_choices(space, config, request):
                x = config[server]
                expected += mass * p * space.d(x, y)
                following[replace_point(config, x, y)] += mass * p
        current = dict(following)
        history.append(current)
    return history, expected


def harmonic_expected_cost(
    space: MetricSpace, initial: Sequence[int], requests: Sequence[Request]
) -> Fraction:
    return harmonic_distribution(space, initial, requests)[1]


class WorkFunctionAlgorithm(OnlineAlgorithm):
    """
    Work Function Algorithm: move to the serving configuration X minimizing
    w_i(X) + d(X_{i-1}, X). With lazy=True only configurations one server
    away from the current one are considered.
    """

    name = "wfa"

    def __init__(self, space, initial, rng=None, lazy: bool = False):
        super().__init__(space, initial, rng)
        self.lazy = lazy
        self.work_function = wf_init(space, initial)

    def _candidates(self, request: Request) -> List[Configuration]:
        current = self.configuration
        if not self.lazy:
            return [X for X in self.work_function.values if serves(X, request)]
        options = {current} if serves(current, request) else set()
        options.update(replace_point(current, x, r) for x in set(current) for r in request)
        return sorted(options)

    def _decide(self, request, fault):
        self.work_function = wf_update(self.work_function, request)
        current = self.configuration
        best_key, best = None, None
        for X in self._candidates(request):
            distance = config_distance(self.space, current, X)
            # ties: less movement first, then canonical order
            key = (self.work_function.values[X] + distance, distance)
            if best_key is None or key < best_key:
                best_key, best = key, X
        return self._moves_to(best)


class GreedyAlgorithm(OnlineAlgorithm):
    """Moves the closest (server, requested point) pair; ties canonical."""

    name = "greedy"

    def _decide(self, request, fault):
        if not fault:
            return []
        _, server, point = min(
            (self.space.d(self.positions[s], y), s, y)
            for s in range(len(self.positions))
            for y in request
        )
        return [(server, point)]


class LazyAdapter(OnlineAlgorithm):
    """
    Runs an algorithm on a virtual copy and moves a real server only on a
    fault, straight to where its virtual twin serves the request.
    """

    def __init__(self, inner: OnlineAlgorithm):
        super().__init__(inner.space, inner.positions, inner.rng)
        self.inner = inner
        self.name = f"lazy-{inner.name}"
        self.randomized = inner.randomized

    def _decide(self, request, fault):
        self.inner.serve(request)
        if not fault:
            return []
        for server, point in enumerate(self.inner.positions):
            if point in request:
                return [(server, point)]
        raise TraceError(f"{self.inner.name} did not serve request {request}")

    def _phase_info(self):
        return self.inner._phase_info()


ALGORITHMS: Dict[str, Type[OnlineAlgorithm]] = {
    "hs": HittingSetAlgorithm,
    "rhs": RandomizedHittingSetAlgorithm,
    "harmonic": HarmonicAlgorithm,
    "wfa": WorkFunctionAlgorithm,
    "greedy": GreedyAlgorithm,
}


def get_algorithm(
    name: str,
    space: MetricSpace,
    initial: Sequence[int],
    rng: Optional[np.random.Generator] = None,
    options: Optional[Dict[str, Dict[str, Any]]] = None,
) -> OnlineAlgorithm:
    """
    Factory function that builds an online algorithm by name.
    `options` maps algorithm names to constructor keyword arguments,
    as in the `algorithms` section of config.yaml.
    """
    algorithm_cls = ALGORITHMS.get(name)
    if algorithm_cls is None:
        raise ValueError(f"Unknown algorithm: '{name}'")
    kwargs = dict((options or {}).get(name) or {})
    return algorithm_cls(space, initial, rng, **kwargs)


def simulate(algorithm: OnlineAlgorithm, requests: Sequence[Request]) -> Trace:
    for request in requests:
        algorithm.serve(request)
    return algorithm.trace


def verify_trace(space: MetricSpace, initial: Sequence[int], trace: Trace) -> Fraction:
    """
    Replays a trace from the initial positions and recomputes every cost.
    Returns the total; raises TraceError on any inconsistency.
    """
    positions = list(initial)
    total = Fraction(0)
    for step, record in enumerate(trace.records, start=1):
        if make_configuration(positions) != record.before:
            raise TraceError(f"step {step}: recorded configuration differs from replay")
        cost = Fraction(0)
        for server, destination in record.moves:
            if not 0 <= server < len(positions):
                raise TraceError(f"step {step}: no server {server}")
            cost += space.d(positions[server], destination)
            positions[server] = destination
        if cost != record.cost:
            raise TraceError(f"step {step}: recorded cost {record.cost}, replayed {cost}")
        if not serves(positions, record.request):
            raise TraceError(f"step {step}: request {record.request} left unserved")
        total += cost
    if total != trace.total_cost:
        raise TraceError("trace total differs from the sum of its steps")
    return total


def skew_pattern_holds(trace: Trace) -> bool:
    """
    Within every phase, the faulting requests A_i and the configurations B_i
    they met satisfy A_i and B_i disjoint, and A_j meets B_i for j < i.
    """
    by_phase: Dict[int, List[ServeRecord]] = defaultdict(list)
    for record in trace.records:
        if record.fault:
            by_phase[record.phase].append(record)
    for faults in by_phase.values():
        for i, later in enumerate(faults):
            if serves(later.before, later.request):
                return False
            if any(not serves(later.before, earlier.request) for earlier in faults[:i]):
                return False
    return True
