import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .metric import (
    Configuration,
    MetricSpace,
    Request,
    all_configurations,
    config_distance,
    make_configuration,
    replace_point,
    serves,
)

Bijection = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class WorkFunction:
    """
    Exact work function over every k-multiset of the space: w(X) is the least
    cost of serving the requests seen so far from `initial` and ending in X.
    """

    space: MetricSpace
    k: int
    initial: Configuration
    values: Dict[Configuration, Fraction]
    last_request: Optional[Request] = None
    requests_seen: int = 0

    def __call__(self, config: Sequence[int]) -> Fraction:
        return self.values[make_configuration(config)]

    @property
    def configurations(self) -> List[Configuration]:
        return list(self.values)

    def optimum(self) -> Fraction:
        return min(self.values.values())

    def minimizers(self) -> List[Configuration]:
        best = self.optimum()
        return [X for X, v in self.values.items() if v == best]


def wf_init(space: MetricSpace, X0: Sequence[int]) -> WorkFunction:
    initial = make_configuration(X0, space)
    values = {X: config_distance(space, initial, X) for X in all_configurations(space.n, len(initial))}
    return WorkFunction(space, len(initial), initial, values)


def wf_update(w: WorkFunction, request: Request) -> WorkFunction:
    """
    w'(X) = min over r in R, x in X of w(X - x + r) + d(r, x).
    A configuration that already serves R keeps w(X) through r = x.
    """
    space = w.space
    values: Dict[Configuration, Fraction] = {}
    for X in w.values:
        best = None
        for x in set(X):
            for r in request:
                candidate = w.values[replace_point(X, x, r)] + space.d(r, x)
                if best is None or candidate < best:
                    best = candidate
        values[X] = best
    return WorkFunction(space, w.k, w.initial, values, tuple(request), w.requests_seen + 1)


def wf_replay(space: MetricSpace, X0: Sequence[int], requests: Iterable[Request]) -> WorkFunction:
    w = wf_init(space, X0)
    for request in requests:
        w = wf_update(w, request)
    return w


def is_dominated(w: WorkFunction, X: Configuration) -> bool:
    value = w.values[X]
    for Y, other in w.values.items():
        if Y == X or other > value:
            continue
        if value == other + config_distance(w.space, X, Y):
            return True
    return False


def wf_support(w: WorkFunction) -> List[Configuration]:
    """Configurations not dominated by any other configuration."""
    return [X for X in w.values if not is_dominated(w, X)]


def lipschitz_violations(w: WorkFunction) -> List[Tuple[Configuration, Configuration]]:
    """Pairs with w(X) > w(Y) + d(X, Y); empty for every genuine work function."""
    bad = []
    for X, Y in itertools.permutations(w.values, 2):
        if w.values[X] > w.values[Y] + config_distance(w.space, X, Y):
            bad.append((X, Y))
    return bad


def monotonicity_violations(before: WorkFunction, after: WorkFunction) -> List[Configuration]:
    return [X for X, v in after.values.items() if v < before.values[X]]


@dataclass
class QuasiConvexityReport:
    holds: bool
    witness: Optional[Bijection] = None
    # one (bijection, subset of X, lhs, rhs) entry per failing bijection
    violations: List[Tuple[Bijection, Configuration, Fraction, Fraction]] = field(
        default_factory=list
    )


def wf_quasiconvex_check(
    w: WorkFunction, X: Sequence[int], Y: Sequence[int]
) -> QuasiConvexityReport:
    """
    Looks for a bijection g: X -> Y with
    w(g(X') + (X - X')) + w(X' + g(X - X')) <= w(X) + w(Y) for every X' within X.
    """
    X, Y = make_configuration(X), make_configuration(Y)
    if len(X) != len(Y) or len(X) != w.k:
        raise ValueError(f"quasi-convexity needs two configurations of size {w.k}")
    rhs = w(X) + w(Y)
    report = QuasiConvexityReport(holds=False)
    indices = range(w.k)
    for perm in itertools.permutations(indices):
        bijection = tuple((X[a], Y[perm[a]]) for a in indices)
        failure = None
        for size in range(w.k + 1):
            for subset in itertools.combinations(indices, size):
                inside = set(subset)
                left = [Y[perm[a]] if a in inside else X[a] for a in indices]
                right = [X[a] if a in inside else Y[perm[a]] for a in indices]
                lhs = w(left) + w(right)
                if lhs > rhs:
                    failure = (bijection, tuple(sorted(X[a] for a in subset)), lhs, rhs)
                    break
            if failure:
                break
        if failure is None:
            report.holds = True
            report.witness = bijection
            return report
        report.violations.append(failure)
    return report


def serving_configurations(w: WorkFunction, request: Request) -> List[Configuration]:
    return [X for X in w.values if serves(X, request)]
