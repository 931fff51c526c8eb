import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .hitting import SetSystem
from .metric import (
    Configuration,
    MetricSpace,
    Request,
    build_space,
    cluster_space,
    config_distance,
    line_space,
    make_configuration,
    serves,
    to_fraction,
    uniform_space,
)
from .offline import Instance, Schedule

PhaseType = Tuple[int, ...]
# (phase type, index among the g(kappa) reference algorithms of that type)
ReferenceId = Tuple[PhaseType, int]


class AdversaryError(RuntimeError):
    """Raised when the lower-bound adversary sees a move it cannot account for."""

    pass


def compositions(k: int, l: int) -> List[PhaseType]:
    """All (k_1, ..., k_l) with k_i >= 0 summing to k, in lexicographic order."""
    return sorted(
        c for c in itertools.product(range(k + 1), repeat=l) if sum(c) == k
    )


def g_value(kappa: Sequence[int]) -> int:
    return math.prod(k_i + 1 for k_i in kappa) - 1


def det_lb_value(k: int, l: int) -> int:
    """Deterministic lower bound h(k,l) = C(k+2l-1, k) - C(k+l-1, k)."""
    if k < 1 or l < 1:
        raise ValueError("k and l must be positive")
    return math.comb(k + 2 * l - 1, k) - math.comb(k + l - 1, k)


def phase_fault_bound(k: int, l: int) -> int:
    """Most faults a Hitting Set phase can contain: C(k+l, l) - 1."""
    if k < 1 or l < 1:
        raise ValueError("k and l must be positive")
    return math.comb(k + l, l) - 1


def placements(kappa: Sequence[int]) -> List[Tuple[Tuple[int, int], ...]]:
    """
    Ways to put k_i servers on distinct points of M'_i = {(i,1..k_i+1)} for
    every cluster i, as sorted tuples of 1-based (cluster, position) pairs.
    """
    per_cluster = [
        [tuple((i, j) for j in chosen) for chosen in itertools.combinations(range(1, k_i + 2), k_i)]
        for i, k_i in enumerate(kappa, start=1)
    ]
    return sorted(tuple(sorted(itertools.chain(*parts))) for parts in itertools.product(*per_cluster))


def rest_placement(kappa: Sequence[int]) -> Tuple[Tuple[int, int], ...]:
    return tuple((i, j) for i, k_i in enumerate(kappa, start=1) for j in range(1, k_i + 1))


def default_cluster_distance(k: int, l: int) -> int:
    return l * det_lb_value(k, l) + 1


def phase_threshold(k: int, l: int, D) -> Optional[int]:
    """Smallest phase count r with r > kD h / (D - l h); None when D <= l h."""
    h = det_lb_value(k, l)
    D = to_fraction(D)
    if D <= l * h:
        return None
    return math.floor(k * D * h / (D - l * h)) + 1


def default_phase_count(k: int, l: int, D) -> Optional[int]:
    """Default game length: ceil(kD h / (D - l h)) + 1 phase changes; None when D <= l h."""
    h = det_lb_value(k, l)
    D = to_fraction(D)
    if D <= l * h:
        return None
    return math.ceil(k * D * h / (D - l * h)) + 1


@dataclass
class AdversaryState:
    """
    The cluster-space adversary: it requests the lowest free point of every
    cluster and runs h(k,l) reference algorithms next to the online one.
    """

    k: int
    l: int
    D: Fraction
    space: MetricSpace
    online: List[int]
    kappa: PhaseType
    where: Dict[ReferenceId, Configuration]
    costs: Dict[ReferenceId, Fraction]
    request: Request = ()
    missing: Configuration = ()
    phase: int = 0
    requests_issued: int = 0
    online_cost: Fraction = Fraction(0)
    establishment_cost: Fraction = Fraction(0)
    history: List[Request] = field(default_factory=list)

    @classmethod
    def create(cls, k: int, l: int, D=None) -> "AdversaryState":
        h = det_lb_value(k, l)
        D = to_fraction(default_cluster_distance(k, l) if D is None else D)
        if D <= l * h:
            logging.warning(f"D={D} does not exceed l*h={l * h}; the phase-change argument fails")
        space = cluster_space(l, k + 1, D)
        online = [space.cluster_point(1, j) for j in range(1, k + 1)]
        start = make_configuration(online)
        kappa = phase_type_of(space, online, l)

        state = cls(k, l, D, space, online, kappa, where={}, costs={})
        state.request = lowest_free_request(space, online)
        state.missing = state._missing_placement()
        for other in compositions(k, l):
            targets = (
                [P for P in state._placements(other) if P != state.missing]
                if other == kappa
                else [state._rest(other)] * g_value(other)
            )
            for idx, target in enumerate(targets):
                ref = (other, idx)
                state.where[ref] = target
                state.costs[ref] = config_distance(space, start, target)
        state.establishment_cost = sum(state.costs.values(), Fraction(0))
        return state

    @property
    def h(self) -> int:
        return det_lb_value(self.k, self.l)

    def _placements(self, kappa: PhaseType) -> List[Configuration]:
        return [
            make_configuration(self.space.cluster_point(i, j) for i, j in P)
            for P in placements(kappa)
        ]

    def _rest(self, kappa: PhaseType) -> Configuration:
        return make_configuration(self.space.cluster_point(i, j) for i, j in rest_placement(kappa))

    def _missing_placement(self) -> Configuration:
        points = []
        for i, k_i in enumerate(self.kappa, start=1):
            for j in range(1, k_i + 2):
                p = self.space.cluster_point(i, j)
                if p not in self.request:
                    points.append(p)
        return make_configuration(points)

    def total_reference_cost(self) -> Fraction:
        return sum(self.costs.values(), Fraction(0))

    def min_reference_cost(self) -> Fraction:
        return min(self.costs.values())


def phase_type_of(space: MetricSpace, positions: Sequence[int], l: int) -> PhaseType:
    """Number of servers in each cluster."""
    counts = [0] * l
    for p in positions:
        counts[space.cluster_of(p)[0] - 1] += 1
    return tuple(counts)


def lowest_free_request(space: MetricSpace, positions: Sequence[int]) -> Request:
    occupied = set(positions)
    request = []
    for i in range(1, space.params["l_clusters"] + 1):
        for j in range(1, space.params["k_plus_1"] + 1):
            p = space.cluster_point(i, j)
            if p not in occupied:
                request.append(p)
                break
    return tuple(sorted(request))


def adversary_next(state: AdversaryState, online_config: Sequence[int]) -> Request:
    """
    The next request: the lowest unoccupied point of every cluster. Every
    reference algorithm already serves it.
    """
    request = lowest_free_request(state.space, online_config)
    for ref, config in state.where.items():
        if not serves(config, request):
            raise AdversaryError(f"reference {ref} does not serve request {request}")
    state.request = request
    state.history.append(request)
    state.requests_issued += 1
    return request


def adversary_account(
    state: AdversaryState, online_moves: Sequence[Tuple[int, int]]
) -> Dict[ReferenceId, Fraction]:
    """
    Updates the reference algorithms after the online algorithm served the
    current request; returns the cost each reference paid for it.
    """
    if len(online_moves) != 1:
        raise AdversaryError(f"online algorithm must be lazy, it made {len(online_moves)} moves")
    server, destination = online_moves[0]
    if destination not in state.request:
        raise AdversaryError("online server did not move onto the request")
    source = state.online[server]
    state.online[server] = destination
    step = state.space.d(source, destination)
    state.online_cost += step
    old_missing = state.missing
    old_kappa = state.kappa
    state.kappa = phase_type_of(state.space, state.online, state.l)
    state.request = lowest_free_request(state.space, state.online)
    state.missing = state._missing_placement()
    paid: Dict[ReferenceId, Fraction] = {}

    def relocate(ref: ReferenceId, target: Configuration):
        cost = config_distance(state.space, state.where[ref], target)
        state.where[ref] = target
        state.costs[ref] += cost
        paid[ref] = cost

    if state.kappa == old_kappa:
        swapped = [
            ref for ref, config in state.where.items()
            if ref[0] == old_kappa and config == state.missing
        ]
        if len(swapped) != 1:
            raise AdversaryError(f"{len(swapped)} references sit on the new missing placement")
        relocate(swapped[0], old_missing)
        return paid

    state.phase += 1
    logging.debug(f"adversary: phase {state.phase} of type {state.kappa}")
    rest = state._rest(old_kappa)
    for ref in [r for r in state.where if r[0] == old_kappa]:
        relocate(ref, rest)
    targets = [P for P in state._placements(state.kappa) if P != state.missing]
    for ref, target in zip(sorted(r for r in state.where if r[0] == state.kappa), targets):
        relocate(ref, target)
    for ref, config in state.where.items():
        if ref[0] not in (old_kappa, state.kappa) and config != state._rest(ref[0]):
            raise AdversaryError(f"idle reference {ref} left its rest placement")
    return paid


@dataclass
class CouponCollectorDraw:
    instance: Instance
    witness: Configuration
    withheld: Request

    @property
    def length(self) -> int:
        return self.instance.m


def expected_coupon_length(k: int, l: int) -> Fraction:
    """C(k+l, l) * H(kl) - 1."""
    harmonic = sum((Fraction(1, i) for i in range(1, k * l + 1)), Fraction(0))
    return math.comb(k + l, l) * harmonic - 1


def gen_coupon_collector(k: int, l: int, rng: np.random.Generator) -> CouponCollectorDraw:
    """
    Uniform l-subsets of k+l points are drawn until every complement of a
    k-set with exactly one point outside the initial one has shown up; the
    draw that completes the collection is withheld.
    """
    n = k + l
    initial = tuple(range(k))
    targets = {
        tuple(sorted(set(range(n)) - (set(initial) - {out}) - {inside}))
        for out in initial
        for inside in range(k, n)
    }
    pending = set(targets)
    requests: List[Request] = []
    while True:
        draw = tuple(sorted(int(p) for p in rng.choice(n, size=l, replace=False)))
        pending.discard(draw)
        if not pending:
            withheld = draw
            break
        requests.append(draw)
    witness = tuple(sorted(set(range(n)) - set(withheld)))
    inst = Instance.build(uniform_space(n), initial, requests, l=l, name=f"coupon-k{k}-l{l}")
    return CouponCollectorDraw(inst, witness, withheld)


def gen_integrality_gap(k: int, l: int, m: int) -> Instance:
    """Every l-subset of kl fresh points in lexicographic order, repeated m times."""
    if k < 2 or l < 2:
        raise ValueError("the integrality gap construction needs k, l >= 2")
    fresh = range(k, k + k * l)
    block = list(itertools.combinations(fresh, l))
    return Instance.build(
        uniform_space(k + k * l), range(k), block * m, l=l, name=f"gap-k{k}-l{l}-m{m}"
    )


def gen_vc_reduction(hypergraph: SetSystem, k: int, reps: int) -> Instance:
    """
    Vertices V plus k extra points W holding the servers; the hyperedges are
    requested `reps` times over.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if len({len(e) for e in hypergraph.sets}) > 1:
        raise ValueError("the hypergraph must be uniform")
    vertices = sorted(hypergraph.ground)
    index = {v: p for p, v in enumerate(vertices)}
    base = uniform_space(len(vertices) + k)
    labels = tuple(str(v) for v in vertices) + tuple(f"w{i + 1}" for i in range(k))
    space = MetricSpace("uniform", base.table, labels, {"n": base.n, "vertices": tuple(vertices)})
    edges = [tuple(sorted(index[v] for v in e)) for e in hypergraph.sets]
    initial = range(len(vertices), len(vertices) + k)
    return Instance.build(space, initial, edges * reps, l=hypergraph.l, name=f"vc-k{k}-r{reps}")


def extract_vertex_cover(
    inst: Instance, schedule: Schedule, block_length: int
) -> Optional[Tuple[int, ...]]:
    """
    Finds a block of the repeated edge list served without any move and
    returns the vertices occupied during it, or None if every block moved.
    """
    vertices = inst.space.params.get("vertices")
    if vertices is None:
        raise ValueError("instance was not built by gen_vc_reduction")
    configs = schedule.configurations()
    for start in range(0, inst.m - block_length + 1, block_length):
        if any(schedule.moves[i] for i in range(start + 1, start + block_length)):
            continue
        config = configs[start]
        return tuple(sorted({vertices[p] for p in config if p < len(vertices)}))
    return None


def gen_harmonic_line(m: int) -> Instance:
    """Line points -1, 0, 1..m; one server at 0; requests {-1, i} and finally {-1}."""
    if m < 1:
        raise ValueError("m must be at least 1")
    space = line_space(range(-1, m + 1))
    requests = [(0, i + 1) for i in range(1, m + 1)] + [(0,)]
    return Instance.build(space, (1,), requests, l=2, name=f"harmonic-line-{m}")


def gen_wfa_counterexamples(which: str, m: int = 1) -> Instance:
    """
    support: 2m+2 uniform points x_i = 2i, x'_i = 2i+1, start {x_0, x'_0},
    requests {x_i, x'_i}. quasiconvex: 6 uniform points, start {0,1},
    requests {2,3}, {4,5}, {2,5}, {4,3}.
    """
    if which == "support":
        if m < 1:
            raise ValueError("m must be at least 1")
        requests = [(2 * i, 2 * i + 1) for i in range(1, m + 1)]
        return Instance.build(uniform_space(2 * m + 2), (0, 1), requests, l=2, name=f"wfa-support-{m}")
    if which == "quasiconvex":
        requests = [(2, 3), (4, 5), (2, 5), (3, 4)]
        return Instance.build(uniform_space(6), (0, 1), requests, l=2, name="wfa-quasiconvex")
    raise ValueError(f"Unknown counterexample: '{which}'")


def gen_random(
    space: Union[MetricSpace, Dict[str, Any]],
    k: int,
    l: int,
    m: int,
    rng: np.random.Generator,
    initial: Optional[Sequence[int]] = None,
) -> Instance:
    """Uniformly random l-subsets as requests; servers start on random points."""
    if isinstance(space, dict):
        space = build_space(space)
    if l > space.n:
        raise ValueError(f"cannot draw {l}-point requests from {space.n} points")
    if initial is None:
        initial = rng.choice(space.n, size=k, replace=k > space.n)
    requests = [rng.choice(space.n, size=l, replace=False) for _ in range(m)]
    return Instance.build(space, initial, requests, l=l, name=f"random-{space.kind}-k{k}-l{l}-m{m}")


def gen_nested(k: int, l: int, phases: int) -> Instance:
    """
    Nested blocks on fresh uniform points: a block of l new points raises the
    minimum hitting set size by one, then l-1 requests each drop the block's
    next point while padding with new points. k blocks make one phase.
    """
    if k < 1 or l < 1 or phases < 1:
        raise ValueError("k, l and phases must be positive")
    blocks = k * phases
    n = k + blocks * (l + l * (l - 1) // 2)
    fresh = itertools.count(k)
    requests: List[Request] = []
    for _ in range(blocks):
        block = [next(fresh) for _ in range(l)]
        requests.append(tuple(block))
        for t in range(1, l):
            requests.append(tuple(block[t:] + [next(fresh) for _ in range(t)]))
    return Instance.build(uniform_space(n), range(k), requests, l=l, name=f"nested-k{k}-l{l}-p{phases}")
