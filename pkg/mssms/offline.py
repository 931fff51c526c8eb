import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from .config import get_budget
from .flow import MinCostFlow
from .metric import (
    Configuration,
    MetricError,
    MetricSpace,
    Request,
    format_fraction,
    make_configuration,
    make_request,
    replace_point,
    serves,
)
from .simplex import GE, LE, LinearProgram, LPError, solve_exact, solve_float

# (server index, destination point)
Move = Tuple[int, int]
# ("g", server, request, point) or ("f", request, point, later request, point); 0-based
VarKey = Tuple


class InstanceError(ValueError):
    """Raised when an MSSMS instance is malformed."""

    pass


class BudgetExceededError(RuntimeError):
    """Raised when an exact solver would exceed its configured state budget."""

    pass


class ScheduleError(ValueError):
    """Raised when a schedule is infeasible or its recorded cost is wrong."""

    pass


@dataclass(frozen=True)
class Instance:
    space: MetricSpace
    k: int
    l: int
    initial: Configuration
    requests: Tuple[Request, ...]
    name: str = ""

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise InstanceError(f"need k, l >= 1, got k={self.k}, l={self.l}")
        if len(self.initial) != self.k:
            raise InstanceError(f"{len(self.initial)} initial positions for k={self.k} servers")
        try:
            make_configuration(self.initial, self.space)
            for idx, request in enumerate(self.requests, start=1):
                make_request(request, self.space.n)
                if len(request) > self.l:
                    raise InstanceError(f"request {idx} has {len(request)} points, width is {self.l}")
        except MetricError as e:
            raise InstanceError(str(e)) from e

    @classmethod
    def build(
        cls,
        space: MetricSpace,
        initial: Sequence[int],
        requests: Sequence[Sequence[int]],
        l: Optional[int] = None,
        name: str = "",
    ) -> "Instance":
        """Normalizes points into canonical tuples; l defaults to the widest request."""
        normalized = tuple(tuple(sorted(int(p) for p in r)) for r in requests)
        if l is None:
            l = max((len(r) for r in normalized), default=1)
        config = make_configuration(initial)
        return cls(space, len(config), l, config, normalized, name)

    @property
    def m(self) -> int:
        return len(self.requests)


@dataclass
class Schedule:
    initial_positions: Tuple[int, ...]
    moves: List[List[Move]]
    cost: Fraction

    @property
    def servers(self) -> int:
        return len(self.initial_positions)

    def configurations(self) -> List[Configuration]:
        """Configuration after each request."""
        positions = list(self.initial_positions)
        out = []
        for step in self.moves:
            for server, destination in step:
                positions[server] = destination
            out.append(make_configuration(positions))
        return out


def verify_schedule(
    inst: Instance, schedule: Schedule, initial: Optional[Sequence[int]] = None
) -> Fraction:
    """
    Replays a schedule against the instance and recomputes its cost.
    `initial` overrides the expected starting multiset (kl-server schedules).
    """
    expected = make_configuration(inst.initial if initial is None else initial)
    if make_configuration(schedule.initial_positions) != expected:
        raise ScheduleError("schedule starts from the wrong configuration")
    if len(schedule.moves) != inst.m:
        raise ScheduleError(f"schedule covers {len(schedule.moves)} of {inst.m} requests")
    positions = list(schedule.initial_positions)
    total = Fraction(0)
    for i, (request, step) in enumerate(zip(inst.requests, schedule.moves), start=1):
        for server, destination in step:
            if not 0 <= server < len(positions):
                raise ScheduleError(f"request {i}: no server {server}")
            total += inst.space.d(positions[server], destination)
            positions[server] = destination
        if not serves(positions, request):
            raise ScheduleError(f"request {i} is not served")
    if total != schedule.cost:
        raise ScheduleError(f"recorded cost {schedule.cost} differs from replayed cost {total}")
    return total


def _schedule_from_exchanges(
    inst: Instance, exchanges: Sequence[Optional[Tuple[int, int]]]
) -> Schedule:
    positions = list(inst.initial)
    moves: List[List[Move]] = []
    cost = Fraction(0)
    for exchange in exchanges:
        step = []
        if exchange is not None:
            x, r = exchange
            server = positions.index(x)
            positions[server] = r
            cost += inst.space.d(x, r)
            step.append((server, r))
        moves.append(step)
    return Schedule(tuple(inst.initial), moves, cost)


def opt_dp(
    inst: Instance, budget: Optional[int] = None, prune: bool = False
) -> Tuple[Fraction, Schedule]:
    """
    Exact optimum by a layered DP over multiset configurations with lazy
    transitions. With prune=True, states costing more than the layer minimum
    plus k times the diameter are dropped; those can never be optimal.
    """
    budget = get_budget() if budget is None else budget
    states = math.comb(inst.space.n + inst.k - 1, inst.k)
    work = states * max(inst.m, 1) * inst.k * inst.l
    if work > budget:
        raise BudgetExceededError(f"configuration DP needs {work} state updates, budget is {budget}")

    slack = inst.k * inst.space.diameter()
    layer: Dict[Configuration, Fraction] = {inst.initial: Fraction(0)}
    back: List[Dict[Configuration, Tuple[Configuration, Optional[Tuple[int, int]]]]] = []
    for request in inst.requests:
        following: Dict[Configuration, Fraction] = {}
        pointers: Dict[Configuration, Tuple[Configuration, Optional[Tuple[int, int]]]] = {}

        def relax(Y, cost, pointer):
            if Y not in following or cost < following[Y]:
                following[Y] = cost
                pointers[Y] = pointer

        for X, cost in layer.items():
            if serves(X, request):
                relax(X, cost, (X, None))
            for x in sorted(set(X)):
                for r in request:
                    if r != x:
                        relax(replace_point(X, x, r), cost + inst.space.d(x, r), (X, (x, r)))
        if prune:
            cutoff = min(following.values()) + slack
            following = {Y: c for Y, c in following.items() if c <= cutoff}
        layer = following
        back.append(pointers)

    best = min(layer, key=lambda X: (layer[X], X))
    exchanges: List[Optional[Tuple[int, int]]] = []
    X = best
    for pointers in reversed(back):
        X, exchange = pointers[X]
        exchanges.append(exchange)
    exchanges.reverse()
    schedule = _schedule_from_exchanges(inst, exchanges)
    return layer[best], schedule


def opt_bruteforce(inst: Instance, budget: Optional[int] = None) -> Fraction:
    """Exact optimum by enumerating every lazy (server, point) choice per request."""
    if budget is None:
        budget = get_budget(key="bruteforce_leaves")
    leaves = (inst.k * inst.l) ** inst.m
    if leaves > budget:
        raise BudgetExceededError(f"brute force needs {leaves} leaves, budget is {budget}")
    best = [None]

    def search(i: int, config: Configuration, cost: Fraction):
        if best[0] is not None and cost >= best[0]:
            return
        if i == inst.m:
            best[0] = cost
            return
        request = inst.requests[i]
        if serves(config, request):
            search(i + 1, config, cost)
            return
        for x in sorted(set(config)):
            for r in request:
                search(i + 1, replace_point(config, x, r), cost + inst.space.d(x, r))

    search(0, inst.initial, Fraction(0))
    return best[0]


def opt_kserver_flow(inst: Instance) -> Tuple[Fraction, Schedule]:
    """
    Exact k-server optimum (singleton requests) as a min-cost flow: every
    request node carries an arc of cost -M that any optimum saturates.
    """
    if any(len(r) != 1 for r in inst.requests):
        raise InstanceError("the k-server flow solver needs single-point requests")
    space, k, m = inst.space, inst.k, inst.m
    targets = [r[0] for r in inst.requests]
    big_m = 1 + sum((sum(row, Fraction(0)) for row in space.table), Fraction(0))

    source, sink = 0, 1

    def server_node(j):
        return 2 + j

    def request_in(i):
        return 2 + k + 2 * i

    def request_out(i):
        return 2 + k + 2 * i + 1

    network = MinCostFlow(2 + k + 2 * m)
    for j, s in enumerate(inst.initial):
        network.add_edge(source, server_node(j), 1, 0)
        network.add_edge(server_node(j), sink, 1, 0)
        for i, r in enumerate(targets):
            network.add_edge(server_node(j), request_in(i), 1, space.d(s, r))
    for i, r in enumerate(targets):
        network.add_edge(request_in(i), request_out(i), 1, -big_m)
        network.add_edge(request_out(i), sink, 1, 0)
        for later in range(i + 1, m):
            network.add_edge(request_out(i), request_in(later), 1, space.d(r, targets[later]))

    flow, cost = network.solve(source, sink, k)
    if flow != k:
        raise LPError(f"flow network carried {flow} of {k} units")
    total = cost + m * big_m

    # flow decomposition: one path per server
    moves: List[List[Move]] = [[] for _ in range(m)]
    served = 0
    for j, s in enumerate(inst.initial):
        node = server_node(j)
        while node != sink:
            edge = next(e for e in network.graph[node] if not e.is_reverse() and e.flow > 0)
            node = edge.v
            if node >= 2 + k and (node - 2 - k) % 2 == 0:
                i = (node - 2 - k) // 2
                served += 1
                if targets[i] != s:
                    moves[i].append((j, targets[i]))
                s = targets[i]
    if served != m:
        raise LPError(f"optimal flow serves {served} of {m} requests; M is too small")
    return total, Schedule(tuple(inst.initial), moves, total)


def opt_mss_path(inst: Instance) -> Fraction:
    """Single-server optimum as a shortest path through the request layers."""
    if inst.k != 1:
        raise InstanceError("the layered shortest path solver needs k = 1")
    if not inst.requests:
        return Fraction(0)
    space = inst.space
    graph = nx.DiGraph()
    start = inst.initial[0]
    for p in inst.requests[0]:
        graph.add_edge("source", (0, p), weight=space.d(start, p))
    for i in range(inst.m - 1):
        for p in inst.requests[i]:
            for q in inst.requests[i + 1]:
                graph.add_edge((i, p), (i + 1, q), weight=space.d(p, q))
    for p in inst.requests[-1]:
        graph.add_edge((inst.m - 1, p), "sink", weight=Fraction(0))
    return Fraction(nx.dijkstra_path_length(graph, "source", "sink", weight="weight"))


def _var_name(key: VarKey) -> str:
    return f"{key[0]}({','.join(str(v + 1) for v in key[1:])})"


@dataclass
class LPModel:
    instance: Instance
    variables: List[VarKey]
    program: LinearProgram
    row_names: List[str]
    index: Dict[VarKey, int] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {key: idx for idx, key in enumerate(self.variables)}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def _dense(self, values: Dict[VarKey, Fraction]) -> List[Fraction]:
        return [Fraction(values.get(key, 0)) for key in self.variables]

    def is_feasible(self, values: Dict[VarKey, Fraction]) -> bool:
        return not self.program.violations(self._dense(values))

    def objective_value(self, values: Dict[VarKey, Fraction]) -> Fraction:
        return self.program.value_of(self._dense(values))

    def dump(self) -> str:
        def expression(coeffs):
            terms = [f"{format_fraction(a)} {_var_name(self.variables[j])}" for j, a in coeffs]
            return " + ".join(terms) if terms else "0"

        objective = [(j, c) for j, c in enumerate(self.program.objective) if c != 0]
        lines = [f"min: {expression(objective)}"]
        for name, (coeffs, sense, rhs) in zip(self.row_names, self.program.rows):
            lines.append(f"{name}: {expression(sorted(coeffs.items()))} {sense} {format_fraction(rhs)}")
        lines.append("bounds: 0 <= x <= 1")
        return "\n".join(lines)


@dataclass
class FractionalSolution:
    values: Dict[VarKey, Fraction]
    objective: Fraction
    reduced_costs: Dict[int, Fraction] = field(default_factory=dict)

    def verify(self, model: LPModel) -> bool:
        return model.is_feasible(self.values) and model.objective_value(self.values) == self.objective

    def incoming(self, model: LPModel, i: int, j: int) -> Fraction:
        """Mass arriving at point j of request i, from initial positions or earlier requests."""
        inst = model.instance
        total = sum((self.values.get(("g", kp, i, j), 0) for kp in range(inst.k)), Fraction(0))
        for earlier in range(i):
            for jj in range(len(inst.requests[earlier])):
                total += self.values.get(("f", earlier, jj, i, j), 0)
        return total


def build_lp(inst: Instance) -> LPModel:
    """
    LP relaxation of the MSSMS integer program: g(k',i,j) sends server k' first to
    r_i^j, f(i,j,i',j') moves a server from r_i^j on to r_i'^j'. All variables in [0, 1].
    """
    space, requests = inst.space, inst.requests
    variables: List[VarKey] = []
    costs: List[Fraction] = []
    for kp, s in enumerate(inst.initial):
        for i, request in enumerate(requests):
            for j, r in enumerate(request):
                variables.append(("g", kp, i, j))
                costs.append(space.d(s, r))
    for i, request in enumerate(requests):
        for later in range(i + 1, inst.m):
            for j, r in enumerate(request):
                for jj, rr in enumerate(requests[later]):
                    variables.append(("f", i, j, later, jj))
                    costs.append(space.d(r, rr))
    index = {key: idx for idx, key in enumerate(variables)}

    rows, names = [], []
    for kp in range(inst.k):
        coeffs = {
            index[("g", kp, i, j)]: Fraction(1)
            for i, request in enumerate(requests)
            for j in range(len(request))
        }
        rows.append((coeffs, LE, Fraction(1)))
        names.append(f"server{kp + 1}")
    for i, request in enumerate(requests):
        for j in range(len(request)):
            coeffs: Dict[int, Fraction] = {}
            for kp in range(inst.k):
                coeffs[index[("g", kp, i, j)]] = Fraction(1)
            for earlier in range(i):
                for jj in range(len(requests[earlier])):
                    coeffs[index[("f", earlier, jj, i, j)]] = Fraction(1)
            for later in range(i + 1, inst.m):
                for jj in range(len(requests[later])):
                    coeffs[index[("f", i, j, later, jj)]] = Fraction(-1)
            # kept as ">=" like the integer program; slack never helps an optimum
            rows.append((coeffs, GE, Fraction(0)))
            names.append(f"flow({i + 1},{j + 1})")
    for i, request in enumerate(requests):
        coeffs = {}
        for j in range(len(request)):
            for kp in range(inst.k):
                coeffs[index[("g", kp, i, j)]] = Fraction(1)
            for earlier in range(i):
                for jj in range(len(requests[earlier])):
                    coeffs[index[("f", earlier, jj, i, j)]] = Fraction(1)
        rows.append((coeffs, GE, Fraction(1)))
        names.append(f"cover{i + 1}")

    program = LinearProgram(costs, rows, [Fraction(1)] * len(variables))
    return LPModel(inst, variables, program, names)


def solve_lp(model: LPModel) -> FractionalSolution:
    result = solve_exact(model.program)
    values = {key: v for key, v in zip(model.variables, result.values) if v != 0}
    logging.info(
        f"LP optimum {format_fraction(result.objective)} over {model.n_vars} variables "
        f"after {result.pivots} pivots"
    )
    return FractionalSolution(values, result.objective, result.reduced_costs)


def solve_lp_float(model: LPModel) -> float:
    return solve_float(model.program)[0]


@dataclass
class RoundingResult:
    chosen: Tuple[int, ...]
    chosen_index: Tuple[int, ...]
    instance: Instance
    schedule: Schedule
    cost: Fraction


def round_to_kl(inst: Instance, sol: FractionalSolution, model: Optional[LPModel] = None) -> RoundingResult:
    """
    Scales the LP optimum by l, keeps for each request the first point with
    incoming mass >= 1 and solves the resulting kl-server instance exactly.
    """
    model = model or build_lp(inst)
    chosen, chosen_index = [], []
    for i, request in enumerate(inst.requests):
        for j in range(len(request)):
            if inst.l * sol.incoming(model, i, j) >= 1:
                chosen.append(request[j])
                chosen_index.append(j)
                break
        else:
            raise LPError(f"request {i + 1} has no point with scaled mass >= 1")
    kl_inst = Instance(
        inst.space,
        inst.k * inst.l,
        1,
        make_configuration(list(inst.initial) * inst.l),
        tuple((p,) for p in chosen),
        f"{inst.name}-kl" if inst.name else "",
    )
    cost, schedule = opt_kserver_flow(kl_inst)
    return RoundingResult(tuple(chosen), tuple(chosen_index), kl_inst, schedule, cost)


def lp_point_from_schedule(model: LPModel, schedule: Schedule) -> Dict[VarKey, Fraction]:
    """
    Integral LP point of a k-server schedule: each request is credited to the
    server that moved for it, or else to the lowest server already on it.
    """
    inst = model.instance
    positions = list(schedule.initial_positions)
    last: Dict[int, Tuple[int, int]] = {}
    values: Dict[VarKey, Fraction] = {}
    for i, (request, step) in enumerate(zip(inst.requests, schedule.moves)):
        for server, destination in step:
            positions[server] = destination
        movers = [s for s, _ in step if positions[s] in request]
        standing = [s for s, p in enumerate(positions) if p in request]
        if not standing:
            raise ScheduleError(f"request {i + 1} is not served")
        server = movers[0] if movers else standing[0]
        j = request.index(positions[server])
        if server in last:
            values[("f", *last[server], i, j)] = Fraction(1)
        else:
            values[("g", server, i, j)] = Fraction(1)
        last[server] = (i, j)
    return values


def schedule_from_lp_point(model: LPModel, values: Dict[VarKey, Fraction]) -> Schedule:
    """Reads a schedule off an integral LP point by following each server's chain."""
    inst = model.instance
    if any(v not in (0, 1) for v in values.values()):
        raise ScheduleError("only integral LP points describe a schedule")
    arrivals: Dict[Tuple[int, int], List[int]] = {}
    for key, v in values.items():
        if v == 1 and key[0] == "g":
            _, kp, i, j = key
            arrivals.setdefault((i, j), []).append(kp)
    positions = list(inst.initial)
    moves: List[List[Move]] = []
    cost = Fraction(0)
    for i, request in enumerate(inst.requests):
        step = []
        for j in range(len(request)):
            servers = sorted(arrivals.get((i, j), []))
            for server in servers:
                if positions[server] != request[j]:
                    cost += inst.space.d(positions[server], request[j])
                    positions[server] = request[j]
                    step.append((server, request[j]))
            outgoing = sorted(
                key for key, v in values.items() if v == 1 and key[0] == "f" and key[1:3] == (i, j)
            )
            if len(outgoing) > len(servers):
                raise ScheduleError(f"more flow leaves point ({i + 1},{j + 1}) than arrives")
            for server, key in zip(servers, outgoing):
                arrivals.setdefault((key[3], key[4]), []).append(server)
        moves.append(step)
    return Schedule(tuple(inst.initial), moves, cost)
