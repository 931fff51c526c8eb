import heapq
import itertools
from fractions import Fraction
from typing import List, Optional, Tuple


class Edge:
    """
    One directed arc of the residual network.
    The backward partner has capacity 0 and carries negative flow.
    """

    __slots__ = ("u", "v", "capacity", "cost", "flow", "reverse_edge")

    def __init__(self, u: int, v: int, capacity: int, cost: Fraction):
        self.u = u
        self.v = v
        self.capacity = capacity
        self.cost = cost
        self.flow = 0
        self.reverse_edge: Optional["Edge"] = None

    def is_reverse(self) -> bool:
        return self.capacity == 0

    def remaining_capacity(self) -> int:
        return self.capacity - self.flow

    def augment(self, amount: int):
        self.flow += amount
        self.reverse_edge.flow -= amount

    def __repr__(self) -> str:
        return f"Edge({self.u}->{self.v}, cap={self.capacity}, cost={self.cost}, flow={self.flow})"


class MinCostFlow:
    """
    Successive shortest paths with node potentials. Arc costs may be
    negative as long as the input network has no negative cycle.
    """

    def __init__(self, n_nodes: int):
        self.n_nodes = n_nodes
        self.graph: List[List[Edge]] = [[] for _ in range(n_nodes)]

    def add_edge(self, u: int, v: int, capacity: int, cost) -> Edge:
        forward = Edge(u, v, capacity, Fraction(cost))
        backward = Edge(v, u, 0, -Fraction(cost))
        forward.reverse_edge = backward
        backward.reverse_edge = forward
        self.graph[u].append(forward)
        self.graph[v].append(backward)
        return forward

    def _bellman_ford(self, source: int) -> List[Optional[Fraction]]:
        dist: List[Optional[Fraction]] = [None] * self.n_nodes
        dist[source] = Fraction(0)
        for _ in range(self.n_nodes - 1):
            changed = False
            for u in range(self.n_nodes):
                if dist[u] is None:
                    continue
                for e in self.graph[u]:
                    if e.remaining_capacity() <= 0:
                        continue
                    candidate = dist[u] + e.cost
                    if dist[e.v] is None or candidate < dist[e.v]:
                        dist[e.v] = candidate
                        changed = True
            if not changed:
                break
        return dist

    def _dijkstra(
        self, source: int, potential: List[Optional[Fraction]]
    ) -> Tuple[List[Optional[Fraction]], List[Optional[Edge]]]:
        dist: List[Optional[Fraction]] = [None] * self.n_nodes
        parent: List[Optional[Edge]] = [None] * self.n_nodes
        dist[source] = Fraction(0)
        tie = itertools.count()
        heap = [(Fraction(0), next(tie), source)]
        while heap:
            d, _, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for e in self.graph[u]:
                if e.remaining_capacity() <= 0 or potential[e.v] is None:
                    continue
                reduced = e.cost + potential[u] - potential[e.v]
                candidate = d + reduced
                if dist[e.v] is None or candidate < dist[e.v]:
                    dist[e.v] = candidate
                    parent[e.v] = e
                    heapq.heappush(heap, (candidate, next(tie), e.v))
        return dist, parent

    def solve(self, source: int, sink: int, max_flow: int) -> Tuple[int, Fraction]:
        """Pushes up to `max_flow` units at minimum cost; returns (flow, cost)."""
        potential = self._bellman_ford(source)
        flow, cost = 0, Fraction(0)
        while flow < max_flow:
            dist, parent = self._dijkstra(source, potential)
            if dist[sink] is None:
                break
            for v in range(self.n_nodes):
                if dist[v] is not None:
                    potential[v] += dist[v]
            bottleneck = max_flow - flow
            v = sink
            while v != source:
                bottleneck = min(bottleneck, parent[v].remaining_capacity())
                v = parent[v].u
            v = sink
            while v != source:
                e = parent[v]
                e.augment(bottleneck)
                cost += bottleneck * e.cost
                v = e.u
            flow += bottleneck
        return flow, cost
