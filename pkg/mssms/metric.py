import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

Point = int
# Canonical forms: both are sorted tuples of 0-based point indices.
Configuration = Tuple[int, ...]
Request = Tuple[int, ...]
Number = Union[int, Fraction, str, float]


class MetricError(ValueError):
    """Raised when a metric space, configuration or request is malformed."""

    pass


def to_fraction(value: Number) -> Fraction:
    """Exact conversion; floats go through their shortest decimal repr."""
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    """Exact p/q text; integers print without a denominator."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """
    A finite metric space with an exact (rational) distance table.
    Instances are immutable and safe to share between worker processes.
    """

    kind: str
    table: Tuple[Tuple[Fraction, ...], ...]
    labels: Tuple[str, ...]
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        as_float = np.array(
            [[float(v) for v in row] for row in self.table], dtype=float
        ).reshape(len(self.table), len(self.table))
        as_float.setflags(write=False)
        object.__setattr__(self, "_float_table", as_float)

    @property
    def n(self) -> int:
        return len(self.table)

    def d(self, p: Point, q: Point) -> Fraction:
        return self.table[p][q]

    def float_table(self) -> np.ndarray:
        return self._float_table

    def diameter(self) -> Fraction:
        return max((max(row) for row in self.table), default=Fraction(0))

    def cluster_point(self, i: int, j: int) -> Point:
        """Index of cluster point (i, j), both 1-based."""
        if self.kind != "cluster":
            raise MetricError("cluster coordinates need a cluster space")
        size = self.params["k_plus_1"]
        if not (1 <= i <= self.params["l_clusters"] and 1 <= j <= size):
            raise MetricError(f"no cluster point ({i},{j})")
        return (i - 1) * size + (j - 1)

    def cluster_of(self, p: Point) -> Tuple[int, int]:
        """1-based (cluster, position) of a point of a cluster space."""
        if self.kind != "cluster":
            raise MetricError("cluster coordinates need a cluster space")
        size = self.params["k_plus_1"]
        return p // size + 1, p % size + 1

    def __repr__(self) -> str:
        return f"MetricSpace(kind={self.kind!r}, n={self.n})"


def _validate_table(table: Sequence[Sequence[Fraction]], check_triangle: bool):
    n = len(table)
    for p, row in enumerate(table):
        if len(row) != n:
            raise MetricError(f"distance matrix row {p + 1} has {len(row)} entries, expected {n}")
        if row[p] != 0:
            raise MetricError(f"dist({p + 1},{p + 1}) must be 0, got {row[p]}")
        for q, value in enumerate(row):
            if value < 0:
                raise MetricError(f"negative distance between {p + 1} and {q + 1}")
            if table[q][p] != value:
                raise MetricError(f"distance matrix is not symmetric at ({p + 1},{q + 1})")
    if check_triangle:
        for p, q, r in itertools.product(range(n), repeat=3):
            if table[p][r] > table[p][q] + table[q][r]:
                raise MetricError(
                    f"triangle inequality violated: d({p + 1},{r + 1}) > "
                    f"d({p + 1},{q + 1}) + d({q + 1},{r + 1})"
                )


def uniform_space(n: int) -> MetricSpace:
    if n < 1:
        raise MetricError("a uniform space needs at least one point")
    one, zero = Fraction(1), Fraction(0)
    table = tuple(tuple(zero if p == q else one for q in range(n)) for p in range(n))
    return MetricSpace("uniform", table, tuple(str(p + 1) for p in range(n)), {"n": n})


def line_space(coords: Sequence[Number]) -> MetricSpace:
    if not coords:
        raise MetricError("a line space needs at least one coordinate")
    xs = tuple(to_fraction(c) for c in coords)
    table = tuple(tuple(abs(a - b) for b in xs) for a in xs)
    labels = tuple(str(x) for x in xs)
    return MetricSpace("line", table, labels, {"coords": xs})


def explicit_space(matrix: Sequence[Sequence[Number]]) -> MetricSpace:
    table = tuple(tuple(to_fraction(v) for v in row) for row in matrix)
    if not table:
        raise MetricError("an explicit space needs at least one point")
    _validate_table(table, check_triangle=True)
    return MetricSpace("explicit", table, tuple(str(p + 1) for p in range(len(table))))


def cluster_space(l_clusters: int, k_plus_1: int, D: Number) -> MetricSpace:
    """
    Points (i, j) in [l] x [k+1], stored at index (i-1)(k+1) + (j-1).
    Distance 1 inside a cluster, D across clusters.
    """
    D = to_fraction(D)
    if D <= 0:
        raise MetricError(f"cluster distance D must be positive, got {D}")
    if 2 * D < 1:
        raise MetricError(f"cluster distance D={D} breaks the triangle inequality")
    if l_clusters < 1 or k_plus_1 < 1:
        raise MetricError("cluster space needs at least one cluster of one point")
    n = l_clusters * k_plus_1
    one, zero = Fraction(1), Fraction(0)

    def dist(p: int, q: int) -> Fraction:
        if p == q:
            return zero
        return one if p // k_plus_1 == q // k_plus_1 else D

    table = tuple(tuple(dist(p, q) for q in range(n)) for p in range(n))
    labels = tuple(f"({p // k_plus_1 + 1},{p % k_plus_1 + 1})" for p in range(n))
    params = {"l_clusters": l_clusters, "k_plus_1": k_plus_1, "D": D}
    return MetricSpace("cluster", table, labels, params)


def scaled_union_space(
    parts: Sequence[MetricSpace],
    betas: Sequence[Number],
    separation: Number = None,
) -> MetricSpace:
    """
    Disjoint union of the parts, part i scaled by beta_i. Parts are kept
    `separation` apart (default 1 + sum of scaled diameters).
    """
    if len(parts) != len(betas) or not parts:
        raise MetricError("scaled union needs one positive scale factor per part")
    scales = [to_fraction(b) for b in betas]
    if any(b <= 0 for b in scales):
        raise MetricError("scale factors must be positive")
    if separation is None:
        separation = 1 + sum(b * part.diameter() for b, part in zip(scales, parts))
    separation = to_fraction(separation)
    largest = max(b * part.diameter() for b, part in zip(scales, parts))
    if 2 * separation < largest:
        raise MetricError("separation too small for the triangle inequality")

    owner: List[Tuple[int, int]] = [
        (idx, p) for idx, part in enumerate(parts) for p in range(part.n)
    ]

    def dist(a: int, b: int) -> Fraction:
        (pa, xa), (pb, xb) = owner[a], owner[b]
        if a == b:
            return Fraction(0)
        if pa != pb:
            return separation
        return scales[pa] * parts[pa].d(xa, xb)

    n = len(owner)
    table = tuple(tuple(dist(a, b) for b in range(n)) for a in range(n))
    labels = tuple(f"{idx + 1}:{parts[idx].labels[p]}" for idx, p in owner)
    params = {"betas": tuple(scales), "separation": separation, "sizes": tuple(p.n for p in parts)}
    return MetricSpace("scaled_union", table, labels, params)


SPACE_BUILDERS: Dict[str, Callable[[Dict[str, Any]], MetricSpace]] = {
    "uniform": lambda descriptor: uniform_space(int(descriptor["n"])),
    "line": lambda descriptor: line_space(descriptor["coords"]),
    "explicit": lambda descriptor: explicit_space(descriptor["matrix"]),
    "cluster": lambda descriptor: cluster_space(
        int(descriptor["l_clusters"]), int(descriptor["k_plus_1"]), descriptor["D"]
    ),
    "scaled_union": lambda descriptor: scaled_union_space(
        [build_space(part) for part in descriptor["parts"]],
        descriptor["betas"],
        descriptor.get("separation"),
    ),
}


def build_space(descriptor: Dict[str, Any]) -> MetricSpace:
    """Builds a metric space from a descriptor such as {"kind": "uniform", "n": 4}."""
    kind = descriptor.get("kind")
    builder = SPACE_BUILDERS.get(kind)
    if builder is None:
        raise MetricError(f"Unknown metric kind: '{kind}'")
    try:
        return builder(descriptor)
    except KeyError as e:
        raise MetricError(f"metric descriptor of kind '{kind}' is missing {e}") from e


def make_configuration(points: Sequence[Point], space: MetricSpace = None) -> Configuration:
    config = tuple(sorted(int(p) for p in points))
    if space is not None:
        for p in config:
            if not 0 <= p < space.n:
                raise MetricError(f"point {p + 1} is outside a space of {space.n} points")
    return config


def make_request(points: Sequence[Point], n: int = None) -> Request:
    request = tuple(sorted(int(p) for p in points))
    if not request:
        raise MetricError("a request needs at least one point")
    if len(set(request)) != len(request):
        raise MetricError(f"request {[p + 1 for p in request]} repeats a point")
    if n is not None and not all(0 <= p < n for p in request):
        raise MetricError(f"request {[p + 1 for p in request]} leaves a space of {n} points")
    return request


def serves(config: Sequence[Point], request: Sequence[Point]) -> bool:
    return not set(config).isdisjoint(request)


def replace_point(config: Configuration, old: Point, new: Point) -> Configuration:
    """The configuration after one server moves from `old` to `new`."""
    points = list(config)
    points.remove(old)
    points.append(new)
    return tuple(sorted(points))


def all_configurations(n: int, k: int) -> List[Configuration]:
    return list(itertools.combinations_with_replacement(range(n), k))


def hungarian(cost: Sequence[Sequence[Fraction]]) -> List[int]:
    """
    Exact minimum-cost assignment of every row to a distinct column
    (rows <= columns) with the potentials method. Returns the column of each row.
    """
    n = len(cost)
    m = len(cost[0]) if n else 0
    if n > m:
        raise MetricError(f"cannot assign {n} rows to {m} columns")
    u = [Fraction(0)] * (n + 1)
    v = [Fraction(0)] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: List[Optional[Fraction]] = [None] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = None, 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assignment = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            assignment[p[j] - 1] = j - 1
    return assignment


def min_matching(
    space: MetricSpace, X: Sequence[Point], Y: Sequence[Point]
) -> Tuple[Fraction, List[Tuple[Point, Point]]]:
    """
    Minimum-weight perfect matching between two equal-size multisets.
    Returns the exact cost and the (x, y) pairs of the matching.
    """
    if len(X) != len(Y):
        raise MetricError(f"configurations of sizes {len(X)} and {len(Y)} cannot be matched")
    # Shared points stay matched to themselves in some optimal matching.
    left = Counter(X)
    pairs: List[Tuple[Point, Point]] = []
    rest_y: List[Point] = []
    for y in sorted(Y):
        if left[y] > 0:
            left[y] -= 1
            pairs.append((y, y))
        else:
            rest_y.append(y)
    rest_x = sorted(left.elements())
    if not rest_x:
        return Fraction(0), pairs
    if len(rest_x) == 1:
        pairs.append((rest_x[0], rest_y[0]))
        return space.d(rest_x[0], rest_y[0]), pairs

    costs = [[space.d(x, y) for y in rest_y] for x in rest_x]
    total = Fraction(0)
    for x, c in zip(rest_x, hungarian(costs)):
        y = rest_y[c]
        pairs.append((x, y))
        total += space.d(x, y)
    return total, pairs


def config_distance(space: MetricSpace, X: Sequence[Point], Y: Sequence[Point]) -> Fraction:
    return min_matching(space, X, Y)[0]


def config_distance_bruteforce(
    space: MetricSpace, X: Sequence[Point], Y: Sequence[Point]
) -> Fraction:
    """Permutation oracle for config_distance; meant for k <= 6."""
    if len(X) != len(Y):
        raise MetricError(f"configurations of sizes {len(X)} and {len(Y)} cannot be matched")
    if not X:
        return Fraction(0)
    return min(
        sum((space.d(x, y) for x, y in zip(X, perm)), Fraction(0))
        for perm in itertools.permutations(Y)
    )


def assign_servers(
    space: MetricSpace, positions: Sequence[Point], targets: Sequence[Point]
) -> List[Tuple[int, Point]]:
    """
    Cheapest way to place distinct servers on every target point.
    Returns (server index, target) pairs; servers not listed stay put.
    """
    targets = list(dict.fromkeys(targets))
    if len(targets) > len(positions):
        raise MetricError(f"{len(targets)} targets cannot be covered by {len(positions)} servers")
    if not targets:
        return []
    costs = [[space.d(t, p) for p in positions] for t in targets]
    return sorted((c, t) for t, c in zip(targets, hungarian(costs)))
