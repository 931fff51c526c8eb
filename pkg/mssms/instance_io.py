import logging
from typing import Callable, Dict, Iterator, List, Optional, Tuple

from .metric import (
    MetricError,
    MetricSpace,
    cluster_space,
    explicit_space,
    format_fraction,
    line_space,
    to_fraction,
    uniform_space,
)
from .offline import Instance, InstanceError

Line = Tuple[int, List[str]]


class InstanceFormatError(InstanceError):
    """Raised when an instance file cannot be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}" if line_number else message)


def _tokens(text: str) -> Iterator[Line]:
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield number, tokens


def _int(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceFormatError(f"expected an integer, got '{token}'", line_number) from None


def _parse_uniform(args: List[str], number: int, lines: Iterator[Line]) -> MetricSpace:
    if len(args) != 1:
        raise InstanceFormatError("usage: metric uniform N", number)
    return uniform_space(_int(args[0], number))


def _parse_line(args: List[str], number: int, lines: Iterator[Line]) -> MetricSpace:
    if not args:
        raise InstanceFormatError("usage: metric line c1 c2 ... cN", number)
    try:
        return line_space([to_fraction(a) for a in args])
    except ValueError as e:
        raise InstanceFormatError(f"bad coordinate: {e}", number) from None


def _parse_explicit(args: List[str], number: int, lines: Iterator[Line]) -> MetricSpace:
    if len(args) != 1:
        raise InstanceFormatError("usage: metric explicit N, then N rows", number)
    n = _int(args[0], number)
    rows = []
    for _ in range(n):
        try:
            row_number, row = next(lines)
        except StopIteration:
            raise InstanceFormatError(f"expected {n} distance rows", number) from None
        if len(row) != n:
            raise InstanceFormatError(f"distance row has {len(row)} entries, expected {n}", row_number)
        try:
            rows.append([to_fraction(v) for v in row])
        except ValueError as e:
            raise InstanceFormatError(f"bad distance: {e}", row_number) from None
    return explicit_space(rows)


def _parse_cluster(args: List[str], number: int, lines: Iterator[Line]) -> MetricSpace:
    if len(args) != 3:
        raise InstanceFormatError("usage: metric cluster L KP1 D", number)
    return cluster_space(_int(args[0], number), _int(args[1], number), to_fraction(args[2]))


METRIC_HEADERS: Dict[str, Callable[[List[str], int, Iterator[Line]], MetricSpace]] = {
    "uniform": _parse_uniform,
    "line": _parse_line,
    "explicit": _parse_explicit,
    "cluster": _parse_cluster,
}


def _points(tokens: List[str], n: int, number: int) -> List[int]:
    points = []
    for token in tokens:
        p = _int(token, number)
        if not 1 <= p <= n:
            raise InstanceFormatError(f"point {p} is outside 1..{n}", number)
        points.append(p - 1)
    return points


def parse_instance(text: str, name: str = "") -> Instance:
    """Parses the 1-based text format into a validated Instance."""
    lines = _tokens(text)
    try:
        number, header = next(lines)
    except StopIteration:
        raise InstanceFormatError("empty instance file") from None
    if header[0] != "metric" or len(header) < 2:
        raise InstanceFormatError("first line must be a 'metric' header", number)
    parser = METRIC_HEADERS.get(header[1])
    if parser is None:
        raise InstanceFormatError(f"unknown metric kind '{header[1]}'", number)
    try:
        space = parser(header[2:], number, lines)
    except MetricError as e:
        raise InstanceFormatError(str(e), number) from None

    servers: Optional[List[int]] = None
    width: Optional[int] = None
    requests: List[Tuple[int, ...]] = []
    request_lines: List[int] = []
    for number, tokens in lines:
        keyword, args = tokens[0], tokens[1:]
        if keyword == "servers":
            if servers is not None:
                raise InstanceFormatError("duplicate 'servers' line", number)
            if not args:
                raise InstanceFormatError("no server positions given", number)
            servers = _points(args, space.n, number)
        elif keyword == "width":
            if len(args) != 1 or _int(args[0], number) < 1:
                raise InstanceFormatError("usage: width L", number)
            width = _int(args[0], number)
        elif keyword == "request":
            if servers is None:
                raise InstanceFormatError("'request' before 'servers'", number)
            points = _points(args, space.n, number)
            if not points:
                raise InstanceFormatError("empty request", number)
            if len(set(points)) != len(points):
                raise InstanceFormatError("request repeats a point", number)
            requests.append(tuple(sorted(points)))
            request_lines.append(number)
        else:
            raise InstanceFormatError(f"unknown directive '{keyword}'", number)
    if servers is None:
        raise InstanceFormatError("missing 'servers' line")
    if width is not None:
        for request, number in zip(requests, request_lines):
            if len(request) > width:
                raise InstanceFormatError(f"request has {len(request)} points, width is {width}", number)
    return Instance.build(space, servers, requests, l=width, name=name)


def _metric_header(space: MetricSpace) -> List[str]:
    if space.kind == "uniform":
        return [f"metric uniform {space.n}"]
    if space.kind == "line":
        return ["metric line " + " ".join(format_fraction(c) for c in space.params["coords"])]
    if space.kind == "cluster":
        p = space.params
        return [f"metric cluster {p['l_clusters']} {p['k_plus_1']} {format_fraction(p['D'])}"]
    rows = [" ".join(format_fraction(v) for v in row) for row in space.table]
    return [f"metric explicit {space.n}"] + rows


def emit_instance(inst: Instance) -> str:
    lines = [f"# {inst.name}"] if inst.name else []
    lines += _metric_header(inst.space)
    lines.append("servers " + " ".join(str(p + 1) for p in inst.initial))
    if inst.l != max((len(r) for r in inst.requests), default=1):
        lines.append(f"width {inst.l}")
    for request in inst.requests:
        lines.append("request " + " ".join(str(p + 1) for p in request))
    return "\n".join(lines) + "\n"


def read_instance_file(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    inst = parse_instance(text, name=path)
    logging.info(f"Loaded instance {path}: n={inst.space.n}, k={inst.k}, l={inst.l}, m={inst.m}")
    return inst


def write_instance_file(path: str, inst: Instance):
    with open(path, "w", encoding="utf-8") as f:
        f.write(emit_instance(inst))
