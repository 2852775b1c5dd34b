"""Network shapes the relay protocols run over.

Four shapes: the six-node ring, a single chain of m intermediaries, M
node-disjoint parallel paths, and an extended-reach chain where relay keys
span up to t+1 links. Every shape is a set of endpoint-to-endpoint paths;
all protocol scheduling works from the path lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

__all__ = [
    "Role",
    "Shape",
    "NodeId",
    "Link",
    "Topology",
    "ReachablePair",
    "build_ring6",
    "build_chain",
    "build_reach_chain",
    "build_multipath",
    "qkd_reachable_pairs",
    "parse_kv",
    "parse_topology_config",
    "emit_topology_config",
]


class Role(Enum):
    ENDPOINT_A = "A"
    ENDPOINT_B = "B"
    INTERMEDIARY = "N"


class Shape(Enum):
    RING6 = "ring6"
    CHAIN = "chain"
    MULTIPATH = "multipath"
    REACH = "reach"


@dataclass(frozen=True)
class NodeId:
    """A node: label, role, position along its path, and which path it sits on.

    Endpoints belong to every path; their chain_position/path_index are taken
    from the first path. Per-path positions always come from Topology.paths.
    """

    label: str
    role: Role
    chain_position: int
    path_index: int = 0

    @property
    def is_endpoint(self) -> bool:
        return self.role is not Role.INTERMEDIARY

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Link:
    a: NodeId
    b: NodeId
    length_km: float


@dataclass(frozen=True)
class Topology:
    shape: Shape
    nodes: tuple[NodeId, ...]
    links: tuple[Link, ...]
    paths: tuple[tuple[NodeId, ...], ...]
    link_length_km: float
    t: int = 1

    def node(self, label: str) -> NodeId:
        for nd in self.nodes:
            if nd.label == label:
                return nd
        raise ValueError(f"no node labeled {label!r}")

    @property
    def endpoint_a(self) -> NodeId:
        return self.nodes[0]

    @property
    def endpoint_b(self) -> NodeId:
        return self.nodes[1]

    @property
    def intermediaries(self) -> tuple[NodeId, ...]:
        return tuple(nd for nd in self.nodes if not nd.is_endpoint)

    @property
    def path_lengths(self) -> tuple[int, ...]:
        """Intermediaries per path."""
        return tuple(len(p) - 2 for p in self.paths)

    @property
    def m(self) -> int:
        lengths = set(self.path_lengths)
        if len(lengths) != 1:
            raise ValueError("paths have differing lengths; use path_lengths")
        return next(iter(lengths))

    def adjacent(self, u: NodeId, v: NodeId) -> bool:
        pair = {u, v}
        return any({lk.a, lk.b} == pair for lk in self.links)

    def describe(self) -> str:
        if self.shape is Shape.RING6:
            return "ring6"
        if self.shape is Shape.CHAIN:
            return f"chain(m={self.m})"
        if self.shape is Shape.REACH:
            return f"reach(m={self.m},t={self.t})"
        inner = ",".join(str(v) for v in self.path_lengths)
        if self.t > 1:
            return f"multipath({inner};t={self.t})"
        return f"multipath({inner})"


def _endpoints(first_path_len: int) -> tuple[NodeId, NodeId]:
    a = NodeId("A", Role.ENDPOINT_A, 0, 0)
    b = NodeId("B", Role.ENDPOINT_B, first_path_len + 1, 0)
    return a, b


def _check_link_length(link_length_km: float) -> None:
    if not link_length_km > 0:
        raise ValueError("link length must be positive")


def _links_along(paths: tuple[tuple[NodeId, ...], ...], length_km: float) -> tuple[Link, ...]:
    return tuple(
        Link(path[i], path[i + 1], length_km) for path in paths for i in range(len(path) - 1)
    )


def build_ring6(link_length_km: float = 100.0) -> Topology:
    """Six nodes, six links: endpoints joined by two 2-intermediary branches."""
    _check_link_length(link_length_km)
    a, b = _endpoints(2)
    n1 = NodeId("N1", Role.INTERMEDIARY, 1, 0)
    n2 = NodeId("N2", Role.INTERMEDIARY, 2, 0)
    n3 = NodeId("N3", Role.INTERMEDIARY, 1, 1)
    n4 = NodeId("N4", Role.INTERMEDIARY, 2, 1)
    paths = ((a, n1, n2, b), (a, n3, n4, b))
    return Topology(
        Shape.RING6,
        (a, b, n1, n2, n3, n4),
        _links_along(paths, link_length_km),
        paths,
        link_length_km,
    )


def build_chain(m: int, link_length_km: float = 100.0) -> Topology:
    """A single path with m >= 2 intermediaries."""
    if m < 2:
        raise ValueError("a chain needs at least 2 intermediaries")
    _check_link_length(link_length_km)
    a, b = _endpoints(m)
    inner = tuple(NodeId(f"N{i}", Role.INTERMEDIARY, i, 0) for i in range(1, m + 1))
    path = (a, *inner, b)
    return Topology(
        Shape.CHAIN, (a, b, *inner), _links_along((path,), link_length_km), (path,), link_length_km
    )


def build_reach_chain(m: int, t: int, link_length_km: float = 100.0) -> Topology:
    """A chain whose relay keys may span up to t+1 links, t >= 2.

    Requires m >= t+1, else the endpoints would be within direct relay reach
    of each other and the forwarding scheme degenerates.
    """
    if t < 2:
        raise ValueError("extended reach needs t >= 2")
    if m < t + 1:
        raise ValueError("need m >= t+1 intermediaries for reach t")
    base = build_chain(m, link_length_km)
    return Topology(Shape.REACH, base.nodes, base.links, base.paths, link_length_km, t)


def build_multipath(
    path_lengths: tuple[int, ...] | list[int], link_length_km: float = 100.0, t: int = 1
) -> Topology:
    """M node-disjoint paths sharing only the endpoints; path p's nodes are Nj.p."""
    lengths = tuple(path_lengths)
    if not lengths:
        raise ValueError("need at least one path")
    if t < 1:
        raise ValueError("reach parameter must be at least 1")
    for m in lengths:
        if m < 2:
            raise ValueError("every path needs at least 2 intermediaries")
        if m < t + 1:
            raise ValueError("need m >= t+1 intermediaries on every path for reach t")
    _check_link_length(link_length_km)
    a, b = _endpoints(lengths[0])
    paths = []
    inner_all: list[NodeId] = []
    for p, m in enumerate(lengths, start=1):
        inner = tuple(NodeId(f"N{j}.{p}", Role.INTERMEDIARY, j, p - 1) for j in range(1, m + 1))
        inner_all.extend(inner)
        paths.append((a, *inner, b))
    return Topology(
        Shape.MULTIPATH,
        (a, b, *inner_all),
        _links_along(tuple(paths), link_length_km),
        tuple(paths),
        link_length_km,
        t,
    )


@dataclass(frozen=True)
class ReachablePair:
    """A pair of nodes that can establish a key, and by which mechanism.

    mechanism is "P2P" for adjacent pairs involving an endpoint, "TF" for
    same-path pairs bridged by an untrusted relay in the middle.
    """

    a: NodeId
    b: NodeId
    mechanism: str
    relay: NodeId | None = None

    @property
    def labels(self) -> tuple[str, str]:
        return (self.a.label, self.b.label)


def qkd_reachable_pairs(topo: Topology, t: int | None = None) -> tuple[ReachablePair, ...]:
    """Every pair that can establish a key on this topology.

    Adjacent pairs involving an endpoint get point-to-point keys. Same-path
    pairs at chain distance d, 2 <= d <= t+1, get relay keys measured at the
    midpoint node (lower index on ties). t defaults to the topology's own.
    """
    t_eff = topo.t if t is None else t
    if t_eff < 1:
        raise ValueError("reach parameter must be at least 1")
    out: list[ReachablePair] = []
    seen: set[frozenset[str]] = set()

    def emit(pair: ReachablePair) -> None:
        key = frozenset(pair.labels)
        if key not in seen:
            seen.add(key)
            out.append(pair)

    for path in topo.paths:
        for i in range(len(path) - 1):
            u, v = path[i], path[i + 1]
            if u.is_endpoint or v.is_endpoint:
                emit(ReachablePair(u, v, "P2P"))
    for path in topo.paths:
        last = len(path) - 1
        for i in range(last + 1):
            for j in range(i + 2, min(i + t_eff + 1, last) + 1):
                emit(ReachablePair(path[i], path[j], "TF", relay=path[(i + j) // 2]))
    return tuple(out)


def parse_kv(text: str) -> dict[str, str]:
    """Parse 'key = value' lines; '#' starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip() or not value.strip():
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


_TOPOLOGY_KEYS = {"shape", "link_length_km", "m", "t", "paths"}


def parse_topology_config(text: str) -> Topology:
    kv = parse_kv(text)
    unknown = set(kv) - _TOPOLOGY_KEYS
    if unknown:
        raise ValueError(f"unknown topology keys: {sorted(unknown)}")
    try:
        shape = Shape(kv["shape"])
    except KeyError:
        raise ValueError("missing 'shape'") from None
    except ValueError:
        raise ValueError(f"unknown shape {kv['shape']!r}") from None
    link = float(kv.get("link_length_km", "100"))

    def need(key: str) -> str:
        if key not in kv:
            raise ValueError(f"shape {shape.value!r} requires {key!r}")
        return kv[key]

    if shape is Shape.RING6:
        return build_ring6(link)
    if shape is Shape.CHAIN:
        return build_chain(int(need("m")), link)
    if shape is Shape.REACH:
        return build_reach_chain(int(need("m")), int(need("t")), link)
    lengths = tuple(int(v) for v in need("paths").split(","))
    return build_multipath(lengths, link, int(kv.get("t", "1")))


def emit_topology_config(topo: Topology) -> str:
    lines = [f"shape = {topo.shape.value}", f"link_length_km = {topo.link_length_km}"]
    if topo.shape in (Shape.CHAIN, Shape.REACH):
        lines.append(f"m = {topo.m}")
    if topo.shape is Shape.REACH:
        lines.append(f"t = {topo.t}")
    if topo.shape is Shape.MULTIPATH:
        lines.append("paths = " + ",".join(str(v) for v in topo.path_lengths))
        if topo.t != 1:
            lines.append(f"t = {topo.t}")
    return "\n".join(lines) + "\n"
