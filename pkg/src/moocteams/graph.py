"""Directed weighted student interaction graph and shortest-path primitives.

Edge u -> v with weight w means student u replied to messages authored by
student v a total of w times.  The graph is immutable once built; every
metric and simulation in the package reads from it concurrently without
locks.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import DataFormatError, MissingNodeError, ParameterError

StudentId = str

#: Sentinel distance for node pairs with no directed path.
UNREACHABLE = None


class SocialGraph:
    """Directed graph with positive integer edge weights and no self-loops.

    Adjacency is indexed in both directions so out- and in-neighbor scans
    are O(degree).  Node and edge counts are O(1).
    """

    __slots__ = ("_out", "_in", "_nodes", "_edge_count", "_weight_total")

    def __init__(self, edges: Mapping[tuple[StudentId, StudentId], int] | None = None,
                 nodes: Iterable[StudentId] = ()):
        self._out: dict[StudentId, dict[StudentId, int]] = {}
        self._in: dict[StudentId, dict[StudentId, int]] = {}
        self._edge_count = 0
        self._weight_total = 0
        node_set = set(nodes)
        if edges:
            for (u, v), w in edges.items():
                if u == v:
                    raise ParameterError(f"self-loop on {u!r} not allowed")
                if not isinstance(w, int) or w < 1:
                    raise ParameterError(f"edge {u!r}->{v!r} weight must be a positive integer, got {w!r}")
                if v in self._out.get(u, ()):
                    raise ParameterError(f"duplicate edge {u!r}->{v!r}")
                self._out.setdefault(u, {})[v] = w
                self._in.setdefault(v, {})[u] = w
                node_set.add(u)
                node_set.add(v)
                self._edge_count += 1
                self._weight_total += w
        self._nodes: tuple[StudentId, ...] = tuple(sorted(node_set))
        for n in self._nodes:
            self._out.setdefault(n, {})
            self._in.setdefault(n, {})

    # -- queries ---------------------------------------------------------

    @property
    def nodes(self) -> tuple[StudentId, ...]:
        """All students in canonical (sorted) order."""
        return self._nodes

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return self._edge_count

    @property
    def total_weight(self) -> int:
        """Sum of all edge weights (total reply interactions)."""
        return self._weight_total

    def has_node(self, u: StudentId) -> bool:
        return u in self._out

    def __contains__(self, u: StudentId) -> bool:
        return u in self._out

    def out_neighbors(self, u: StudentId) -> dict[StudentId, int]:
        """Mapping of v -> weight for edges u -> v.  Do not mutate."""
        try:
            return self._out[u]
        except KeyError:
            raise MissingNodeError(u) from None

    def in_neighbors(self, u: StudentId) -> dict[StudentId, int]:
        """Mapping of v -> weight for edges v -> u.  Do not mutate."""
        try:
            return self._in[u]
        except KeyError:
            raise MissingNodeError(u) from None

    def neighbors(self, u: StudentId) -> set[StudentId]:
        """Union of in- and out-neighbors, self excluded."""
        return set(self._out[u]) | set(self._in[u]) if u in self._out else self._raise(u)

    def _raise(self, u: StudentId):
        raise MissingNodeError(u)

    def weight(self, u: StudentId, v: StudentId) -> int:
        """Weight of edge u -> v, or 0 when absent."""
        return self._out.get(u, {}).get(v, 0)

    def mutual_weight(self, u: StudentId, v: StudentId) -> int:
        """Symmetrized tie strength w(u,v) + w(v,u)."""
        return self.weight(u, v) + self.weight(v, u)

    def edges(self) -> Iterator[tuple[StudentId, StudentId, int]]:
        """All edges as (src, dst, weight), canonically ordered."""
        for u in self._nodes:
            out = self._out[u]
            for v in sorted(out):
                yield u, v, out[v]

    def degree(self, u: StudentId) -> int:
        """Unweighted total degree (in-neighbor count + out-neighbor count)."""
        return len(self.out_neighbors(u)) + len(self.in_neighbors(u))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SocialGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._out == other._out

    def __hash__(self):
        raise TypeError("SocialGraph is not hashable")

    def __repr__(self) -> str:
        return f"SocialGraph(nodes={self.node_count}, edges={self.edge_count})"


@dataclass(frozen=True)
class DistanceRow:
    """Hop-count shortest-path distances from one source node.

    ``dist`` maps every graph node to a non-negative hop count, or to
    ``UNREACHABLE`` (None) when no directed path exists.
    """

    source: StudentId
    dist: dict[StudentId, int | None]

    def distance(self, v: StudentId) -> int | None:
        return self.dist[v]

    def reachable(self) -> dict[StudentId, int]:
        """Only the finite entries."""
        return {v: d for v, d in self.dist.items() if d is not None}


def geodesic_distances(g: SocialGraph, source: StudentId) -> DistanceRow:
    """BFS hop counts from ``source`` along edge direction.

    Edge weights express interaction intensity, not length, so they are
    ignored here.
    """
    if source not in g:
        raise MissingNodeError(source)
    dist: dict[StudentId, int | None] = {v: UNREACHABLE for v in g.nodes}
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in g.out_neighbors(u):
            if dist[v] is None:
                dist[v] = du + 1
                queue.append(v)
    return DistanceRow(source=source, dist=dist)


# -- serialization --------------------------------------------------------

CSV_HEADER = ["src", "dst", "weight"]


def write_graph_csv(g: SocialGraph, stream: io.TextIOBase) -> None:
    """Edge list as ``src,dst,weight`` rows with a header, canonical order.

    Isolated nodes are kept as rows with an empty dst and weight 0 so the
    node set round-trips.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    linked = set()
    for u, v, w in g.edges():
        writer.writerow([u, v, w])
        linked.add(u)
        linked.add(v)
    for n in g.nodes:
        if n not in linked:
            writer.writerow([n, "", 0])


def read_graph_csv(stream: io.TextIOBase) -> SocialGraph:
    """Inverse of :func:`write_graph_csv`."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty graph CSV") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise DataFormatError(f"expected header {CSV_HEADER}, got {header}")
    edges: dict[tuple[StudentId, StudentId], int] = {}
    isolated: set[StudentId] = set()
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise DataFormatError(f"bad graph CSV row: {row}")
        src, dst, w = row[0], row[1], row[2]
        if dst == "":
            isolated.add(src)
            continue
        try:
            weight = int(w)
        except ValueError:
            raise DataFormatError(f"non-integer weight in row {row}") from None
        edges[(src, dst)] = weight
    return SocialGraph(edges, nodes=isolated)
