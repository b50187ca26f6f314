"""Finite undirected graphs with a deterministic edge orientation.

Every edge is stored exactly once as an ordered pair (tail, head) with
tail < head lexicographically. Vertex names are the user-facing labels;
all iteration orders are lexicographic so that runs are reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "GraphFormatError",
    "SelfLoopError",
    "DuplicateEdgeError",
    "UnknownVertexError",
    "EmptyGraphError",
    "OrientedGraph",
    "build_graph",
    "parse_graph",
    "serialize_graph",
    "cycle_graph",
]

_VERTEX_NAME_BAD = re.compile(r"[,\s]")


class GraphFormatError(ValueError):
    """Invalid graph document or graph construction input."""


class SelfLoopError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class UnknownVertexError(GraphFormatError):
    pass


class EmptyGraphError(GraphFormatError):
    pass


def _check_vertex_name(name: object) -> str:
    if not isinstance(name, str) or not name:
        raise GraphFormatError(f"vertex name must be a non-empty string, got {name!r}")
    if _VERTEX_NAME_BAD.search(name):
        raise GraphFormatError(f"vertex name {name!r} contains a comma or whitespace")
    return name


@dataclass(frozen=True)
class OrientedGraph:
    """Immutable graph with canonical orientation (tail < head).

    `vertices` is lexicographically sorted; `edges` holds each undirected
    edge once, oriented, sorted; `adjacency` is the symmetric neighbor map
    with sorted neighbor lists. Instances are safe to share between threads.
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    adjacency: Mapping[str, tuple[str, ...]] = field(repr=False)

    def __contains__(self, vertex: str) -> bool:
        return vertex in self.adjacency

    def neighbors(self, vertex: str) -> tuple[str, ...]:
        try:
            return self.adjacency[vertex]
        except KeyError:
            raise UnknownVertexError(f"unknown vertex {vertex!r}") from None

    def degree(self, vertex: str) -> int:
        return len(self.neighbors(vertex))

    def out_neighbors(self, vertex: str) -> tuple[str, ...]:
        """Heads of oriented edges with the given tail, in lexicographic order."""
        return tuple(u for u in self.neighbors(vertex) if u > vertex)

    def has_edge(self, u: str, v: str) -> bool:
        return u in self.adjacency and v in self.adjacency[u]

    def oriented(self, u: str, v: str) -> tuple[str, str]:
        """The canonical (tail, head) form of an edge given in either order."""
        if not self.has_edge(u, v):
            raise UnknownVertexError(f"({u!r}, {v!r}) is not an edge")
        return (u, v) if u < v else (v, u)

    def subgraph(self, keep: Iterable[str]) -> "OrientedGraph":
        kept = set(keep)
        missing = kept - set(self.vertices)
        if missing:
            raise UnknownVertexError(f"unknown vertices {sorted(missing)}")
        return build_graph(
            sorted(kept),
            [e for e in self.edges if e[0] in kept and e[1] in kept],
        )

    def connected_components(self) -> list[tuple[str, ...]]:
        """Components as sorted vertex tuples, ordered by smallest member."""
        seen: set[str] = set()
        comps = []
        for start in self.vertices:
            if start in seen:
                continue
            stack, comp = [start], set()
            while stack:
                v = stack.pop()
                if v in comp:
                    continue
                comp.add(v)
                stack.extend(u for u in self.adjacency[v] if u not in comp)
            seen |= comp
            comps.append(tuple(sorted(comp)))
        return comps


def build_graph(vertices: Iterable[str], edges: Iterable[tuple[str, str]]) -> OrientedGraph:
    """Validate and canonicalize a vertex/edge listing into an OrientedGraph."""
    verts = [_check_vertex_name(v) for v in vertices]
    if not verts:
        raise EmptyGraphError("graph has an empty vertex set")
    if len(set(verts)) != len(verts):
        dupes = sorted({v for v in verts if verts.count(v) > 1})
        raise GraphFormatError(f"duplicate vertex names {dupes}")
    vset = set(verts)

    oriented: set[tuple[str, str]] = set()
    for pair in edges:
        if len(pair) != 2:
            raise GraphFormatError(f"edge {pair!r} must have exactly two endpoints")
        a, b = pair
        if a not in vset:
            raise UnknownVertexError(f"edge endpoint {a!r} is not a declared vertex")
        if b not in vset:
            raise UnknownVertexError(f"edge endpoint {b!r} is not a declared vertex")
        if a == b:
            raise SelfLoopError(f"self-loop on vertex {a!r}")
        e = (a, b) if a < b else (b, a)
        if e in oriented:
            raise DuplicateEdgeError(f"duplicate edge {e}")
        oriented.add(e)

    adjacency: dict[str, list[str]] = {v: [] for v in sorted(vset)}
    for tail, head in oriented:
        adjacency[tail].append(head)
        adjacency[head].append(tail)
    frozen_adj = {v: tuple(sorted(ns)) for v, ns in adjacency.items()}
    return OrientedGraph(
        vertices=tuple(sorted(vset)),
        edges=tuple(sorted(oriented)),
        adjacency=frozen_adj,
    )


def parse_graph(text: str) -> OrientedGraph:
    """Parse the JSON graph document: {"vertices": [...], "edges": [[u, v], ...]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"graph document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise GraphFormatError("graph document must be a JSON object")
    vertices = doc.get("vertices")
    edges = doc.get("edges", [])
    if not isinstance(vertices, list):
        raise GraphFormatError('graph document needs a "vertices" list')
    if not isinstance(edges, list):
        raise GraphFormatError('"edges" must be a list of two-element lists')
    return build_graph(vertices, [tuple(e) if isinstance(e, list) else e for e in edges])


def serialize_graph(graph: OrientedGraph) -> str:
    """Canonical JSON form; parse_graph(serialize_graph(g)) reproduces g."""
    doc = {
        "vertices": list(graph.vertices),
        "edges": [list(e) for e in graph.edges],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def cycle_graph(n: int) -> OrientedGraph:
    """Cycle on n >= 3 vertices labeled "0".."n-1", zero-padded so that
    lexicographic order equals numeric order."""
    if n < 3:
        raise GraphFormatError(f"cycle needs at least 3 vertices, got {n}")
    width = len(str(n - 1))
    names = [str(i).zfill(width) for i in range(n)]
    edges = [(names[i], names[(i + 1) % n]) for i in range(n)]
    return build_graph(names, edges)
