"""Query hypergraphs, GYO ear removal and join trees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Hypergraph:
    vertices: frozenset
    edges: tuple  # of (label, frozenset of vertex keys)

    def __post_init__(self):
        for label, vs in self.edges:
            if not vs <= self.vertices:
                raise ValueError(f"edge {label} has vertices outside the vertex set")

    @classmethod
    def from_edges(cls, edges) -> "Hypergraph":
        edges = tuple((label, frozenset(vs)) for label, vs in edges)
        verts = frozenset().union(*(vs for _, vs in edges)) if edges else frozenset()
        return cls(verts, edges)


def hypergraph(q, include_parameters: bool = True, filters_as_edges: bool = True) -> Hypergraph:
    """Atoms first (edge index = atom index), then filters."""
    edges = []
    for k, atom in enumerate(q.atoms):
        vs = [v for v in atom.vertices() if include_parameters or not v.startswith("$")]
        edges.append((f"{atom.relation}#{k}", frozenset(vs)))
    if filters_as_edges:
        for k, f in enumerate(q.filters):
            vs = [v for v in f.vertices() if include_parameters or not v.startswith("$")]
            edges.append((f"filter#{k}", frozenset(vs)))
    return Hypergraph.from_edges(edges)


@dataclass(frozen=True)
class JoinTree:
    labels: tuple
    node_vertices: tuple  # frozenset per node
    parent: tuple  # parent node index or None for the root
    root: int

    @property
    def children(self) -> tuple:
        kids = [[] for _ in self.labels]
        for n, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(n)
        return tuple(tuple(k) for k in kids)

    def depth(self, n: int) -> int:
        d = 0
        while self.parent[n] is not None:
            n = self.parent[n]
            d += 1
        return d

    def bottom_up(self) -> list:
        """Nodes ordered so that every child precedes its parent."""
        order = []
        stack = [(self.root, False)]
        kids = self.children
        while stack:
            n, done = stack.pop()
            if done:
                order.append(n)
                continue
            stack.append((n, True))
            for c in reversed(kids[n]):
                stack.append((c, False))
        return order

    def weight_nodes(self) -> dict:
        """Each vertex is weighted at the node nearest the root containing it
        (ties broken by node index)."""
        out = {}
        depths = [self.depth(n) for n in range(len(self.labels))]
        for n in sorted(range(len(self.labels)), key=lambda n: (depths[n], n)):
            for v in self.node_vertices[n]:
                out.setdefault(v, n)
        return out

    def has_running_intersection(self) -> bool:
        verts = set().union(*self.node_vertices) if self.node_vertices else set()
        for v in verts:
            tops = [
                n for n, vs in enumerate(self.node_vertices)
                if v in vs and (self.parent[n] is None or v not in self.node_vertices[self.parent[n]])
            ]
            if len(tops) != 1:
                return False
        return True


@dataclass(frozen=True)
class GyoResult:
    acyclic: bool
    join_tree: Optional[JoinTree]
    residual: tuple = ()  # labels of the edges left when reduction got stuck

    def __bool__(self):
        return self.acyclic


def gyo_reduce(h: Hypergraph) -> GyoResult:
    """Repeatedly remove the lowest-index ear.

    An edge ``e`` is an ear if the vertices it shares with the remaining
    edges all lie in one other edge ``f``, which becomes its parent: the
    lowest-index edge containing all of ``e`` if there is one, otherwise the
    lowest-index edge containing the shared part.  Edges sharing nothing are
    attached to the final root."""
    n = len(h.edges)
    verts = [vs for _, vs in h.edges]
    labels = tuple(label for label, _ in h.edges)
    if n == 0:
        return GyoResult(True, JoinTree((), (), (), -1))
    remaining = list(range(n))
    parent = [None] * n
    loose = []
    while len(remaining) > 1:
        progressed = False
        for e in remaining:
            others = [f for f in remaining if f != e]
            shared = verts[e] & frozenset().union(*(verts[f] for f in others))
            if not shared:
                loose.append(e)
            else:
                sup = [f for f in others if verts[e] <= verts[f]]
                cover = sup or [f for f in others if shared <= verts[f]]
                if not cover:
                    continue
                parent[e] = cover[0]
            remaining.remove(e)
            progressed = True
            break
        if not progressed:
            return GyoResult(False, None, tuple(labels[e] for e in remaining))
    root = remaining[0]
    for e in loose:
        parent[e] = root
    tree = JoinTree(labels, tuple(verts), tuple(parent), root)
    return GyoResult(True, tree)


def is_acyclic(h: Hypergraph) -> bool:
    return gyo_reduce(h).acyclic


def is_p_acyclic(q) -> bool:
    return gyo_reduce(hypergraph(q, True, True)).acyclic
