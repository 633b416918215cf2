"""Finite configuration spaces: graphs, proper colorings, permutations, Potts.

States are stored as tuples of small ints with vertices, positions, colors
and spins all 1-based, matching the labels used at the command line and in
serialized output.  Enumeration order is lexicographic on the assignment
tuple, so state ids are stable across runs.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

from .errors import ScheduleSyntaxError, StateCapExceeded

DEFAULT_STATE_CAP = 10**6

State = tuple  # assignment tuple, one value per vertex/position


@dataclass(frozen=True)
class Graph:
    """A finite simple graph on vertices 1..vertex_count."""

    vertex_count: int
    edges: tuple  # normalized (u, v) pairs with u < v, sorted
    name: str = field(default="", compare=False)

    def neighbors(self, v: int) -> tuple:
        """Neighbors of 1-based vertex v, ascending."""
        out = []
        for u, w in self.edges:
            if u == v:
                out.append(w)
            elif w == v:
                out.append(u)
        return tuple(sorted(out))

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))


def build_graph(vertex_count: int, edge_list, name: str = "") -> Graph:
    """Validate and normalize a graph given as 1-based edge pairs.

    Edges are stored with the smaller endpoint first, sorted.  Self-loops,
    duplicate edges and out-of-range endpoints are rejected.
    """
    if vertex_count < 1:
        raise ValueError(f"vertex_count must be positive, got {vertex_count}")
    seen = set()
    normalized = []
    for u, v in edge_list:
        if not (1 <= u <= vertex_count and 1 <= v <= vertex_count):
            raise ValueError(f"edge ({u},{v}) has an endpoint outside 1..{vertex_count}")
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        e = (u, v) if u < v else (v, u)
        if e in seen:
            raise ValueError(f"duplicate edge {e}")
        seen.add(e)
        normalized.append(e)
    return Graph(vertex_count, tuple(sorted(normalized)), name=name)


def triangle_graph() -> Graph:
    """The triangle on vertices 1, 2, 3."""
    return build_graph(3, [(1, 2), (2, 3), (1, 3)], name="triangle")


def read_graph_file(path: str) -> Graph:
    """Read a graph file: first line `n`, then one `u v` pair per line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"graph file {path!r} is empty")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"graph file {path!r}: first line must be the vertex count")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"graph file {path!r}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph(n, edges, name=os.path.basename(path))


# --- configuration kinds ----------------------------------------------------

@dataclass(frozen=True)
class Colorings:
    """Proper q-colorings of a graph: adjacent vertices get distinct colors."""

    graph: Graph
    q: int


@dataclass(frozen=True)
class Permutations:
    """Arrangements of particles 1..n: entry i is the particle in location i."""

    n: int


@dataclass(frozen=True)
class Potts:
    """Spin configurations with q states per vertex, no adjacency constraint."""

    graph: Graph
    q: int


def is_proper(graph: Graph, assignment) -> bool:
    return all(assignment[u - 1] != assignment[v - 1] for u, v in graph.edges)


class StateSpace:
    """An enumerated, indexed configuration space.

    Immutable after construction; `states[i]` and `index[state]` are inverse.
    """

    __slots__ = ("kind", "states", "index", "spec")

    def __init__(self, kind, states, spec: str = ""):
        self.kind = kind
        self.states = tuple(states)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.spec = spec

    @property
    def size(self) -> int:
        return len(self.states)

    def __len__(self):
        return len(self.states)

    def state_of(self, i: int):
        return self.states[i]

    def index_of(self, state) -> int:
        try:
            return self.index[tuple(state)]
        except KeyError:
            raise ValueError(f"state {tuple(state)} is not in this space") from None

    def __contains__(self, state):
        return tuple(state) in self.index

    def __eq__(self, other):
        return isinstance(other, StateSpace) and self.kind == other.kind

    def __hash__(self):
        return hash(self.kind)

    def __repr__(self):
        return f"StateSpace({self.kind!r}, {self.size} states)"


def _enumerate_colorings(graph: Graph, q: int, cap: int):
    """Backtracking enumeration of proper colorings in lexicographic order."""
    n = graph.vertex_count
    nbrs_below = [[u - 1 for u in graph.neighbors(v + 1) if u - 1 < v] for v in range(n)]
    out = []
    assignment = [0] * n

    def extend(v):
        if v == n:
            if len(out) >= cap:
                raise StateCapExceeded(
                    f"more than {cap} proper colorings; raise the cap to enumerate"
                )
            out.append(tuple(assignment))
            return
        for c in range(1, q + 1):
            if all(assignment[u] != c for u in nbrs_below[v]):
                assignment[v] = c
                extend(v + 1)
        assignment[v] = 0

    extend(0)
    return out


def _default_spec(kind) -> str:
    if isinstance(kind, Permutations):
        return f"perm:{kind.n}"
    graph_token = kind.graph.name or "?"
    prefix = "color" if isinstance(kind, Colorings) else "potts"
    return f"{prefix}:{graph_token}:q={kind.q}"


def enumerate_states(kind, cap: int = DEFAULT_STATE_CAP, spec: str = "") -> StateSpace:
    """Enumerate a configuration space in deterministic lexicographic order.

    Raises StateCapExceeded when the space would exceed `cap` states.
    """
    if isinstance(kind, Permutations):
        if kind.n < 1:
            raise ValueError("permutation size must be positive")
        total = math.factorial(kind.n)
        if total > cap:
            raise StateCapExceeded(f"{kind.n}! = {total} states exceeds cap {cap}")
        states = itertools.permutations(range(1, kind.n + 1))
    elif isinstance(kind, Potts):
        if kind.q < 1:
            raise ValueError("q must be positive")
        total = kind.q ** kind.graph.vertex_count
        if total > cap:
            raise StateCapExceeded(
                f"{kind.q}^{kind.graph.vertex_count} = {total} states exceeds cap {cap}"
            )
        states = itertools.product(range(1, kind.q + 1), repeat=kind.graph.vertex_count)
    elif isinstance(kind, Colorings):
        if kind.q < 1:
            raise ValueError("q must be positive")
        states = _enumerate_colorings(kind.graph, kind.q, cap)
    else:
        raise TypeError(f"unknown configuration kind {kind!r}")
    return StateSpace(kind, states, spec=spec or _default_spec(kind))


@dataclass(frozen=True)
class TriangleBijection:
    """Identification of 4-colorings of the triangle with arrangements of 1..4.

    A coloring (c1, c2, c3) maps to the arrangement (c1, c2, c3, m) where m
    is the color missing from the triangle.  Both directions are id-level
    lookup tables between the two lexicographic enumerations.
    """

    coloring_space: StateSpace
    perm_space: StateSpace
    coloring_to_perm: tuple  # coloring id -> permutation id
    perm_to_coloring: tuple  # permutation id -> coloring id

    def map_coloring(self, coloring):
        missing = 10 - sum(coloring)  # colors are three distinct values in 1..4
        return (*coloring, missing)

    def map_permutation(self, perm):
        return perm[:3]


def triangle_bijection(cap: int = DEFAULT_STATE_CAP) -> TriangleBijection:
    """Build the coloring/arrangement correspondence for the triangle, q=4."""
    col = enumerate_states(Colorings(triangle_graph(), 4), cap=cap)
    perm = enumerate_states(Permutations(4), cap=cap)
    fwd = []
    for c in col.states:
        fwd.append(perm.index_of((*c, 10 - sum(c))))
    inv = [0] * perm.size
    for cid, pid in enumerate(fwd):
        inv[pid] = cid
    return TriangleBijection(col, perm, tuple(fwd), tuple(inv))


# --- space specs ------------------------------------------------------------

def _resolve_graph(token: str) -> Graph:
    if token == "triangle":
        return triangle_graph()
    return read_graph_file(token)


def parse_space_spec(spec: str, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Parse a space spec: `perm:4`, `color:<graph>:q=4`, `potts:<graph>:q=4`.

    `<graph>` is either the builtin name `triangle` or a path to a graph file.
    """
    head, sep, rest = spec.partition(":")
    if not sep:
        raise ScheduleSyntaxError(f"bad space spec {spec!r}: missing ':'")
    if head == "perm":
        try:
            n = int(rest)
        except ValueError:
            raise ScheduleSyntaxError(f"bad space spec {spec!r}: perm wants an integer")
        return enumerate_states(Permutations(n), cap=cap, spec=spec)
    if head in ("color", "potts"):
        graph_token, sep2, qpart = rest.rpartition(":")
        if not sep2 or not qpart.startswith("q="):
            raise ScheduleSyntaxError(f"bad space spec {spec!r}: expected ...:q=<int>")
        try:
            q = int(qpart[2:])
        except ValueError:
            raise ScheduleSyntaxError(f"bad space spec {spec!r}: q must be an integer")
        graph = _resolve_graph(graph_token)
        kind = Colorings(graph, q) if head == "color" else Potts(graph, q)
        return enumerate_states(kind, cap=cap, spec=spec)
    raise ScheduleSyntaxError(f"bad space spec {spec!r}: unknown kind {head!r}")


def parse_initial_state(space: StateSpace, text: str):
    """Parse an `--initial` value: `identity`, `all:<spin>`, or `v1,v2,...`."""
    kind = space.kind
    if text == "identity":
        if not isinstance(kind, Permutations):
            raise ValueError("initial 'identity' only applies to permutation spaces")
        return tuple(range(1, kind.n + 1))
    if text.startswith("all:"):
        spin = int(text[4:])
        nv = kind.graph.vertex_count if isinstance(kind, (Potts, Colorings)) else kind.n
        state = (spin,) * nv
        if state not in space:
            raise ValueError(f"constant state {state} is not in this space")
        return state
    state = tuple(int(x) for x in text.split(","))
    space.index_of(state)  # raises if absent
    return state


def canonical_start(space: StateSpace):
    """Default initial state: identity, first proper coloring, or all ones."""
    kind = space.kind
    if isinstance(kind, Permutations):
        return tuple(range(1, kind.n + 1))
    if isinstance(kind, Colorings):
        if space.size == 0:
            raise ValueError("coloring space is empty; no canonical start")
        return space.states[0]
    return (1,) * kind.graph.vertex_count
