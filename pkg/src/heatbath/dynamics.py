"""Update kernels, the schedule DSL, and limits of repeated schedule blocks.

Kernels are materialized sparse row-stochastic operators acting on measures
by right multiplication.  Schedules are deterministic sequences of update
operations with repetition groups; applying one is a fold of sparse
vector-matrix products.  `block_limit` iterates a schedule block to its
limiting distribution and, where the block's structure allows, certifies the
exact limit without iterating.
"""
from __future__ import annotations

import itertools
import math
import re
from array import array
from dataclasses import dataclass
from fractions import Fraction

from . import backend
from .errors import ScheduleSyntaxError, SpaceMismatchError
from .measure import EXACT, FLOAT, Measure, _zeros, tv_distance
from .statespace import Colorings, Permutations, Potts, StateSpace

_F0 = Fraction(0)
_F1 = Fraction(1)
_HALF = Fraction(1, 2)


# --- update operations ------------------------------------------------------

@dataclass(frozen=True)
class Transpose:
    """Lazy swap of the entries at positions i and j (probability 1/2 each)."""

    i: int
    j: int

    def __str__(self):
        return f"t({self.i},{self.j})"


@dataclass(frozen=True)
class Recolor:
    """Heat-bath recoloring at vertex v: uniform over colors absent from the
    neighbors."""

    v: int

    def __str__(self):
        return f"k({self.v})"


@dataclass(frozen=True)
class BlockShuffle:
    """Uniformly permute the entries at a set of positions."""

    sites: tuple

    def __str__(self):
        return "b{" + ",".join(str(s) for s in self.sites) + "}"


@dataclass(frozen=True)
class SiteUpdate:
    """Potts heat-bath update at vertex v.

    Float mode carries a real coupling J; exact mode carries the rational
    weight w standing for e^(-J).
    """

    v: int
    coupling: str  # 'ferro' | 'antiferro'
    J: float | None = None
    w: Fraction | None = None

    def __str__(self):
        tag = "f" if self.coupling == "ferro" else "af"
        if self.w is not None:
            return f"p({self.v};w={self.w};{tag})"
        return f"p({self.v};J={self.J!r};{tag})"


@dataclass(frozen=True)
class Repeat:
    """A schedule block applied `count` times."""

    body: "Schedule"
    count: int


@dataclass(frozen=True)
class Schedule:
    """A sequence of update operations and repetition groups."""

    items: tuple

    def flatten(self) -> tuple:
        out = []
        for item in self.items:
            if isinstance(item, Repeat):
                out.extend(item.body.flatten() * item.count)
            else:
                out.append(item)
        return tuple(out)

    def __str__(self):
        return format_schedule(self)


def schedule_of(*ops) -> Schedule:
    return Schedule(tuple(ops))


def format_schedule(s: Schedule) -> str:
    """Canonical printed form: single spaces, no redundant brackets."""
    parts = []
    for item in s.items:
        if isinstance(item, Repeat):
            parts.append(f"[{format_schedule(item.body)}]^{item.count}")
        else:
            parts.append(str(item))
    return " ".join(parts)


# --- schedule parser --------------------------------------------------------

_RE_TRANSPOSE = re.compile(r"t\(\s*(\d+)\s*,\s*(\d+)\s*\)")
_RE_RECOLOR = re.compile(r"k\(\s*(\d+)\s*\)")
_RE_BLOCK = re.compile(r"b\{\s*(\d+(?:\s*,\s*\d+)*)\s*\}")
_RE_POTTS = re.compile(r"p\(\s*(\d+)\s*;\s*(J|w)=([^;()]+?)\s*;\s*(af|f)\s*\)")
_RE_COUNT = re.compile(r"\^\s*(\d+)")


def _parse_op(text: str, pos: int):
    m = _RE_TRANSPOSE.match(text, pos)
    if m:
        return Transpose(int(m.group(1)), int(m.group(2))), m.end()
    m = _RE_RECOLOR.match(text, pos)
    if m:
        return Recolor(int(m.group(1))), m.end()
    m = _RE_BLOCK.match(text, pos)
    if m:
        sites = tuple(int(x) for x in m.group(1).replace(" ", "").split(","))
        return BlockShuffle(sites), m.end()
    m = _RE_POTTS.match(text, pos)
    if m:
        v = int(m.group(1))
        coupling = "ferro" if m.group(4) == "f" else "antiferro"
        value = m.group(3).strip()
        if m.group(2) == "J":
            try:
                J = float(value)
            except ValueError:
                raise ScheduleSyntaxError(f"bad J value {value!r}", pos)
            return SiteUpdate(v, coupling, J=J), m.end()
        try:
            w = Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ScheduleSyntaxError(f"bad w value {value!r}", pos)
        if w < 0:
            raise ScheduleSyntaxError("w must be nonnegative", pos)
        return SiteUpdate(v, coupling, w=w), m.end()
    raise ScheduleSyntaxError(f"expected an operation at {text[pos:pos + 12]!r}", pos)


def _parse_items(text: str, pos: int, depth: int):
    items = []
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            if depth:
                raise ScheduleSyntaxError("unclosed '['", pos)
            return items, pos
        ch = text[pos]
        if ch == "[":
            body, pos = _parse_items(text, pos + 1, depth + 1)
            if not body:
                raise ScheduleSyntaxError("empty repetition group", pos)
            # closing bracket was consumed by the recursive call
            m = _RE_COUNT.match(text, pos)
            if not m:
                raise ScheduleSyntaxError("expected '^<count>' after ']'", pos)
            count = int(m.group(1))
            if count < 1:
                raise ScheduleSyntaxError("repetition count must be >= 1", pos)
            items.append(Repeat(Schedule(tuple(body)), count))
            pos = m.end()
        elif ch == "]":
            if not depth:
                raise ScheduleSyntaxError("unmatched ']'", pos)
            return items, pos + 1
        else:
            op, pos = _parse_op(text, pos)
            items.append(op)


def parse_schedule(text: str) -> Schedule:
    """Parse the schedule DSL.

    Grammar: a schedule is a whitespace-separated sequence of terms; a term
    is an op or `[<schedule>]^<count>`.  Ops: `t(i,j)` lazy transposition,
    `k(v)` recoloring, `b{v,...}` block shuffle, `p(v;J=<float>;af|f)` or
    `p(v;w=<rational>;af|f)` Potts site update.  An empty string parses to
    the empty schedule.
    """
    items, _ = _parse_items(text, 0, 0)
    return Schedule(tuple(items))


# --- kernels ----------------------------------------------------------------

class Kernel:
    """A sparse row-stochastic operator over a state space.

    `rows[i]` lists (target id, weight) pairs, sorted by target.  Float-mode
    kernels additionally carry CSR buffers for the compiled backend.
    """

    __slots__ = ("space", "mode", "label", "rows", "indptr", "indices", "data")

    def __init__(self, space: StateSpace, mode: str, label: str, rows):
        self.space = space
        self.mode = mode
        self.label = label
        self.rows = rows
        if mode == FLOAT:
            indptr = array("q", [0])
            indices = array("q")
            data = array("d")
            for row in rows:
                for j, w in row:
                    indices.append(j)
                    data.append(w)
                indptr.append(len(indices))
            self.indptr, self.indices, self.data = indptr, indices, data
        else:
            self.indptr = self.indices = self.data = None

    def row(self, i: int):
        return self.rows[i]

    def validate(self):
        """Check row stochasticity: nonnegative entries, unit row sums."""
        for i, row in enumerate(self.rows):
            if any(w < 0 for _, w in row):
                raise ValueError(f"negative weight in row {i}")
            total = sum(w for _, w in row)
            if self.mode == EXACT:
                if total != 1:
                    raise ValueError(f"row {i} sums to {total}, not 1")
            elif abs(total - 1.0) > 1e-12:
                raise ValueError(f"row {i} sums to {total!r}")
        return self

    def __repr__(self):
        return f"Kernel({self.label!r}, {self.space.size} states, {self.mode})"


def _finish_rows(raw_rows, mode):
    rows = []
    for entries in raw_rows:
        acc = {}
        for j, w in entries:
            acc[j] = acc.get(j, _F0) + w
        if mode == EXACT:
            rows.append(tuple(sorted(acc.items())))
        else:
            rows.append(tuple((j, float(w)) for j, w in sorted(acc.items())))
    return tuple(rows)


def transpose_kernel(space: StateSpace, i: int, j: int, mode: str = EXACT) -> Kernel:
    """Lazy transposition: swap entries at positions i and j with probability 1/2."""
    kind = space.kind
    if not isinstance(kind, Permutations):
        raise SpaceMismatchError("transpose_kernel needs a permutation space")
    if i == j:
        raise ValueError("transposition positions must differ")
    if not (1 <= i <= kind.n and 1 <= j <= kind.n):
        raise ValueError(f"positions out of range 1..{kind.n}")
    raw = []
    for s in space.states:
        t = list(s)
        t[i - 1], t[j - 1] = t[j - 1], t[i - 1]
        raw.append([(space.index[s], _HALF), (space.index[tuple(t)], _HALF)])
    return Kernel(space, mode, f"t({i},{j})", _finish_rows(raw, mode))


def recolor_kernel(space: StateSpace, v: int, mode: str = EXACT) -> Kernel:
    """Heat-bath recoloring at v: uniform over colors absent from v's neighbors."""
    kind = space.kind
    if not isinstance(kind, Colorings):
        raise SpaceMismatchError("recolor_kernel needs a coloring space")
    graph = kind.graph
    if not (1 <= v <= graph.vertex_count):
        raise ValueError(f"vertex {v} out of range 1..{graph.vertex_count}")
    nbrs = [u - 1 for u in graph.neighbors(v)]
    raw = []
    for s in space.states:
        seen = {s[u] for u in nbrs}
        absent = [c for c in range(1, kind.q + 1) if c not in seen]
        if not absent:
            raise ValueError(f"no color available at vertex {v} from state {s}")
        p = Fraction(1, len(absent))
        entries = []
        for c in absent:
            t = list(s)
            t[v - 1] = c
            entries.append((space.index[tuple(t)], p))
        raw.append(entries)
    return Kernel(space, mode, f"k({v})", _finish_rows(raw, mode))


def block_kernel(space: StateSpace, sites, mode: str = EXACT) -> Kernel:
    """Uniformly permute the entries at the given positions."""
    kind = space.kind
    if not isinstance(kind, Permutations):
        raise SpaceMismatchError("block_kernel needs a permutation space")
    sites = tuple(sorted(set(sites)))
    if not sites:
        raise ValueError("block must contain at least one position")
    if sites[0] < 1 or sites[-1] > kind.n:
        raise ValueError(f"block positions out of range 1..{kind.n}")
    p = Fraction(1, math.factorial(len(sites)))
    raw = []
    for s in space.states:
        vals = [s[x - 1] for x in sites]
        entries = []
        for arr in itertools.permutations(vals):
            t = list(s)
            for x, a in zip(sites, arr):
                t[x - 1] = a
            entries.append((space.index[tuple(t)], p))
        raw.append(entries)
    label = "b{" + ",".join(str(s) for s in sites) + "}"
    return Kernel(space, mode, label, _finish_rows(raw, mode))


def potts_kernel(
    space: StateSpace,
    v: int,
    coupling: str,
    J: float | None = None,
    w=None,
    mode: str = FLOAT,
) -> Kernel:
    """Potts heat-bath update at v: the conditional Gibbs law given the other spins.

    New spin a gets probability proportional to exp(sign*J*m(a)) where m(a)
    counts neighbors of v carrying spin a and sign is -1 (antiferro) or +1
    (ferro).  Exact mode parameterizes by rational w = e^(-J); antiferro w=0
    is the limiting kernel, uniform over spins absent from the neighbors.
    """
    kind = space.kind
    if not isinstance(kind, Potts):
        raise SpaceMismatchError("potts_kernel needs a Potts space")
    if coupling not in ("ferro", "antiferro"):
        raise ValueError(f"coupling must be 'ferro' or 'antiferro', got {coupling!r}")
    graph = kind.graph
    if not (1 <= v <= graph.vertex_count):
        raise ValueError(f"vertex {v} out of range 1..{graph.vertex_count}")
    nbrs = [u - 1 for u in graph.neighbors(v)]
    spins = range(1, kind.q + 1)
    if mode == EXACT:
        if w is None:
            raise ValueError("exact mode needs the rational weight w = e^(-J)")
        w = Fraction(w)
        if w < 0:
            raise ValueError("w must be nonnegative")
        if coupling == "ferro" and w == 0:
            raise ValueError("ferro coupling needs w > 0")
    elif J is None:
        raise ValueError("float mode needs J")
    sign = 1.0 if coupling == "ferro" else -1.0
    raw = []
    for s in space.states:
        counts = [sum(1 for u in nbrs if s[u] == a) for a in spins]
        if mode == EXACT:
            if coupling == "ferro":
                weights = [w ** (-c) for c in counts]
            else:
                weights = [w**c if c else _F1 for c in counts]
            total = sum(weights)
            if total == 0:
                raise ValueError(f"no admissible spin at vertex {v} from state {s}")
            weights = [x / total for x in weights]
        else:
            logs = [sign * J * c for c in counts]
            peak = max(logs)
            exps = [math.exp(x - peak) for x in logs]
            total = math.fsum(exps)
            weights = [x / total for x in exps]
        entries = []
        for a, p in zip(spins, weights):
            if p:
                t = list(s)
                t[v - 1] = a
                entries.append((space.index[tuple(t)], p))
        raw.append(entries)
    tag = "f" if coupling == "ferro" else "af"
    if mode == EXACT:
        label = f"p({v};w={w};{tag})"
    else:
        label = f"p({v};J={J!r};{tag})"
    return Kernel(space, mode, label, _finish_rows(raw, mode))


def kernel_for_op(space: StateSpace, op, mode: str = EXACT) -> Kernel:
    """Build the kernel realizing one schedule operation on a space."""
    if isinstance(op, Transpose):
        return transpose_kernel(space, op.i, op.j, mode)
    if isinstance(op, Recolor):
        return recolor_kernel(space, op.v, mode)
    if isinstance(op, BlockShuffle):
        return block_kernel(space, op.sites, mode)
    if isinstance(op, SiteUpdate):
        if mode == EXACT and op.w is None:
            raise ValueError(
                f"exact mode rejects {op}: use the w=<rational> form for Potts updates"
            )
        return potts_kernel(space, op.v, op.coupling, J=op.J, w=op.w, mode=mode)
    raise TypeError(f"unknown operation {op!r}")


class KernelCache:
    """Memoizes kernels per (space, mode); schedules reuse the same few ops."""

    def __init__(self, space: StateSpace, mode: str):
        self.space = space
        self.mode = mode
        self._built = {}

    def get(self, op) -> Kernel:
        k = self._built.get(op)
        if k is None:
            k = kernel_for_op(self.space, op, self.mode)
            self._built[op] = k
        return k


# --- applying kernels and schedules -----------------------------------------

def apply(m: Measure, kernel: Kernel) -> Measure:
    """Right action of a kernel on a measure: one sparse vector-matrix product."""
    if m.space != kernel.space:
        raise SpaceMismatchError("measure and kernel live on different spaces")
    if m.mode != kernel.mode:
        raise SpaceMismatchError(f"mixed scalar modes: {m.mode} vs {kernel.mode}")
    n = m.space.size
    if m.mode == EXACT:
        out = [_F0] * n
        rows = kernel.rows
        for i, p in enumerate(m.weights):
            if p:
                for j, w in rows[i]:
                    out[j] += p * w
    else:
        out = array("d", bytes(8 * n))
        backend.csr_apply(m.weights, kernel.indptr, kernel.indices, kernel.data, out)
    return Measure(m.space, m.mode, out, _checked=True)


def apply_schedule(m: Measure, schedule, cache: KernelCache | None = None) -> Measure:
    """Apply a schedule (or a plain op sequence) left to right."""
    ops = schedule.flatten() if isinstance(schedule, Schedule) else tuple(schedule)
    if cache is None:
        cache = KernelCache(m.space, m.mode)
    for op in ops:
        m = apply(m, cache.get(op))
    return m


def compose_kernels(kernels) -> Kernel:
    """Sparse product of kernels, applied left to right."""
    kernels = list(kernels)
    if not kernels:
        raise ValueError("nothing to compose")
    space, mode = kernels[0].space, kernels[0].mode
    for k in kernels[1:]:
        if k.space != space or k.mode != mode:
            raise SpaceMismatchError("cannot compose kernels across spaces or modes")
    one = _F1 if mode == EXACT else 1.0
    rows = [((i, one),) for i in range(space.size)]
    for k in kernels:
        new_rows = []
        for row in rows:
            acc = {}
            for mid, w in row:
                for j, w2 in k.rows[mid]:
                    x = w * w2
                    if j in acc:
                        acc[j] += x
                    else:
                        acc[j] = x
            new_rows.append(tuple(sorted(acc.items())))
        rows = new_rows
    label = " ".join(k.label for k in kernels)
    return Kernel(space, mode, label, tuple(rows))


def kernel_to_json_dict(k: Kernel) -> dict:
    from .measure import scalar_to_json

    return {
        "space": k.space.spec,
        "mode": k.mode,
        "label": k.label,
        "rows": [[[j, scalar_to_json(w, k.mode)] for j, w in row] for row in k.rows],
    }


# --- limits of repeated blocks ----------------------------------------------

@dataclass
class LimitResult:
    """Outcome of iterating a schedule block.

    `certified` means the limit was established structurally as an exact
    fixed point (uniform on closed communicating classes, weighted by the
    initial mass of each class), or, in exact mode, that an iterate
    reproduced itself exactly.
    """

    limit: Measure
    certified: bool
    iterations: int
    residual: object
    converged: bool
    classes: tuple | None = None

    def summary(self) -> dict:
        return {
            "certified": self.certified,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": float(self.residual),
            "classes": None if self.classes is None else len(self.classes),
        }


def _reachable(rows, start_ids):
    seen = set(start_ids)
    frontier = list(start_ids)
    while frontier:
        i = frontier.pop()
        for j, w in rows[i]:
            if w and j not in seen:
                seen.add(j)
                frontier.append(j)
    return seen


def _strongly_connected_components(nodes, rows):
    """Tarjan's algorithm (iterative) on the support graph restricted to nodes."""
    node_set = set(nodes)
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter([j for j, w in rows[root] if w and j in node_set]))]
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in index:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter([j for j, w in rows[child] if w and j in node_set])))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if not advanced:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[node])
                if low[node] == index[node]:
                    comp = []
                    while True:
                        x = stack.pop()
                        on_stack.discard(x)
                        comp.append(x)
                        if x == node:
                            break
                    out.append(tuple(sorted(comp)))
    return out


def _certify_limit(m: Measure, kernels) -> LimitResult | None:
    """Structural certificate: if every state reachable from the start lies in
    a closed, aperiodic, doubly stochastic communicating class of the composed
    block, the limit is the class-uniform mixture with the initial class
    masses.  Returns None when the certificate does not apply."""
    q = compose_kernels(kernels)
    rows = q.rows
    exact = m.mode == EXACT
    reach = _reachable(rows, m.support())
    comps = _strongly_connected_components(sorted(reach), rows)
    for comp in comps:
        members = set(comp)
        has_self = False
        col_sums = dict.fromkeys(comp, _F0 if exact else 0.0)
        for i in comp:
            for j, w in rows[i]:
                if not w:
                    continue
                if j not in members:
                    return None  # class is not closed: transient states present
                if j == i:
                    has_self = True
                col_sums[j] += w
        if not has_self:
            return None  # cannot conclude aperiodicity
        for j, total in col_sums.items():
            if exact:
                if total != 1:
                    return None
            elif abs(total - 1.0) > 1e-12:
                return None
    weights = _zeros(m.space.size, m.mode)
    for comp in comps:
        mass = sum(m.weights[i] for i in comp) if exact else math.fsum(
            m.weights[i] for i in comp
        )
        share = mass / len(comp)
        for i in comp:
            weights[i] = share
    limit = Measure(m.space, m.mode, weights, _checked=True)
    zero = _F0 if exact else 0.0
    return LimitResult(limit, True, 0, zero, True, classes=tuple(comps))


def block_limit(
    m: Measure,
    block,
    tol: float = 1e-12,
    max_iterations: int = 100_000,
    cache: KernelCache | None = None,
    certify_max_states: int = 4096,
) -> LimitResult:
    """Limit of m under repeated application of a schedule block.

    Attempts the structural certificate first (skipped above
    `certify_max_states` states, where composing the block gets expensive);
    otherwise iterates until the TV distance between successive iterates
    drops below `tol` or `max_iterations` is hit.  A non-converged result is
    returned with `converged=False` rather than raising.
    """
    ops = block.flatten() if isinstance(block, Schedule) else tuple(block)
    if not ops:
        raise ValueError("block schedule is empty")
    if cache is None:
        cache = KernelCache(m.space, m.mode)
    kernels = [cache.get(op) for op in ops]
    if m.space.size <= certify_max_states:
        certified = _certify_limit(m, kernels)
        if certified is not None:
            return certified
    exact = m.mode == EXACT
    tol_cmp = Fraction(tol) if exact else tol
    prev = m
    residual = None
    for it in range(1, max_iterations + 1):
        cur = prev
        for k in kernels:
            cur = apply(cur, k)
        residual = tv_distance(cur, prev)
        if exact and residual == 0:
            # the iterate is an exact fixed point of the block
            return LimitResult(cur, True, it, residual, True)
        if residual < tol_cmp:
            return LimitResult(cur, False, it, residual, True)
        prev = cur
    return LimitResult(prev, False, max_iterations, residual, False)
