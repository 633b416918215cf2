"""Probability measures over a StateSpace with exact and float backends.

A measure is a weight per state id.  In exact mode the weights are
`fractions.Fraction` values summing to exactly 1, which lets tests assert
claims like "probability 1/4" with zero tolerance.  In float mode the
weights live in a stdlib `array('d')` buffer so the hot loops can run
through the compiled backend.  The mode is fixed per run and never mixed.
"""
from __future__ import annotations

import json
import math
from array import array
from fractions import Fraction

from . import backend
from .errors import SpaceMismatchError
from .statespace import Potts, StateSpace, parse_space_spec

EXACT = "exact"
FLOAT = "float"

#: strict float comparisons use this margin: x < y means x + MARGIN < y,
#: so rounding noise cannot manufacture a violation.
FLOAT_MARGIN = 1e-9

_SUM_TOL = 1e-12

_F0 = Fraction(0)
_F1 = Fraction(1)


def _zeros(n: int, mode: str):
    if mode == EXACT:
        return [_F0] * n
    return array("d", bytes(8 * n))


class Measure:
    """An immutable probability vector over a state space."""

    __slots__ = ("space", "mode", "weights")

    def __init__(self, space: StateSpace, mode: str, weights, _checked=False):
        if mode not in (EXACT, FLOAT):
            raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
        if mode == FLOAT and not isinstance(weights, array):
            weights = array("d", weights)
        if not _checked:
            if len(weights) != space.size:
                raise ValueError("weight vector length does not match the space")
            if mode == EXACT:
                if any(w < 0 for w in weights):
                    raise ValueError("negative weight")
                if sum(weights) != 1:
                    raise ValueError("exact weights must sum to exactly 1")
            else:
                if any(w < 0.0 for w in weights):
                    raise ValueError("negative weight")
                if abs(math.fsum(weights) - 1.0) > _SUM_TOL:
                    raise ValueError("float weights must sum to 1 within 1e-12")
        self.space = space
        self.mode = mode
        self.weights = weights if mode == EXACT else weights

    def __eq__(self, other):
        if not isinstance(other, Measure):
            return NotImplemented
        return (
            self.space == other.space
            and self.mode == other.mode
            and list(self.weights) == list(other.weights)
        )

    def __hash__(self):
        return hash((self.space, self.mode, tuple(self.weights)))

    def weight_of(self, state):
        return self.weights[self.space.index_of(state)]

    def support(self):
        """Ids of states with nonzero weight."""
        return [i for i, w in enumerate(self.weights) if w != 0]

    def __repr__(self):
        nz = len(self.support())
        return f"Measure({self.space.spec or self.space.kind}, {self.mode}, {nz} nonzero)"


def check_compatible(a: Measure, b: Measure):
    if a.space != b.space:
        raise SpaceMismatchError("measures live on different state spaces")
    if a.mode != b.mode:
        raise SpaceMismatchError(f"mixed scalar modes: {a.mode} vs {b.mode}")


# --- constructors -----------------------------------------------------------

def point_measure(space: StateSpace, state, mode: str = EXACT) -> Measure:
    """Unit mass at one state."""
    i = space.index_of(state)
    w = _zeros(space.size, mode)
    w[i] = _F1 if mode == EXACT else 1.0
    return Measure(space, mode, w, _checked=True)


def uniform_measure(space: StateSpace, mode: str = EXACT) -> Measure:
    """Equal weight on every state."""
    if space.size == 0:
        raise ValueError("cannot build the uniform measure on an empty space")
    if mode == EXACT:
        w = [Fraction(1, space.size)] * space.size
    else:
        w = array("d", [1.0 / space.size] * space.size)
    return Measure(space, mode, w, _checked=True)


def conditional_uniform(space: StateSpace, predicate, mode: str = EXACT) -> Measure:
    """Uniform on the states satisfying `predicate`, zero elsewhere."""
    hits = [i for i, s in enumerate(space.states) if predicate(s)]
    if not hits:
        raise ValueError("predicate admits no state")
    w = _zeros(space.size, mode)
    if mode == EXACT:
        p = Fraction(1, len(hits))
    else:
        p = 1.0 / len(hits)
    for i in hits:
        w[i] = p
    return Measure(space, mode, w, _checked=True)


def monochromatic_edge_count(graph, assignment) -> int:
    """Number of edges whose endpoints carry the same value."""
    return sum(1 for u, v in graph.edges if assignment[u - 1] == assignment[v - 1])


def gibbs_measure(
    space: StateSpace,
    coupling: str,
    J: float | None = None,
    w=None,
    mode: str = FLOAT,
) -> Measure:
    """Gibbs measure for a Potts space: weight(s) proportional to exp(sign*J*H(s)).

    H counts monochromatic edges; sign is -1 for antiferro and +1 for ferro.
    Float mode takes a real J (evaluated via log-weights with max
    subtraction).  Exact mode takes a rational w standing for e^(-J), so the
    weight is w^H (antiferro) or w^-H (ferro); antiferro w=0 is the
    J-to-infinity limit, uniform on proper configurations.
    """
    kind = space.kind
    if not isinstance(kind, Potts):
        raise SpaceMismatchError("gibbs_measure needs a Potts space")
    if coupling not in ("ferro", "antiferro"):
        raise ValueError(f"coupling must be 'ferro' or 'antiferro', got {coupling!r}")
    counts = [monochromatic_edge_count(kind.graph, s) for s in space.states]
    if mode == EXACT:
        if w is None:
            raise ValueError("exact mode needs the rational weight w = e^(-J)")
        w = Fraction(w)
        if w < 0:
            raise ValueError("w must be nonnegative")
        if coupling == "ferro":
            if w == 0:
                raise ValueError("ferro coupling needs w > 0")
            raw = [w ** (-h) for h in counts]
        else:
            raw = [w**h if h else _F1 for h in counts]
        total = sum(raw)
        if total == 0:
            raise ValueError("all Gibbs weights vanish (no admissible configuration)")
        weights = [x / total for x in raw]
    else:
        if J is None:
            raise ValueError("float mode needs J")
        sign = 1.0 if coupling == "ferro" else -1.0
        logs = [sign * J * h for h in counts]
        peak = max(logs)
        raw = [math.exp(x - peak) for x in logs]
        total = math.fsum(raw)
        weights = array("d", [x / total for x in raw])
    return Measure(space, mode, weights, _checked=True)


# --- functionals ------------------------------------------------------------

def tv_distance(a: Measure, b: Measure):
    """Total variation distance: half the L1 distance between weight vectors."""
    check_compatible(a, b)
    if a.mode == EXACT:
        return sum(abs(x - y) for x, y in zip(a.weights, b.weights)) / 2
    return backend.l1_diff(a.weights, b.weights) / 2.0


def l2_sq_distance(a: Measure, b: Measure):
    """Squared Euclidean distance; exact in exact mode (used for comparisons)."""
    check_compatible(a, b)
    if a.mode == EXACT:
        return sum((x - y) ** 2 for x, y in zip(a.weights, b.weights))
    return backend.sq_l2_diff(a.weights, b.weights)


def l2_distance(a: Measure, b: Measure) -> float:
    """Euclidean distance between weight vectors.

    Returned as a float in both modes (the exact square root is usually
    irrational); exact-mode violation decisions compare l2_sq_distance
    instead, which stays rational.
    """
    return math.sqrt(l2_sq_distance(a, b))


def event_probability(m: Measure, predicate):
    """Total weight of the states satisfying `predicate`."""
    if m.mode == EXACT:
        return sum(w for s, w in zip(m.space.states, m.weights) if predicate(s))
    return math.fsum(w for s, w in zip(m.space.states, m.weights) if predicate(s))


def strictly_less(x, y, mode: str) -> bool:
    """Mode-aware strict comparison; float mode applies the safety margin."""
    if mode == EXACT:
        return x < y
    return x + FLOAT_MARGIN < y


def pushforward(m: Measure, target: StateSpace, id_map) -> Measure:
    """Transport a measure along a state-id mapping (id_map[i] in target)."""
    w = _zeros(target.size, m.mode)
    for i, p in enumerate(m.weights):
        if p:
            w[id_map[i]] += p
    return Measure(target, m.mode, w, _checked=True)


# --- serialization ----------------------------------------------------------

def scalar_to_json(x, mode: str):
    if mode == EXACT:
        f = Fraction(x)
        return f"{f.numerator}/{f.denominator}"
    return float(x)


def scalar_from_json(v, mode: str):
    if mode == EXACT:
        return Fraction(v)
    return float(v)


def measure_to_json_dict(m: Measure) -> dict:
    if not m.space.spec or "?" in m.space.spec:
        raise ValueError("space has no serializable spec; build it from a spec string")
    entries = []
    for i, w in enumerate(m.weights):
        if w:
            entries.append({"state": list(m.space.states[i]), "p": scalar_to_json(w, m.mode)})
    return {"space": m.space.spec, "mode": m.mode, "weights": entries}


def measure_to_json(m: Measure) -> str:
    return json.dumps(measure_to_json_dict(m), separators=(", ", ": "))


def measure_from_json_dict(d: dict, space: StateSpace | None = None) -> Measure:
    if space is None:
        space = parse_space_spec(d["space"])
    mode = d["mode"]
    w = _zeros(space.size, mode)
    for entry in d["weights"]:
        w[space.index_of(tuple(entry["state"]))] = scalar_from_json(entry["p"], mode)
    return Measure(space, mode, w)


def measure_from_json(text: str, space: StateSpace | None = None) -> Measure:
    return measure_from_json_dict(json.loads(text), space=space)
