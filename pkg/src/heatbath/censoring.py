"""Insertion experiments, verification reports, and violation search.

The central question: starting from a fixed configuration and applying a
deterministic sequence of heat-bath updates, can inserting one extra update
leave the resulting distribution *further* from stationarity?  For monotone
spin systems it cannot; the machinery here measures exactly when it does for
colorings, lazy transpositions and Potts updates.

`compare_insertion` runs a single experiment; the `verify_*` functions
reproduce the known worked examples as machine-checked reports; `search`
enumerates schedules and insertions looking for violations.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import SpaceMismatchError, StateCapExceeded
from .measure import (
    EXACT,
    FLOAT,
    Measure,
    conditional_uniform,
    event_probability,
    gibbs_measure,
    l2_distance,
    l2_sq_distance,
    point_measure,
    scalar_to_json,
    strictly_less,
    tv_distance,
    uniform_measure,
)
from .dynamics import (
    BlockShuffle,
    KernelCache,
    Recolor,
    Repeat,
    Schedule,
    SiteUpdate,
    Transpose,
    apply,
    apply_schedule,
    block_limit,
    format_schedule,
    parse_schedule,
    schedule_of,
)
from .statespace import (
    Colorings,
    Permutations,
    Potts,
    StateSpace,
    canonical_start,
    enumerate_states,
    triangle_bijection,
    triangle_graph,
)

_F0 = Fraction(0)


def entry_equals(position: int, value: int):
    """Predicate: the state's entry at a 1-based position equals `value`."""

    def pred(state):
        return state[position - 1] == value

    return pred


# --- single insertion experiments -------------------------------------------

@dataclass
class InsertionExperiment:
    """One censoring comparison: a base schedule versus the same schedule
    with one extra operation inserted after flattened position `insert_at`."""

    initial: Measure
    base: Schedule
    insert_at: int
    extra: object
    metric: str = "tv"
    target: Measure | None = None


@dataclass
class ExperimentResult:
    d_mu: object
    d_nu: object
    violation: bool
    mu: Measure
    nu: Measure

    def to_json_dict(self, experiment: InsertionExperiment) -> dict:
        mode = self.mu.mode
        return {
            "schedule": format_schedule(experiment.base),
            "insert_at": experiment.insert_at,
            "extra": str(experiment.extra),
            "mode": mode,
            "metric": experiment.metric,
            "d_mu": _distance_json(self.d_mu, mode, experiment.metric),
            "d_nu": _distance_json(self.d_nu, mode, experiment.metric),
            "violation": self.violation,
        }


def _distance_json(value, mode, metric):
    # exact l2 values are reported as floats (the square root is irrational)
    if mode == EXACT and metric == "tv":
        return scalar_to_json(value, EXACT)
    return float(value)


def _metric_pair(metric: str, a: Measure, b: Measure):
    """(display value, comparison key) for a distance.

    For l2 in exact mode the key is the exact squared distance so violation
    decisions stay rational; the display value is a float either way.
    """
    if metric == "tv":
        v = tv_distance(a, b)
        return v, v
    if metric == "l2":
        if a.mode == EXACT:
            return l2_distance(a, b), l2_sq_distance(a, b)
        v = l2_distance(a, b)
        return v, v
    raise ValueError(f"unknown metric {metric!r}; expected 'tv' or 'l2'")


def stationary_target(space: StateSpace, ops, mode: str) -> Measure:
    """Default comparison target: the measure the given update family fixes."""
    site_updates = [op for op in ops if isinstance(op, SiteUpdate)]
    if site_updates:
        params = {(op.coupling, op.J, op.w) for op in site_updates}
        if len(params) > 1:
            raise ValueError(
                "mixed Potts update parameters; pass an explicit target measure"
            )
        coupling, J, w = next(iter(params))
        return gibbs_measure(space, coupling, J=J, w=w, mode=mode)
    return uniform_measure(space, mode)


def compare_insertion(
    experiment: InsertionExperiment, cache: KernelCache | None = None
) -> ExperimentResult:
    """Evolve both schedules and compare distances to the target."""
    initial = experiment.initial
    ops = experiment.base.flatten()
    t = experiment.insert_at
    if not (0 <= t <= len(ops)):
        raise ValueError(f"insert position {t} outside 0..{len(ops)}")
    if cache is None:
        cache = KernelCache(initial.space, initial.mode)
    target = experiment.target
    if target is None:
        target = stationary_target(
            initial.space, ops + (experiment.extra,), initial.mode
        )
    mu = apply_schedule(initial, ops, cache)
    nu = apply_schedule(initial, ops[:t] + (experiment.extra,) + ops[t:], cache)
    d_mu, key_mu = _metric_pair(experiment.metric, mu, target)
    d_nu, key_nu = _metric_pair(experiment.metric, nu, target)
    violation = strictly_less(key_mu, key_nu, initial.mode)
    return ExperimentResult(d_mu, d_nu, violation, mu, nu)


# --- independent dense evaluation (exact-mode recheck) -----------------------

def _dense_matrix(space: StateSpace, op):
    """Dense transition matrix for one op, built directly from its definition.

    Deliberately separate from the sparse Kernel machinery: this is the
    slow, obviously-correct evaluation path used to recheck reported
    violations entry by entry.
    """
    n = space.size
    rows = [[_F0] * n for _ in range(n)]
    if isinstance(op, Transpose):
        for i, s in enumerate(space.states):
            t = list(s)
            t[op.i - 1], t[op.j - 1] = t[op.j - 1], t[op.i - 1]
            rows[i][i] += Fraction(1, 2)
            rows[i][space.index_of(tuple(t))] += Fraction(1, 2)
    elif isinstance(op, Recolor):
        kind = space.kind
        nbrs = kind.graph.neighbors(op.v)
        for i, s in enumerate(space.states):
            absent = [
                c
                for c in range(1, kind.q + 1)
                if all(s[u - 1] != c for u in nbrs)
            ]
            share = Fraction(1, len(absent))
            for c in absent:
                t = list(s)
                t[op.v - 1] = c
                rows[i][space.index_of(tuple(t))] += share
    elif isinstance(op, BlockShuffle):
        sites = sorted(set(op.sites))
        share = Fraction(1, math.factorial(len(sites)))
        for i, s in enumerate(space.states):
            for arr in itertools.permutations([s[x - 1] for x in sites]):
                t = list(s)
                for x, a in zip(sites, arr):
                    t[x - 1] = a
                rows[i][space.index_of(tuple(t))] += share
    elif isinstance(op, SiteUpdate):
        if op.w is None:
            raise ValueError("dense recheck is exact-mode only; needs the w form")
        kind = space.kind
        nbrs = kind.graph.neighbors(op.v)
        w = Fraction(op.w)
        for i, s in enumerate(space.states):
            raws = []
            for a in range(1, kind.q + 1):
                m = sum(1 for u in nbrs if s[u - 1] == a)
                if op.coupling == "ferro":
                    raws.append(w ** (-m))
                else:
                    raws.append(w**m if m else Fraction(1))
            total = sum(raws)
            for a, r in enumerate(raws, start=1):
                if r:
                    t = list(s)
                    t[op.v - 1] = a
                    rows[i][space.index_of(tuple(t))] += r / total
    else:
        raise TypeError(f"unknown operation {op!r}")
    return rows


def dense_recheck(experiment: InsertionExperiment):
    """Recompute (d_mu, d_nu) with dense exact matrix products.

    Returns the two distances as Fractions (tv) for bit-for-bit comparison
    against the sparse engine.  Exact mode and the tv metric only.
    """
    initial = experiment.initial
    if initial.mode != EXACT or experiment.metric != "tv":
        raise ValueError("dense recheck supports exact mode with the tv metric")
    space = initial.space
    ops = experiment.base.flatten()
    t = experiment.insert_at
    target = experiment.target
    if target is None:
        target = stationary_target(space, ops + (experiment.extra,), EXACT)

    def run(seq):
        vec = list(initial.weights)
        for op in seq:
            mat = _dense_matrix(space, op)
            nxt = [_F0] * space.size
            for i, p in enumerate(vec):
                if p:
                    row = mat[i]
                    for j in range(space.size):
                        if row[j]:
                            nxt[j] += p * row[j]
            vec = nxt
        return vec

    mu = run(ops)
    nu = run(ops[:t] + (experiment.extra,) + ops[t:])
    d_mu = sum(abs(x - y) for x, y in zip(mu, target.weights)) / 2
    d_nu = sum(abs(x - y) for x, y in zip(nu, target.weights)) / 2
    return d_mu, d_nu


# --- verification reports ----------------------------------------------------

def _new_report(name: str, **fields) -> dict:
    report = {"name": name, "checks": [], "ok": True}
    report.update(fields)
    return report


def _check(report: dict, name: str, passed, detail="") -> bool:
    passed = bool(passed)
    report["checks"].append({"check": name, "passed": passed, "detail": str(detail)})
    if not passed:
        report["ok"] = False
    return passed


def _close(a, b, mode, tol=1e-12):
    if mode == EXACT:
        return a == b
    return abs(a - b) <= tol


def _measures_equal(a: Measure, b: Measure, tol=1e-12) -> bool:
    if a.mode == EXACT:
        return list(a.weights) == list(b.weights)
    return tv_distance(a, b) <= tol


# the worked counterexample on arrangements of 4 particles: blocks of lazy
# transpositions around the two-step probe t(1,4) t(2,4)
_LEAD_BLOCK = (Transpose(2, 4), Transpose(3, 4))
_PROBE = (Transpose(1, 4), Transpose(2, 4))
_TAIL_BLOCK = (Transpose(1, 4), Transpose(3, 4))


def build_mn_schedule(M: int, N: int) -> Schedule:
    items = []
    if M:
        items.append(Repeat(Schedule(_LEAD_BLOCK), M))
    items.extend(_PROBE)
    if N:
        items.append(Repeat(Schedule(_TAIL_BLOCK), N))
    return Schedule(tuple(items))


def verify_perm_counterexample(M: int = 1, N: int = 1, mode: str = EXACT) -> dict:
    """Check the lazy-transposition insertion example on arrangements of 1..4.

    Establishes the certified limits of the flanking blocks, the exact 1/4
    and 1/8 marginals of the probed statistic, the uniformity of the entry
    in location 2, and reports finite-M,N distances for both schedules.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    space = enumerate_states(Permutations(4))
    cache = KernelCache(space, mode)
    delta = point_measure(space, (1, 2, 3, 4), mode)
    pi = uniform_measure(space, mode)
    report = _new_report("perm_counterexample", mode=mode, M=M, N=N)

    # flanking block limits
    lead = block_limit(delta, schedule_of(*_LEAD_BLOCK), cache=cache)
    pi1 = conditional_uniform(space, entry_equals(1, 1), mode)
    _check(report, "lead_block_certified", lead.certified, lead.summary())
    _check(
        report,
        "lead_block_limit_is_uniform_on_fixed_location_1",
        _measures_equal(lead.limit, pi1),
    )

    beta = apply_schedule(lead.limit, _PROBE, cache)
    p_quarter = event_probability(beta, entry_equals(2, 1))
    _check(
        report,
        "probe_puts_particle_1_in_location_2_with_probability_1_4",
        _close(p_quarter, Fraction(1, 4) if mode == EXACT else 0.25, mode),
        p_quarter,
    )
    uniform_ok = all(
        _close(
            event_probability(beta, entry_equals(2, k)),
            Fraction(1, 4) if mode == EXACT else 0.25,
            mode,
        )
        for k in (1, 2, 3, 4)
    )
    _check(report, "entry_in_location_2_exactly_uniform", uniform_ok)

    beta_ins = apply_schedule(
        lead.limit, (Transpose(1, 4), Transpose(3, 4), Transpose(2, 4)), cache
    )
    p_eighth = event_probability(beta_ins, entry_equals(2, 1))
    _check(
        report,
        "inserted_probe_probability_drops_to_1_8",
        _close(p_eighth, Fraction(1, 8) if mode == EXACT else 0.125, mode),
        p_eighth,
    )

    tail_mu = block_limit(beta, schedule_of(*_TAIL_BLOCK), cache=cache)
    _check(report, "tail_block_certified", tail_mu.certified, tail_mu.summary())
    _check(report, "uninserted_limit_is_stationary", _measures_equal(tail_mu.limit, pi))
    tail_nu = block_limit(beta_ins, schedule_of(*_TAIL_BLOCK), cache=cache)
    _check(report, "inserted_tail_block_certified", tail_nu.certified, tail_nu.summary())
    alpha = tail_nu.limit
    p_alpha = event_probability(alpha, entry_equals(2, 1))
    _check(
        report,
        "inserted_limit_statistic_is_1_8",
        _close(p_alpha, Fraction(1, 8) if mode == EXACT else 0.125, mode),
        p_alpha,
    )
    tv_alpha = tv_distance(alpha, pi)
    _check(
        report,
        "inserted_limit_at_least_1_8_from_stationary",
        tv_alpha >= (Fraction(1, 8) if mode == EXACT else 0.125 - 1e-12),
        tv_alpha,
    )
    report["certificates"] = {
        "lead_block": lead.summary(),
        "tail_block_uninserted": tail_mu.summary(),
        "tail_block_inserted": tail_nu.summary(),
    }

    # finite-M,N distances for both schedules
    base = build_mn_schedule(M, N)
    insert_at = 2 * M + 1  # directly after the first probe op
    experiment = InsertionExperiment(delta, base, insert_at, Transpose(3, 4), "tv", pi)
    result = compare_insertion(experiment, cache)
    report["experiment"] = result.to_json_dict(experiment)
    report["statistics"] = {
        "P(entry at location 2 = 1) under mu": scalar_to_json(
            event_probability(result.mu, entry_equals(2, 1)), mode
        ),
        "P(entry at location 2 = 1) under nu": scalar_to_json(
            event_probability(result.nu, entry_equals(2, 1)), mode
        ),
    }
    if mode == FLOAT and min(M, N) >= 30:
        _check(
            report,
            "finite_uninserted_within_1e6_of_stationary",
            result.d_mu <= 1e-6,
            result.d_mu,
        )
        _check(
            report,
            "finite_inserted_stays_at_least_0_12_away",
            result.d_nu >= 0.12,
            result.d_nu,
        )
    return report


def verify_coloring_counterexample(M: int = 1, N: int = 1, mode: str = EXACT) -> dict:
    """Run the recoloring version on the triangle and check step-by-step
    agreement with the permutation run under the color/arrangement bijection."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    bij = triangle_bijection()
    col_space, perm_space = bij.coloring_space, bij.perm_space
    col_cache = KernelCache(col_space, mode)
    perm_cache = KernelCache(perm_space, mode)
    report = _new_report("coloring_counterexample", mode=mode, M=M, N=N)

    perm_base = build_mn_schedule(M, N).flatten()
    insert_at = 2 * M + 1
    perm_nu = perm_base[:insert_at] + (Transpose(3, 4),) + perm_base[insert_at:]

    def to_recolor(ops):
        # t(i,4) acts on arrangements exactly as recoloring vertex i acts on
        # triangle colorings
        out = []
        for op in ops:
            if not (isinstance(op, Transpose) and op.j == 4):
                raise ValueError(f"{op} has no recoloring counterpart")
            out.append(Recolor(op.i))
        return tuple(out)

    runs = {
        "base": (perm_base, to_recolor(perm_base)),
        "inserted": (perm_nu, to_recolor(perm_nu)),
    }
    pi_perm = uniform_measure(perm_space, mode)
    pi_col = uniform_measure(col_space, mode)
    distances = {}
    steps_checked = 0
    for label, (perm_ops, col_ops) in runs.items():
        pm = point_measure(perm_space, (1, 2, 3, 4), mode)
        cm = point_measure(col_space, (1, 2, 3), mode)
        agree = True
        for step, (pop, cop) in enumerate(zip(perm_ops, col_ops), start=1):
            pm = apply(pm, perm_cache.get(pop))
            cm = apply(cm, col_cache.get(cop))
            pushed = Measure(
                perm_space,
                mode,
                _push_weights(cm, bij.coloring_to_perm, perm_space.size, mode),
                _checked=True,
            )
            if not _measures_equal(pushed, pm):
                agree = False
            steps_checked += 1
        _check(report, f"{label}_run_pushforward_agrees_at_every_step", agree)
        distances[label] = (tv_distance(cm, pi_col), tv_distance(pm, pi_perm))
        _check(
            report,
            f"{label}_run_distance_matches_permutation_run",
            _close(distances[label][0], distances[label][1], mode),
            distances[label][0],
        )
    col_violation = strictly_less(distances["base"][0], distances["inserted"][0], mode)
    perm_violation = strictly_less(distances["base"][1], distances["inserted"][1], mode)
    _check(
        report,
        "violation_flags_match",
        col_violation == perm_violation,
        {"coloring": col_violation, "permutation": perm_violation},
    )
    report["steps_checked"] = steps_checked
    report["violation"] = col_violation
    report["d_mu"] = scalar_to_json(distances["base"][0], mode)
    report["d_nu"] = scalar_to_json(distances["inserted"][0], mode)
    return report


def _push_weights(m: Measure, id_map, target_size, mode):
    from .measure import _zeros

    out = _zeros(target_size, mode)
    for i, p in enumerate(m.weights):
        if p:
            out[id_map[i]] += p
    return out


def verify_alternative_example(M: int = 1, mode: str = EXACT) -> dict:
    """The variant ending in t(1,3): the uninserted limit is exactly
    stationary, while inserting t(3,4) before the final op shifts the limit."""
    if M < 0:
        raise ValueError("M must be >= 0")
    space = enumerate_states(Permutations(4))
    cache = KernelCache(space, mode)
    delta = point_measure(space, (1, 2, 3, 4), mode)
    pi = uniform_measure(space, mode)
    report = _new_report("alternative_example", mode=mode, M=M)

    lead = block_limit(delta, schedule_of(*_LEAD_BLOCK), cache=cache)
    _check(report, "lead_block_certified", lead.certified, lead.summary())
    suffix = (Transpose(1, 4), Transpose(2, 4), Transpose(1, 3))
    uninserted = apply_schedule(lead.limit, suffix, cache)
    _check(report, "uninserted_limit_is_stationary", _measures_equal(uninserted, pi))
    inserted_suffix = suffix[:2] + (Transpose(3, 4),) + suffix[2:]
    inserted = apply_schedule(lead.limit, inserted_suffix, cache)
    tv_ins = tv_distance(inserted, pi)
    _check(report, "inserted_limit_differs_from_stationary", tv_ins > 0, tv_ins)
    witness = None
    for pos, val in itertools.product(range(1, 5), range(1, 5)):
        p = event_probability(inserted, entry_equals(pos, val))
        if not _close(p, Fraction(1, 4) if mode == EXACT else 0.25, mode, tol=1e-9):
            witness = {"position": pos, "value": val, "probability": scalar_to_json(p, mode)}
            break
    _check(report, "witness_event_found", witness is not None, witness)
    report["witness"] = witness
    report["tv_inserted_limit"] = scalar_to_json(tv_ins, mode)

    # finite-M sanity: evolve through the finite lead block instead
    lead_ops = _LEAD_BLOCK * M
    finite_mu = apply_schedule(delta, lead_ops + suffix, cache)
    finite_nu = apply_schedule(delta, lead_ops + inserted_suffix, cache)
    report["finite"] = {
        "M": M,
        "d_mu": scalar_to_json(tv_distance(finite_mu, pi), mode),
        "d_nu": scalar_to_json(tv_distance(finite_nu, pi), mode),
    }
    return report


def verify_block_example(mode: str = EXACT) -> dict:
    """Block updates remove the limits entirely: b{2,3,4} then the probe then
    b{1,3,4} lands exactly on the stationary measure; one inserted lazy swap
    moves the result a positive exact distance away."""
    space = enumerate_states(Permutations(4))
    cache = KernelCache(space, mode)
    delta = point_measure(space, (1, 2, 3, 4), mode)
    pi = uniform_measure(space, mode)
    pi1 = conditional_uniform(space, entry_equals(1, 1), mode)
    report = _new_report("block_example", mode=mode)

    first = apply(delta, cache.get(BlockShuffle((2, 3, 4))))
    _check(
        report,
        "first_block_lands_on_uniform_with_location_1_fixed",
        _measures_equal(first, pi1),
    )
    base = schedule_of(
        BlockShuffle((2, 3, 4)),
        Transpose(1, 4),
        Transpose(2, 4),
        BlockShuffle((1, 3, 4)),
    )
    experiment = InsertionExperiment(delta, base, 2, Transpose(3, 4), "tv", pi)
    result = compare_insertion(experiment, cache)
    _check(report, "uninserted_equals_stationary", _measures_equal(result.mu, pi))
    p_nu = event_probability(result.nu, entry_equals(2, 1))
    _check(
        report,
        "inserted_statistic_is_1_8",
        _close(p_nu, Fraction(1, 8) if mode == EXACT else 0.125, mode),
        p_nu,
    )
    _check(report, "insertion_is_a_violation", result.violation, result.d_nu)
    report["experiment"] = result.to_json_dict(experiment)
    return report


# --- Potts ------------------------------------------------------------------

def default_J_grid():
    return [k / 2 for k in range(21)]  # 0, 0.5, ..., 10


def _proper_slice_measure(space: StateSpace, mode: str) -> Measure:
    """Uniform over proper configurations whose first vertex carries spin 1."""
    graph = space.kind.graph

    def pred(s):
        if s[0] != 1:
            return False
        return all(s[u - 1] != s[v - 1] for u, v in graph.edges)

    return conditional_uniform(space, pred, mode)


def _row_as_state_dict(space: StateSpace, kernel, i: int) -> dict:
    return {space.states[j]: w for j, w in kernel.row(i)}


def potts_kernel_deviation(space, col_space, J=None, w=None, mode: str = FLOAT):
    """Max total variation between Potts site-update rows at proper states and
    the corresponding recoloring rows."""
    from .dynamics import potts_kernel, recolor_kernel

    graph = space.kind.graph
    worst = _F0 if mode == EXACT else 0.0
    for v in range(1, graph.vertex_count + 1):
        pk = potts_kernel(space, v, "antiferro", J=J, w=w, mode=mode)
        rk = recolor_kernel(col_space, v, mode)
        for ci, coloring in enumerate(col_space.states):
            prow = _row_as_state_dict(space, pk, space.index_of(coloring))
            crow = _row_as_state_dict(col_space, rk, ci)
            keys = set(prow) | set(crow)
            zero = _F0 if mode == EXACT else 0.0
            d = sum(abs(prow.get(k, zero) - crow.get(k, zero)) for k in keys) / 2
            if d > worst:
                worst = d
    return worst


def verify_potts_antiferro(
    J_grid=None, mode: str = FLOAT, w_grid=None
) -> dict:
    """Antiferromagnetic Potts on the triangle, q=4, across a coupling grid.

    (a) the site-update kernel approaches the recoloring kernel on proper
    states: the max row deviation must be monotone nonincreasing in J and
    vanish in the strong-coupling limit; (b) the single-block variant from
    the all-ones configuration: both schedules are compared against the
    Gibbs measure per grid point and the threshold above which every grid
    point violates is reported.
    """
    graph = triangle_graph()
    space = enumerate_states(Potts(graph, 4))
    col_space = enumerate_states(Colorings(graph, 4))
    if mode == EXACT:
        if w_grid is None:
            raise ValueError("exact mode needs w_grid (rationals, descending toward 0)")
        grid = [("w", Fraction(x)) for x in w_grid]
    else:
        grid = [("J", float(J)) for J in (J_grid if J_grid is not None else default_J_grid())]
    report = _new_report("potts_antiferro", mode=mode)
    start = point_measure(space, (1, 1, 1), mode)
    slice_target = _proper_slice_measure(space, mode)
    rows = []
    for kind, value in grid:
        J = value if kind == "J" else None
        w = value if kind == "w" else None
        dev = potts_kernel_deviation(space, col_space, J=J, w=w, mode=mode)
        cache = KernelCache(space, mode)

        def site(v):
            return SiteUpdate(v, "antiferro", J=J, w=w)

        base = schedule_of(site(2), site(3), site(1), site(2), site(1), site(3))
        target = gibbs_measure(space, "antiferro", J=J, w=w, mode=mode)
        experiment = InsertionExperiment(start, base, 1, site(1), "tv", target)
        result = compare_insertion(experiment, cache)
        half = apply_schedule(start, (site(2), site(3)), cache)
        eps = tv_distance(half, slice_target)
        rows.append(
            {
                ("w" if kind == "w" else "J"): str(value) if kind == "w" else value,
                "kernel_deviation": float(dev),
                "d_mu": _distance_json(result.d_mu, mode, "tv"),
                "d_nu": _distance_json(result.d_nu, mode, "tv"),
                "violation": result.violation,
                "slice_tv": float(eps),
                "_dev_cmp": dev,
                "_eps_cmp": eps,
            }
        )
    # grids are ordered by increasing coupling strength: ascending J, or
    # descending w in exact mode
    devs = [r.pop("_dev_cmp") for r in rows]
    epss = [r.pop("_eps_cmp") for r in rows]
    _check(
        report,
        "kernel_deviation_monotone_nonincreasing",
        all(b <= a for a, b in zip(devs, devs[1:])),
        [float(d) for d in devs],
    )
    if mode == EXACT:
        if any(v == 0 for _, v in grid):
            idx = next(i for i, (_, v) in enumerate(grid) if v == 0)
            _check(
                report,
                "deviation_exactly_zero_in_limit",
                devs[idx] == 0,
                devs[idx],
            )
    else:
        _check(
            report,
            "deviation_small_at_strongest_coupling",
            devs[-1] <= 1e-4,
            devs[-1],
        )
    _check(
        report,
        "slice_uniformization_monotone",
        all(b <= a + (0 if mode == EXACT else 1e-12) for a, b in zip(epss, epss[1:])),
        [float(e) for e in epss],
    )
    violations = [r["violation"] for r in rows]
    threshold = None
    for i in range(len(violations)):
        if all(violations[i:]):
            threshold = i
            break
    _check(
        report,
        "violating_tail_above_finite_threshold",
        threshold is not None and threshold < len(rows),
        None if threshold is None else rows[threshold].get("J", rows[threshold].get("w")),
    )
    report["rows"] = rows
    report["threshold_index"] = threshold
    return report


VERIFICATIONS = {
    "perm": verify_perm_counterexample,
    "coloring": verify_coloring_counterexample,
    "alternative": verify_alternative_example,
    "block": verify_block_example,
    "potts": verify_potts_antiferro,
}


def verify_mn1(mode: str = EXACT) -> dict:
    """The smallest strict violation: M=N=1 with one extra lazy swap.

    The canonical mid-schedule insertion ties exactly at M=N=1, so the
    strict witness inserts t(1,4) directly after the first op.  Both
    distance pairs are rechecked against the independent dense evaluation
    and must match bit for bit.
    """
    if mode != EXACT:
        raise ValueError("the M=N=1 verification is exact-mode only")
    space = enumerate_states(Permutations(4))
    cache = KernelCache(space, mode)
    delta = point_measure(space, (1, 2, 3, 4), mode)
    pi = uniform_measure(space, mode)
    report = _new_report("mn1", mode=mode)
    base = build_mn_schedule(1, 1)

    canonical = InsertionExperiment(delta, base, 3, Transpose(3, 4), "tv", pi)
    canon_result = compare_insertion(canonical, cache)
    canon_dense = dense_recheck(canonical)
    _check(
        report,
        "canonical_insertion_matches_dense_recheck",
        (canon_result.d_mu, canon_result.d_nu) == canon_dense,
        {"engine": str(canon_result.d_mu), "dense": str(canon_dense[0])},
    )
    _check(
        report,
        "canonical_insertion_ties_exactly",
        canon_result.d_mu == canon_result.d_nu and not canon_result.violation,
        f"{canon_result.d_mu} == {canon_result.d_nu}",
    )

    witness = InsertionExperiment(delta, base, 1, Transpose(1, 4), "tv", pi)
    wit_result = compare_insertion(witness, cache)
    wit_dense = dense_recheck(witness)
    _check(
        report,
        "witness_matches_dense_recheck",
        (wit_result.d_mu, wit_result.d_nu) == wit_dense,
        {"engine": (str(wit_result.d_mu), str(wit_result.d_nu))},
    )
    _check(
        report,
        "witness_is_a_strict_violation",
        wit_result.violation and wit_result.d_mu < wit_result.d_nu,
        f"{wit_result.d_mu} < {wit_result.d_nu}",
    )
    report["canonical"] = canon_result.to_json_dict(canonical)
    report["witness"] = wit_result.to_json_dict(witness)
    return report


# --- exhaustive search --------------------------------------------------------

@dataclass
class SearchConfig:
    """Exhaustive enumeration of base schedules, insertion points and extras."""

    space: StateSpace
    family: tuple
    max_len: int
    initial: Measure | None = None
    metric: str = "tv"
    mode: str = EXACT
    target: Measure | None = None
    stop_at_first: bool = False
    record_all: bool = False
    max_candidates: int = 1_000_000
    workers: int = 1
    recheck: bool = True


@dataclass
class Violation:
    index: int
    base: str
    insert_at: int
    extra: str
    d_mu: object
    d_nu: object

    def to_json_dict(self, mode: str, metric: str) -> dict:
        return {
            "index": self.index,
            "base": self.base,
            "insert_at": self.insert_at,
            "extra": self.extra,
            "d_mu": _distance_json(self.d_mu, mode, metric),
            "d_nu": _distance_json(self.d_nu, mode, metric),
        }


@dataclass
class SearchReport:
    candidates: int
    violations: list
    runtime_seconds: float
    results: list | None = None

    def summary(self, cfg: SearchConfig) -> dict:
        return {
            "candidates": self.candidates,
            "violations": len(self.violations),
            "runtime_seconds": round(self.runtime_seconds, 3),
            "mode": cfg.mode,
            "metric": cfg.metric,
            "max_len": cfg.max_len,
            "family": [str(op) for op in cfg.family],
        }


def candidate_count(family_size: int, max_len: int) -> int:
    total = 0
    for L in range(1, max_len + 1):
        total += (family_size**L) * (L + 1) * family_size
    return total


def _search_bases(cfg: SearchConfig):
    for L in range(1, cfg.max_len + 1):
        for combo in itertools.product(cfg.family, repeat=L):
            yield combo


def _scan_base(cfg, combo, cache, initial, target, index0, emit):
    """All insertions into one base schedule; prefix measures are shared."""
    prefixes = [initial]
    m = initial
    for op in combo:
        m = apply(m, cache.get(op))
        prefixes.append(m)
    mu = prefixes[-1]
    d_mu, key_mu = _metric_pair(cfg.metric, mu, target)
    index = index0
    found = []
    for t in range(len(combo) + 1):
        for extra in cfg.family:
            nu = apply(prefixes[t], cache.get(extra))
            for op in combo[t:]:
                nu = apply(nu, cache.get(op))
            d_nu, key_nu = _metric_pair(cfg.metric, nu, target)
            violating = strictly_less(key_mu, key_nu, cfg.mode)
            if emit is not None:
                emit(combo, t, extra, d_mu, d_nu, violating)
            if violating:
                found.append(
                    Violation(
                        index,
                        format_schedule(Schedule(combo)),
                        t,
                        str(extra),
                        d_mu,
                        d_nu,
                    )
                )
                if cfg.stop_at_first:
                    return found, index - index0 + 1
            index += 1
    return found, index - index0


def _search_chunk(args):
    cfg, combos, start_index = args
    cache = KernelCache(cfg.space, cfg.mode)
    initial = cfg.initial or point_measure(cfg.space, canonical_start(cfg.space), cfg.mode)
    target = cfg.target or stationary_target(
        cfg.space, tuple(cfg.family), cfg.mode
    )
    violations = []
    index = start_index
    for combo in combos:
        found, scanned = _scan_base(cfg, combo, cache, initial, target, index, None)
        violations.extend(found)
        index += (len(combo) + 1) * len(cfg.family)
    return violations


def search(cfg: SearchConfig, on_violation=None) -> SearchReport:
    """Enumerate (base schedule, insertion point, extra op) candidates.

    Deterministic: candidates are ordered by base length, then
    lexicographically by family index, then by insertion point, then by
    extra.  `on_violation` is called as each violation is found (sequential
    runs only).  Exact-mode violations are rechecked against the dense
    evaluation when `cfg.recheck` is set.
    """
    total = candidate_count(len(cfg.family), cfg.max_len)
    if total > cfg.max_candidates:
        raise StateCapExceeded(
            f"{total} candidates exceed the cap {cfg.max_candidates}"
        )
    if not cfg.family:
        raise ValueError("empty op family")
    start = time.perf_counter()
    initial = cfg.initial or point_measure(cfg.space, canonical_start(cfg.space), cfg.mode)
    target = cfg.target or stationary_target(cfg.space, tuple(cfg.family), cfg.mode)
    violations = []
    results = [] if cfg.record_all else None
    candidates = 0

    if cfg.workers > 1 and not cfg.stop_at_first and not cfg.record_all:
        from concurrent.futures import ProcessPoolExecutor

        combos = list(_search_bases(cfg))
        chunk_size = max(1, len(combos) // (cfg.workers * 4))
        chunks = []
        idx = 0
        for i in range(0, len(combos), chunk_size):
            part = combos[i : i + chunk_size]
            chunks.append((cfg, part, idx))
            idx += sum((len(c) + 1) * len(cfg.family) for c in part)
        candidates = idx
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for found in pool.map(_search_chunk, chunks):
                violations.extend(found)
    else:
        cache = KernelCache(cfg.space, cfg.mode)

        def emit(combo, t, extra, d_mu, d_nu, violating):
            if results is not None:
                results.append(
                    {
                        "base": format_schedule(Schedule(combo)),
                        "insert_at": t,
                        "extra": str(extra),
                        "d_mu": _distance_json(d_mu, cfg.mode, cfg.metric),
                        "d_nu": _distance_json(d_nu, cfg.mode, cfg.metric),
                        "violation": violating,
                    }
                )

        index = 0
        stop = False
        for combo in _search_bases(cfg):
            found, scanned = _scan_base(cfg, combo, cache, initial, target, index, emit)
            candidates += scanned
            index += (len(combo) + 1) * len(cfg.family)
            for v in found:
                violations.append(v)
                if on_violation is not None:
                    on_violation(v)
            if cfg.stop_at_first and found:
                stop = True
                break
        if not stop:
            candidates = total

    if cfg.recheck and cfg.mode == EXACT and cfg.metric == "tv":
        for v in violations:
            exp = InsertionExperiment(
                initial,
                parse_schedule(v.base),
                v.insert_at,
                parse_schedule(v.extra).items[0],
                cfg.metric,
                target,
            )
            dense = dense_recheck(exp)
            if dense != (v.d_mu, v.d_nu):
                raise AssertionError(
                    f"dense recheck mismatch for candidate {v.index}: "
                    f"{dense} vs {(v.d_mu, v.d_nu)}"
                )
    return SearchReport(candidates, violations, time.perf_counter() - start, results)


# --- op families ---------------------------------------------------------------

def expand_family(space: StateSpace, pattern: str) -> tuple:
    """Expand a family pattern into concrete ops.

    Patterns are comma-separated op templates where a position may be `*`:
    `t(*,4)`, `t(*,*)`, `k(*)`, `p(*;J=2;f)`, `p(*;w=1/10;af)`.  A template
    without wildcards is taken literally.
    """
    kind = space.kind
    ops = []
    for part in _split_family(pattern):
        part = part.strip()
        if "*" not in part:
            sched = parse_schedule(part)
            if len(sched.items) != 1 or isinstance(sched.items[0], Schedule):
                raise ValueError(f"family element {part!r} must be a single op")
            ops.append(sched.items[0])
            continue
        if part.startswith("t("):
            if not isinstance(kind, Permutations):
                raise SpaceMismatchError("t(...) family needs a permutation space")
            body = part[2:-1]
            a, b = [x.strip() for x in body.split(",")]
            rng = range(1, kind.n + 1)
            for i in rng if a == "*" else [int(a)]:
                for j in rng if b == "*" else [int(b)]:
                    if i < j:
                        ops.append(Transpose(i, j))
                    elif i > j and (a == "*") != (b == "*"):
                        # single wildcard: keep the written orientation
                        ops.append(Transpose(j, i))
        elif part.startswith("k("):
            if not isinstance(kind, Colorings):
                raise SpaceMismatchError("k(...) family needs a coloring space")
            for v in range(1, kind.graph.vertex_count + 1):
                ops.append(Recolor(v))
        elif part.startswith("p("):
            if not isinstance(kind, Potts):
                raise SpaceMismatchError("p(...) family needs a Potts space")
            probe = parse_schedule(part.replace("*", "1", 1))
            op = probe.items[0]
            for v in range(1, kind.graph.vertex_count + 1):
                ops.append(SiteUpdate(v, op.coupling, J=op.J, w=op.w))
        else:
            raise ValueError(f"cannot expand family pattern {part!r}")
    seen = set()
    unique = []
    for op in ops:
        if op not in seen:
            seen.add(op)
            unique.append(op)
    return tuple(unique)


def _split_family(pattern: str):
    # split on commas that are not inside parentheses or braces
    parts = []
    depth = 0
    cur = []
    for ch in pattern:
        if ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return parts
