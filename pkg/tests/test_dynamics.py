import itertools
import math
from fractions import Fraction

import pytest

from heatbath.dynamics import (
    BlockShuffle,
    KernelCache,
    Recolor,
    SiteUpdate,
    Transpose,
    apply,
    apply_schedule,
    block_kernel,
    block_limit,
    compose_kernels,
    kernel_for_op,
    kernel_to_json_dict,
    parse_schedule,
    potts_kernel,
    recolor_kernel,
    schedule_of,
    transpose_kernel,
)
from heatbath.errors import SpaceMismatchError
from heatbath.measure import (
    conditional_uniform,
    event_probability,
    gibbs_measure,
    point_measure,
    tv_distance,
    uniform_measure,
)
from heatbath.statespace import (
    Colorings,
    Permutations,
    Potts,
    build_graph,
    enumerate_states,
    triangle_bijection,
    triangle_graph,
)

PERM4 = enumerate_states(Permutations(4))
COL4 = enumerate_states(Colorings(triangle_graph(), 4))
POTTS4 = enumerate_states(Potts(triangle_graph(), 4))
IDENTITY = (1, 2, 3, 4)
HALF = Fraction(1, 2)


def row_dict(kernel, space, state):
    return {space.states[j]: w for j, w in kernel.row(space.index_of(state))}


def as_matrix(kernel):
    n = kernel.space.size
    mat = [[Fraction(0)] * n for _ in range(n)]
    for i, row in enumerate(kernel.rows):
        for j, w in row:
            mat[i][j] = w
    return mat


# --- transpose kernels --------------------------------------------------------

def test_transpose_kernel_row():
    k = transpose_kernel(PERM4, 1, 2)
    assert row_dict(k, PERM4, IDENTITY) == {IDENTITY: HALF, (2, 1, 3, 4): HALF}
    k.validate()


def test_transpose_kernel_symmetric_doubly_stochastic():
    for i, j in [(1, 2), (1, 4), (3, 4)]:
        mat = as_matrix(transpose_kernel(PERM4, i, j))
        n = len(mat)
        for a in range(n):
            assert sum(mat[a]) == 1
            assert sum(mat[b][a] for b in range(n)) == 1
            for b in range(n):
                assert mat[a][b] == mat[b][a]


def test_transpose_squared_fixes_uniform():
    k = transpose_kernel(PERM4, 1, 4)
    squared = compose_kernels([k, k])
    pi = uniform_measure(PERM4)
    assert apply(pi, squared) == pi


def test_transpose_kernel_errors():
    with pytest.raises(ValueError):
        transpose_kernel(PERM4, 2, 2)
    with pytest.raises(ValueError):
        transpose_kernel(PERM4, 0, 4)
    with pytest.raises(SpaceMismatchError):
        transpose_kernel(COL4, 1, 2)


# --- recolor kernels ------------------------------------------------------------

def test_recolor_kernel_rows():
    k = recolor_kernel(COL4, 1)
    assert row_dict(k, COL4, (1, 2, 3)) == {(1, 2, 3): HALF, (4, 2, 3): HALF}
    # triangle with q=4: two neighbor colors are always blocked, so every row
    # has exactly two entries of weight 1/2
    for row in k.rows:
        assert len(row) == 2 and all(w == HALF for _, w in row)


def test_recolor_kernel_path_two_colors():
    space = enumerate_states(Colorings(build_graph(2, [(1, 2)]), 2))
    k = recolor_kernel(space, 1)
    assert row_dict(k, space, (1, 2)) == {(1, 2): Fraction(1)}


def test_recolor_kernel_symmetric():
    for v in (1, 2, 3):
        mat = as_matrix(recolor_kernel(COL4, v))
        for a in range(24):
            for b in range(24):
                assert mat[a][b] == mat[b][a]


def test_recolor_kernel_errors():
    with pytest.raises(ValueError):
        recolor_kernel(COL4, 5)
    with pytest.raises(SpaceMismatchError):
        recolor_kernel(PERM4, 1)


# --- block kernels ---------------------------------------------------------------

def test_block_full_set_uniformizes():
    delta = point_measure(PERM4, IDENTITY)
    out = apply(delta, block_kernel(PERM4, (1, 2, 3, 4)))
    assert out == uniform_measure(PERM4)


def test_block_singleton_is_identity():
    k = block_kernel(PERM4, (2,))
    for i, row in enumerate(k.rows):
        assert row == ((i, Fraction(1)),)


def test_block_234_from_identity_fixes_location_one():
    delta = point_measure(PERM4, IDENTITY)
    out = apply(delta, block_kernel(PERM4, (2, 3, 4)))
    assert out == conditional_uniform(PERM4, lambda s: s[0] == 1)


def test_block_kernel_errors():
    with pytest.raises(ValueError):
        block_kernel(PERM4, ())
    with pytest.raises(ValueError):
        block_kernel(PERM4, (0, 2))


# --- Potts kernels -----------------------------------------------------------------

def test_potts_row_matches_conditional_gibbs():
    # oracle: condition the Gibbs measure on the spins away from v
    J = 1.7
    k = potts_kernel(POTTS4, 2, "antiferro", J=J, mode="float")
    g = gibbs_measure(POTTS4, "antiferro", J=J, mode="float")
    state = (1, 1, 1)
    row = {POTTS4.states[j]: w for j, w in k.row(POTTS4.index_of(state))}
    compat = [(1, a, 1) for a in range(1, 5)]
    z = math.fsum(g.weight_of(s) for s in compat)
    for s in compat:
        assert row[s] == pytest.approx(g.weight_of(s) / z, abs=1e-14)
    # hand evaluation: both neighbors of vertex 2 carry spin 1
    denom = math.exp(-2 * J) + 3
    assert row[(1, 1, 1)] == pytest.approx(math.exp(-2 * J) / denom, abs=1e-14)
    for a in (2, 3, 4):
        assert row[(1, a, 1)] == pytest.approx(1 / denom, abs=1e-14)


def test_potts_zero_coupling_row_is_uniform():
    k = potts_kernel(POTTS4, 1, "antiferro", J=0.0, mode="float")
    for row in k.rows:
        assert [w for _, w in row] == [0.25] * 4


def test_potts_detailed_balance_exact_and_float():
    for w in (Fraction(1), Fraction(1, 2), Fraction(1, 10), Fraction(0)):
        g = gibbs_measure(POTTS4, "antiferro", w=w, mode="exact")
        for v in (1, 2, 3):
            k = potts_kernel(POTTS4, v, "antiferro", w=w, mode="exact")
            mat = {(i, j): wt for i, row in enumerate(k.rows) for j, wt in row}
            for (i, j), wt in mat.items():
                back = mat.get((j, i), Fraction(0))
                assert g.weights[i] * wt == g.weights[j] * back
    J = 2.5
    g = gibbs_measure(POTTS4, "ferro", J=J, mode="float")
    k = potts_kernel(POTTS4, 2, "ferro", J=J, mode="float")
    mat = {(i, j): wt for i, row in enumerate(k.rows) for j, wt in row}
    for (i, j), wt in mat.items():
        back = mat.get((j, i), 0.0)
        assert abs(g.weights[i] * wt - g.weights[j] * back) <= 1e-12


def test_potts_gibbs_is_fixed_point():
    w = Fraction(1, 3)
    g = gibbs_measure(POTTS4, "antiferro", w=w, mode="exact")
    for v in (1, 2, 3):
        assert apply(g, potts_kernel(POTTS4, v, "antiferro", w=w, mode="exact")) == g
    gf = gibbs_measure(POTTS4, "ferro", J=1.2, mode="float")
    out = apply(gf, potts_kernel(POTTS4, 2, "ferro", J=1.2, mode="float"))
    assert tv_distance(out, gf) <= 1e-12


def test_potts_kernel_exact_rejects_real_J():
    with pytest.raises(ValueError):
        kernel_for_op(POTTS4, SiteUpdate(1, "antiferro", J=2.0), "exact")


# --- stationarity across the kernel zoo ----------------------------------------

PERM5 = enumerate_states(Permutations(5))
CYCLE5 = enumerate_states(Colorings(build_graph(5, [(1, 2), (2, 3), (3, 4), (4, 5), (1, 5)]), 3))


@pytest.mark.parametrize(
    "space,op",
    [
        (PERM4, Transpose(1, 2)),
        (PERM4, Transpose(1, 4)),
        (PERM4, Transpose(3, 4)),
        (PERM5, Transpose(2, 5)),
        (PERM4, BlockShuffle((2, 3, 4))),
        (PERM4, BlockShuffle((1, 2, 3, 4))),
        (PERM5, BlockShuffle((1, 5))),
        (COL4, Recolor(1)),
        (COL4, Recolor(2)),
        (COL4, Recolor(3)),
        (CYCLE5, Recolor(1)),
        (CYCLE5, Recolor(4)),
    ],
)
def test_uniform_is_stationary(space, op):
    pi = uniform_measure(space)
    assert apply(pi, kernel_for_op(space, op, "exact")) == pi


# --- apply and schedules ----------------------------------------------------------

def test_apply_point_through_transposition():
    delta = point_measure(PERM4, IDENTITY)
    out = apply(delta, transpose_kernel(PERM4, 1, 2))
    assert out.weight_of(IDENTITY) == HALF
    assert out.weight_of((2, 1, 3, 4)) == HALF


def test_apply_mode_mismatch():
    delta = point_measure(PERM4, IDENTITY, "float")
    with pytest.raises(SpaceMismatchError):
        apply(delta, transpose_kernel(PERM4, 1, 2, "exact"))


def test_apply_schedule_empty_is_identity():
    pi1 = conditional_uniform(PERM4, lambda s: s[0] == 1)
    assert apply_schedule(pi1, parse_schedule("")) == pi1


def test_apply_schedule_two_lazy_swaps():
    delta = point_measure(PERM4, IDENTITY)
    out = apply_schedule(delta, parse_schedule("[t(2,4) t(3,4)]^1"))
    expected = {
        (1, 2, 3, 4): Fraction(1, 4),
        (1, 2, 4, 3): Fraction(1, 4),
        (1, 4, 3, 2): Fraction(1, 4),
        (1, 4, 2, 3): Fraction(1, 4),
    }
    assert {PERM4.states[i]: w for i, w in enumerate(out.weights) if w} == expected


def test_apply_schedule_composition_associativity():
    delta = point_measure(PERM4, IDENTITY)
    a = parse_schedule("t(1,2) [t(2,4)]^2")
    b = parse_schedule("t(3,4) b{1,2}")
    combined = apply_schedule(delta, parse_schedule("t(1,2) [t(2,4)]^2 t(3,4) b{1,2}"))
    split = apply_schedule(apply_schedule(delta, a), b)
    assert combined == split


def test_apply_schedule_float_converges_to_slice():
    delta = point_measure(PERM4, IDENTITY, "float")
    out = apply_schedule(delta, parse_schedule("[t(2,4) t(3,4)]^30"))
    pi1 = conditional_uniform(PERM4, lambda s: s[0] == 1, "float")
    assert tv_distance(out, pi1) <= 1e-6


# --- intertwining with the triangle bijection ----------------------------------

def test_recolor_intertwines_with_lazy_transposition():
    bij = triangle_bijection()
    col, perm = bij.coloring_space, bij.perm_space
    for i in (1, 2, 3):
        rk = recolor_kernel(col, i)
        tk = transpose_kernel(perm, i, 4)
        for cid in range(col.size):
            m = point_measure(col, col.states[cid])
            pushed_after = {}
            for jid, w in enumerate(apply(m, rk).weights):
                if w:
                    pushed_after[bij.coloring_to_perm[jid]] = w
            direct = apply(point_measure(perm, perm.states[bij.coloring_to_perm[cid]]), tk)
            assert pushed_after == {
                j: w for j, w in enumerate(direct.weights) if w
            }


# --- composed kernels and limits -------------------------------------------------

def test_compose_matches_sequential_application():
    k1 = transpose_kernel(PERM4, 2, 4)
    k2 = transpose_kernel(PERM4, 3, 4)
    q = compose_kernels([k1, k2])
    delta = point_measure(PERM4, (2, 3, 1, 4))
    assert apply(delta, q) == apply(apply(delta, k1), k2)


def test_block_limit_certifies_slice():
    delta = point_measure(PERM4, IDENTITY)
    res = block_limit(delta, parse_schedule("[t(2,4) t(3,4)]^1"))
    assert res.certified and res.converged
    assert res.iterations == 0
    assert res.limit == conditional_uniform(PERM4, lambda s: s[0] == 1)
    assert res.classes is not None and len(res.classes) == 1
    # certified limits are exact fixed points of the composed block
    q = compose_kernels(
        [transpose_kernel(PERM4, 2, 4), transpose_kernel(PERM4, 3, 4)]
    )
    assert apply(res.limit, q) == res.limit


def test_block_limit_multiclass_certificate():
    pi1 = conditional_uniform(PERM4, lambda s: s[0] == 1)
    beta = apply_schedule(pi1, parse_schedule("t(1,4) t(2,4)"))
    res = block_limit(beta, parse_schedule("t(1,4) t(3,4)"))
    assert res.certified
    assert res.limit == uniform_measure(PERM4)
    assert len(res.classes) == 4  # one class per entry value at location 2


def test_block_limit_stationary_start():
    pi = uniform_measure(PERM4)
    res = block_limit(pi, parse_schedule("t(1,4) t(3,4)"))
    assert res.limit == pi
    assert res.residual == 0
    assert res.converged


def test_block_limit_iterative_path_matches_certificate():
    delta = point_measure(PERM4, IDENTITY, "float")
    block = parse_schedule("[t(2,4) t(3,4)]^1")
    certified = block_limit(delta, block)
    iterated = block_limit(delta, block, certify_max_states=0)
    assert not iterated.certified
    assert iterated.converged
    assert iterated.iterations > 0
    pi1 = conditional_uniform(PERM4, lambda s: s[0] == 1, "float")
    assert tv_distance(iterated.limit, pi1) <= 1e-10
    assert certified.certified


def test_block_limit_exact_fixed_point_detection():
    pi = uniform_measure(PERM4)
    res = block_limit(pi, parse_schedule("t(2,4)"), certify_max_states=0)
    assert res.certified  # residual hit exactly zero in exact mode
    assert res.iterations == 1


def test_block_limit_flags_non_convergence():
    delta = point_measure(PERM4, IDENTITY, "float")
    res = block_limit(
        delta, parse_schedule("t(2,4) t(3,4)"), certify_max_states=0, max_iterations=2
    )
    assert not res.converged and not res.certified


def test_block_limit_empty_block():
    with pytest.raises(ValueError):
        block_limit(uniform_measure(PERM4), parse_schedule(""))


# --- kernel export -----------------------------------------------------------------

def test_kernel_json_export():
    k = transpose_kernel(PERM4, 1, 2)
    d = kernel_to_json_dict(k)
    assert d["label"] == "t(1,2)"
    assert d["space"] == "perm:4"
    assert d["rows"][0] == [[0, "1/2"], [6, "1/2"]]


def test_kernel_cache_reuses_instances():
    cache = KernelCache(PERM4, "exact")
    assert cache.get(Transpose(1, 2)) is cache.get(Transpose(1, 2))
