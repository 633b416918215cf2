"""Exact distribution engine for heat-bath update dynamics on finite spaces.

Enumerates proper colorings, permutations under lazy transpositions, and
Potts spin configurations; evolves probability measures through
deterministic update schedules with exact rational or float arithmetic; and
runs censoring-style insertion experiments against the stationary measure,
including an exhaustive counterexample search.
"""

from .backend import COMPILED
from .statespace import (
    Colorings,
    Graph,
    Permutations,
    Potts,
    StateSpace,
    build_graph,
    canonical_start,
    enumerate_states,
    parse_space_spec,
    read_graph_file,
    triangle_bijection,
    triangle_graph,
)
from .measure import (
    EXACT,
    FLOAT,
    Measure,
    conditional_uniform,
    event_probability,
    gibbs_measure,
    l2_distance,
    measure_from_json,
    measure_to_json,
    point_measure,
    pushforward,
    tv_distance,
    uniform_measure,
)
from .dynamics import (
    BlockShuffle,
    Kernel,
    KernelCache,
    LimitResult,
    Recolor,
    Repeat,
    Schedule,
    SiteUpdate,
    Transpose,
    apply,
    apply_schedule,
    block_kernel,
    block_limit,
    compose_kernels,
    format_schedule,
    kernel_for_op,
    parse_schedule,
    potts_kernel,
    recolor_kernel,
    schedule_of,
    transpose_kernel,
)
from .censoring import (
    ExperimentResult,
    InsertionExperiment,
    SearchConfig,
    SearchReport,
    Violation,
    compare_insertion,
    dense_recheck,
    expand_family,
    search,
    verify_alternative_example,
    verify_block_example,
    verify_coloring_counterexample,
    verify_mn1,
    verify_perm_counterexample,
    verify_potts_antiferro,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
