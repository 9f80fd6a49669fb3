"""Exact rational kernels of the iterated averaging operator and the
constructive simultaneous-approximation pipeline built on them."""

from .audit import (
    AuditReport,
    audit_abel,
    audit_density,
    audit_kernel,
    audit_oracle,
    audit_unit_interval,
)
from .construct import (
    ConvexWitness,
    CoveringChain,
    Partition,
    build_covering_chain,
    choose_partition,
    dense_example,
    single_target_extend,
    assign_block_terms,
    unit_interval_check,
    replay_trace,
    take_prefix,
    run_target_plan,
    simultaneous_construct,
)
from .errors import (
    BudgetExceededError,
    CertificationError,
    CesaroError,
    CoverageError,
    SchedulingError,
)
from .exact import frac, fracstr, log_upper
from .kernel import (
    KernelCache,
    apply_iterate,
    apply_iterate_oracle,
    convexity_expansion,
    default_cache,
    phi,
    recurrence_check,
)
from .sequences import IterateWalker, RunSeq, iterate_at
from .space import (
    FinitePointSet,
    GroundSet,
    HullWitness,
    IndexSet,
    Space,
    cube_corners,
    delta,
    hull_contains,
    n_epsilon,
    point,
)

__version__ = "0.1.0"
