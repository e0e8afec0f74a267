"""Entire spacelike constant mean curvature graphs in Minkowski space.

Builds regular domains from null support data, solves for the CMC graph
with prescribed asymptotics by box exhaustion, assembles foliations,
and checks them against closed-form surfaces.
"""
from .domain import (
    RegularDomain,
    SupportFunction,
    cone_support,
    make_support_function,
    null_cut,
    random_support,
    wedge_support,
)
from .exceptions import (
    CMCError,
    DomainNotNested,
    FewerThanTwoDirections,
    FlowDegenerate,
    InputError,
    NewtonDiverged,
    NoStabilization,
    NotInDomain,
    OrderingViolation,
    PreconditionError,
    ProbeNotBelowSurface,
    ProbeOutsideDomain,
    SlopeViolation,
)
from .geometry import (
    fundamental_forms,
    gauss_map,
    minimal_lagrangian_data,
    normal_flow,
)
from .grid import GridDomain
from .lorentz import (
    CausalClass,
    boost,
    causal_class,
    is_future_causal,
    lorentzian_distance,
    minkowski_inner,
)
from .solver import (
    CMCSurface,
    FoliationResult,
    SpacelikeGraph,
    cmc_residual,
    foliate,
    mean_curvature_graph,
    solve_dirichlet,
    solve_entire,
)
from .verify import (
    asymptotic_data,
    comparison_check,
    convergence_study,
    distance_bound_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
