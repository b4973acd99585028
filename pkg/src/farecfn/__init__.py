"""Price-optimal transit routing over conditional fare networks."""

from .document import FareStructure, fare_structure, load_fare_document, validate_cfn
from .monoid import (
    CapabilityError,
    ComponentSpec,
    MonoidSpec,
    StructuralError,
    monoid_add,
    monoid_leq,
    monoid_zero,
)
from .harness import Algo, BenchConfig, run_bench, summarize
from .oracles import (
    InstanceParams,
    build_dfa,
    corpus,
    dfa_product_dijkstra,
    enumerate_pareto,
    gen_random_instance,
)
from .router import (
    Journey,
    Query,
    Router,
    backward_raptor,
    bag_insert,
    mc_raptor,
    overlap_dep_bounds,
    price_filter,
    raptor,
    reconstruct_journey,
    target_bmrap,
    tight_bmrap,
)
from .tickets import (
    CheckMode,
    ComparabilityPartition,
    Dominance,
    FareState,
    TicketGraph,
    check_monotonicity,
    check_no_overtaking,
    compare_states,
    compute_partition,
    compute_reach,
    fare_update,
    price,
    transition,
    validate_graph,
)
from .synthetic import CityParams, od_queries, synthetic_city
from .timetable import (
    FareTimetable,
    Timetable,
    annotate_fares,
    close_footpaths,
    duplicate_overlap_routes,
    load_dataset,
    load_timetable,
)

__version__ = "0.1.0"
