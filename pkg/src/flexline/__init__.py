"""Reconfigurable flow-line toolkit.

Models a serial manufacturing line as a capability graph, plans agent-to-
operation assignments exactly, watches operation-time streams for sustained
disturbances, re-plans around a disturbed agent, evaluates candidate lines in
a seeded discrete-event simulation, and picks the best candidate against
user thresholds.
"""

from .capability_graph import (
    CapabilityGraph,
    EntityId,
    TimeModel,
    Triple,
    achievable_operations,
    capable_agents,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    operation_time,
    query,
    remove_capability,
    save_graph,
    update_time_model,
)
from .errors import (
    AmbiguousOwnership,
    ConsistencyError,
    FlexlineError,
    HitNodeLimit,
    Infeasible,
    InsufficientSamples,
    InvalidConfiguration,
    MissingTimeModel,
    NoCapability,
    NoFeasibleCandidate,
    NonPositiveDuration,
    NumericalFailure,
    ParseError,
    TooLarge,
    UnknownEntity,
    UnknownPair,
)
from .line_model import (
    DisturbanceScenario,
    LineConfiguration,
    SharedRoute,
    Station,
    StationView,
    bottleneck_time,
    derive_stations,
    expected_station_times,
    load_config,
    save_config,
    validate,
)
from .monitor import (
    BaselineStats,
    DisturbanceEvent,
    MonitorState,
    agent_triggers,
    build_monitor,
    estimated_multiplier,
    false_positive_rate,
    ingest_sample,
    read_sample_log,
    replay_samples,
    update_time_model_from_stream,
)
from .optimizer import (
    InitProblem,
    ParetoPoint,
    ReconfigProblem,
    Solution,
    SolveStats,
    Weights,
    brute_force_oracle,
    build_init_problem,
    build_reconfig_problem,
    solve_init,
    solve_reconfig,
    sweep_pareto,
)
from .selector import SelectionPolicy, SelectionResult, select
from .simulator import (
    ComparisonResult,
    Event,
    SimModel,
    SimReport,
    build_sim,
    compare_reports,
    replicate,
    report_to_dict,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousOwnership",
    "BaselineStats",
    "CapabilityGraph",
    "ComparisonResult",
    "ConsistencyError",
    "DisturbanceEvent",
    "DisturbanceScenario",
    "EntityId",
    "Event",
    "FlexlineError",
    "HitNodeLimit",
    "Infeasible",
    "InitProblem",
    "InsufficientSamples",
    "InvalidConfiguration",
    "LineConfiguration",
    "MissingTimeModel",
    "MonitorState",
    "NoCapability",
    "NoFeasibleCandidate",
    "NonPositiveDuration",
    "NumericalFailure",
    "ParetoPoint",
    "ParseError",
    "ReconfigProblem",
    "SelectionPolicy",
    "SelectionResult",
    "SharedRoute",
    "SimModel",
    "SimReport",
    "Solution",
    "SolveStats",
    "Station",
    "StationView",
    "TimeModel",
    "TooLarge",
    "Triple",
    "UnknownEntity",
    "UnknownPair",
    "Weights",
    "achievable_operations",
    "agent_triggers",
    "bottleneck_time",
    "brute_force_oracle",
    "build_init_problem",
    "build_monitor",
    "build_reconfig_problem",
    "build_sim",
    "capable_agents",
    "compare_reports",
    "derive_stations",
    "estimated_multiplier",
    "expected_station_times",
    "false_positive_rate",
    "graph_from_dict",
    "graph_to_dict",
    "ingest_sample",
    "load_config",
    "load_graph",
    "operation_time",
    "query",
    "read_sample_log",
    "remove_capability",
    "replay_samples",
    "replicate",
    "report_to_dict",
    "run",
    "save_config",
    "save_graph",
    "select",
    "solve_init",
    "solve_reconfig",
    "sweep_pareto",
    "update_time_model",
    "update_time_model_from_stream",
    "validate",
]
