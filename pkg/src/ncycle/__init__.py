"""Sequential-measurement game on odd N-cycle contextuality scenarios.

Exact analytics (transition matrix, affine recurrences, channel iteration),
enumeration-verified classical bounds, and reproducible Monte Carlo simulation
of independent sequential observers.
"""

from .analytic import (
    MarkovMatrix,
    OptimalityReport,
    RecurrenceCoeffs,
    SequenceResult,
    Table1Row,
    aggregate_probability_vector,
    channel_sequence,
    context_probabilities,
    extract_recurrence,
    kmax_uniform,
    markov_matrix,
    optimal_initial_state_check,
    protocol1_sequence,
    recurrence_sequence,
    t_coefficient,
    table1,
)
from .errors import (
    DecompositionFailureError,
    InsufficientRunsError,
    InvariantBreachError,
    NCycleError,
    NoConvergenceError,
    PairingError,
    SymmetryBreachError,
    UnsupportedScenarioError,
    ZeroProbabilityBranchError,
)
from .montecarlo import (
    ComparisonReport,
    GameConfig,
    Ordering,
    PlayerRecord,
    RngStream,
    RunRecord,
    SimulationEstimate,
    compare_to_analytic,
    estimate_sequence,
    simulate_run,
    stream_for,
)
from .protocols import (
    VIOLATION_EPS,
    FunctionalOperator,
    InequalityId,
    ProtocolId,
    Verdict,
    evaluate,
    functional_operator,
    measurement_set,
)
from .quantum import (
    AverageChannel,
    Channel,
    DensityMatrix,
    Projector,
    apply_channel,
    average_protocol_channel,
    born_probability,
    handle_state,
    luders_update,
    maximally_mixed,
    pure_state,
    random_pure_state,
)
from .scenario import (
    ClassicalBounds,
    Scenario,
    build_scenario,
    enumerate_classical_bounds,
    scenario_from_json,
    scenario_to_json,
)

__version__ = "0.1.0"
