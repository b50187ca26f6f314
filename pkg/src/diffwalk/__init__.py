"""diffwalk: multi-walker token diffusion on finite graphs.

Every vertex holds a token; per round, per-vertex coin registers select a
random independent edge set and doubly-controlled exchanges move tokens
across the selected edges. The package ships a sparse state-vector engine
for the quantum protocol, an exact/sampling classical oracle for the
induced stochastic process, and a CLI with the worked examples built in.
"""

from .graph import (
    GraphFormatError,
    OrientedGraph,
    build_graph,
    cycle_graph,
    parse_graph,
    serialize_graph,
)
from .registers import (
    Distribution,
    EngineError,
    RegisterLabel,
    RegisterSpace,
    SparseState,
    flag_register,
    graph_register_space,
    vertex_register,
)
from .protocol import (
    DiffusionRun,
    ExchangeRule,
    InvariantViolation,
    ProtocolError,
    RoundMode,
    build_w_unitary,
    consolidate_flags,
    directed_exchange_matrix,
    exchange_step,
    finish_round,
    measured_statistics,
    prepare_coins,
    run_diffusion,
    run_rounds,
    vertex_marginals,
)
from .oracle import (
    classical_diffuse,
    check_probability_bound,
    edge_selection_probability,
    enumerate_profiles,
    matching_distribution,
    profile_to_matching,
    solve_fixed_point,
)
from .scenarios import (
    ConfigError,
    ScenarioConfig,
    builtin_scenario,
    load_config,
    render_report,
    run_scenario,
)

__version__ = "0.1.0"
