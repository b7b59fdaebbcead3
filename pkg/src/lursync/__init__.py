"""Mean-square synchronization certificates for networks of Lur'e systems
coupled over randomly weighted links."""
from ._accel import backend
from .graph import (
    DisconnectedGraphError,
    GraphError,
    GraphSpectra,
    TorusSpec,
    UncertainGraph,
    complete_graph,
    laplacian,
    ring_graph,
    spectra,
    torus_eigenvalues,
    torus_extreme_eigs,
    torus_graph,
    torus_laplacian,
)
from .margin import (
    DeterministicallyInfeasible,
    ScalarTorusParams,
    SmallGainCertificate,
    TorusMargin,
    critical_cod,
    scalar_torus_feasible,
    scalar_torus_margin,
    small_gain_for_graph,
    small_gain_margin,
    torus_sweep,
)
from .prl import (
    FeasibilityCertificate,
    InputError,
    LureSystem,
    SolverOptions,
    StructuredUncertainty,
    check_full_sync_condition,
    check_reduced_sync_condition,
    check_torus_matrix_condition,
    sector_check,
    solve_dual_prl,
    solve_stochastic_prl,
)
from .simulator import (
    ChuaParams,
    NetworkSimConfig,
    Nonlinearity,
    SyncTrace,
    build_chua_network_system,
    chua_nonlinearity,
    simulate,
    step_network,
    sync_error,
)

__version__ = "0.1.0"
