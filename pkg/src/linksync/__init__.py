"""Link-preserving coordination of delayed multi-agent networks.

Simulates single-integrator and two-link-arm networks driven by
potential-gradient proportional control with damping injection, under
bounded time-varying communication delays, and verifies the parameter and
gain conditions that make the initial communication links invariant.
"""

from .delay import DelayChannel, DelayProfile, History, UncoveredLookback, query_delayed
from .dynamics import (
    DampingGains,
    TwoLinkArm,
    arm_control_torque,
    arm_forward_dynamics,
    arm_matrices,
    arm_total_energy,
    el_closed_loop_derivative,
    si_closed_loop_derivative,
)
from .graph import (
    CommGraph,
    graph_from_positions,
    incidence_matrix,
    is_connected,
    weighted_laplacian,
)
from .potential import (
    FeasibilityReport,
    InfeasibleParameters,
    MismatchConstants,
    PotentialDomainError,
    PotentialParams,
    barrier_ceiling,
    coupling_gain,
    link_potential,
    mismatch_constants,
    p_gain_floor,
    plan_parameters,
    potential_gradient,
)
from .simulator import (
    AbortInfo,
    GainCheckError,
    MonitorReport,
    ScenarioConfig,
    TrajectoryRecord,
    initial_kinetic_energy,
    lyapunov_value,
    monitors,
    run_scenario,
    write_csv,
)
from .verify import (
    GainCertificate,
    damping_certificate,
    delay_cross_term_residual,
    maxnorm_cross_term_residual,
    optimal_alpha,
    optimal_alphas,
    trajectory_mismatch_check,
)

__version__ = "0.1.0"
