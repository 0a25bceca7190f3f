"""Transient frequency-stability toolkit for grid-synchronized converters.

Reduced-order nonlinear models of a grid-tied voltage-source converter
(power-control-loop dominant and synchronization-loop dominant), phase
portrait / basin classification, equal-area stability margins with critical
clearing angle/time, and a time-domain scenario engine with fault events and
hard limits. See the README for the CLI entry points.
"""

__version__ = "0.1.0"

from .params import (
    ConfigError,
    ControllerParams,
    FaultSpec,
    GridParams,
    OperatingPoint,
    PerUnitBase,
    SystemParams,
    TableExtras,
    ValidationReport,
    fault_factor,
    pll_gains_from_bandwidth,
    pq_gains_from_bandwidth,
    validate_params,
)
from .numerics import BracketError, IntegratorConfig, NumericalBlowUp, bisect, rk4_integrate
from .pll import (
    PortraitClass,
    SwingCoeffs,
    damping,
    equilibrium_angles,
    integrate_pll,
    pll_portrait,
    pll_rhs,
    prefault_pcc_voltage,
    simulate_first_swing,
    swing_coeffs,
    swing_energy,
    t_e,
)
from .pcl import (
    AlgebraicLoopError,
    BasinClass,
    BasinMap,
    classify_basin,
    disk_initials,
    grid_initials,
    pcl_equilibria,
    pcl_outputs,
    pcl_rhs,
    pq_from_currents,
    solve_output_currents,
    target_equilibrium,
)
from .eap import (
    CcaResult,
    CcaStatus,
    MarginReport,
    SweepCell,
    area,
    brute_force_cct,
    cct_sweep,
    estimate_cct,
    margin_report,
    solve_cca,
)
from .scenario import (
    DeltaReport,
    LimiterPriority,
    LimiterSpec,
    Mode,
    Scenario,
    SyncClass,
    SyncVerdict,
    Trajectory,
    apply_current_limit,
    classify_sync,
    compare_q_control,
    run_scenario,
)
from .config import (
    PRESET_NAMES,
    PortraitSpec,
    ResolvedConfig,
    SweepSpec,
    load_config,
    load_preset,
    preset_path,
    resolved_snapshot,
)
