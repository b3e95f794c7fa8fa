//! Simulation and diagnostics for point configurations on a closed curve
//! interacting through a repulsive inverse-power pair potential.
//!
//! The crate is organized around a few building blocks:
//!
//! - [`curve`]: closed curves rescaled to unit length and addressed by arc
//!   length, with derivatives, chord lookups, and a self-avoidance radius.
//! - [`riesz`]: the pair potential, configuration energies with per-offset
//!   breakdowns, and analytic energy gradients.
//! - [`dynamics`]: gradient-flow integration with step-size control that
//!   protects the particle ordering.
//! - [`diagnostics`]: closest-pair statistics, cut profiles, weak-cut
//!   detection, cut equalization, and distribution-quality reports.
//! - [`oracle`]: slow, independent reference computations (direct energy
//!   minimization, finite-difference gradients, exhaustive cut scans) used to
//!   cross-check the fast paths.

pub mod curve;
pub mod diagnostics;
pub mod dynamics;
pub(crate) mod numeric;
pub mod oracle;
pub mod riesz;

pub use curve::{torus_distance, Curve, CurveError, CurveSpec};
pub use diagnostics::{
    closest_pair, cut_profile, distribution_report, epsilon_from_energy, epsilon_from_flat,
    equalize_cuts, n_star, weak_cut, CutProfile, DeltaMonitor, DiagnosticsError,
    DistributionReport, Equalized, LyapunovMonitor, WeakCut, WindowReport,
};
pub use dynamics::{
    dissipation, flow_velocity, integrate, DynamicsError, FlowOutcome, FlowState,
    IntegratorConfig, Method, NoObserver, Observer, StopReason,
};
pub use oracle::{
    align_rotation, exhaustive_cut_check, finite_diff_gradient, minimize_energy_direct,
    Alignment, FdGradient, OracleError, OracleResult,
};
pub use riesz::{
    energy, energy_gradient, energy_value, flat_energy, potential, potential_derivative, zeta,
    zeta_truncated, Configuration, EnergyBreakdown, RieszError,
};
