//! Dyadic level-2 lifts and the metrics and experiments built on them.

mod convergence;
mod cross;
mod lift;
mod metrics;

pub use convergence::{lift_convergence_experiment, ConvergenceRow, convergence_rows_for_path, convergence_csv};
pub use cross::{cross_integrals, CrossIntegrals};
pub use lift::{chen_compose, dyadic_lift, DyadicLevel, RoughPath};
pub use metrics::{
    djp_distance, djp_moment, dp_distance_bound, homogeneous_norm_surrogate, p_variation_exact, DyadicMetricConfig,
    P_VARIATION_MAX_POINTS,
};
