//! Numerics for rough differential equations driven by a mixed fractional /
//! standard Brownian motion, and for the Laplace asymptotics of
//! `E[exp(-F(Y^eps)/eps^2)]` as `eps -> 0`.
//!
//! The pipeline, bottom to top:
//!
//! * [`config`]: the parameter window ([`ParamSet`]).
//! * [`drivers`]: exact Cholesky sampling of the driver on dyadic grids, the
//!   Cameron–Martin basis and discrete Girsanov pairing.
//! * [`rough`]: dyadic level-2 lifts, Chen composition, dyadic metrics,
//!   cross integrals and lift convergence experiments.
//! * [`integrator`]: skeleton ODE, RDE solver, Jacobian flows and the first
//!   and second variations, plus Taylor terms in `eps`.
//! * [`laplace`]: rate minimization, Hessian assembly, `Lambda`, trace and the
//!   leading Laplace coefficient.
//! * [`montecarlo`]: plain and importance-shifted estimators of `J(eps)`, the
//!   log-scale experiment and an exponential integrability probe.
//! * [`cli`] and [`io`]: the `mixrough` command line and its CSV/JSON formats.
//!
//! Runnable walkthroughs live in `crates/core/examples/`:
//!
//! ```text
//! cargo run --release -p mixrough --example sample_drivers
//! cargo run --release -p mixrough --example dyadic_lift
//! cargo run --release -p mixrough --example lift_convergence
//! cargo run --release -p mixrough --example cross_integrals
//! cargo run --release -p mixrough --example solve_rde
//! cargo run --release -p mixrough --example variation_flows
//! cargo run --release -p mixrough --example taylor_remainder
//! cargo run --release -p mixrough --example minimize_rate
//! cargo run --release -p mixrough --example hessian_alpha0
//! cargo run --release -p mixrough --example laplace_monte_carlo
//! cargo run --release -p mixrough --example fernique_probe
//! ```
//!
//! Time always runs over `[0, 1]` on the grid `t_k = k / 2^M`.

pub mod cli;
pub mod config;
pub mod drivers;
pub mod error;
pub mod integrator;
pub mod io;
pub mod laplace;
pub mod linalg;
pub mod montecarlo;
pub mod rough;

pub use config::ParamSet;
pub use drivers::{CmBasis, CmElement, CovarianceFactor, GridPath};
pub use error::{Error, Result};
pub use rough::RoughPath;
