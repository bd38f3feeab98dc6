//! Laplace asymptotics of `E exp(-F(Y^eps) / eps^2)`: the rate minimizer on a
//! truncated Cameron–Martin basis, the Hessian of `F o Psi` there, the
//! `Lambda` and trace corrections, and the leading coefficient `alpha0`.

mod alpha;
mod functional;
mod hessian;
mod minimize;
pub mod oracle;

pub use alpha::{alpha0, alpha0_from_parts, Alpha0Report};
pub use functional::{
    audit_functional, trapezoid_weights, ConstantFunctional, FunctionalSpec, PathFunctional, QuadraticFunctional,
    TerminalSmooth,
};
pub use hessian::{assemble_hessian, assemble_hessian_pathwise, estimate_lambda, BasisLabel, HessianAssembly};
pub use minimize::{
    discrete_gram, minimize_objective, minimize_rate, minimize_rate_discrete, IterationRecord, MinimizeOptions,
    MinimizerResult, RateObjective,
};
