//! Young integration, the skeleton ODE and RDE solvers, and the variation
//! flows along a skeleton.

mod flows;
mod jet;
mod linearize;
mod scheme;
mod taylor;
mod vector_field;
mod young;

pub use flows::{FlowBundle, SecondVariation};
pub use jet::{solve_jets, JetSolution};
pub use linearize::{linearize_skeleton, SkeletonLinearization, StepLinearization};
pub use scheme::{solve_rde, solve_skeleton};
pub use taylor::{taylor_check, TaylorReport, TaylorRow};
pub use vector_field::{audit_derivatives, AuditReport, LinearSystem, ScalarPolySystem, SystemSpec, VectorField};
pub use young::{young_integral, young_integral_trapezoid};
