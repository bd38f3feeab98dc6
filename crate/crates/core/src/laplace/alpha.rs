use serde::Serialize;

use super::hessian::HessianAssembly;
use crate::error::{Error, Result};

const AGREEMENT_TOL: f64 = 1e-6;

/// Leading Laplace coefficient under both determinant readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha0Report {
    /// Carleman–Fredholm reading; the value used downstream.
    pub alpha0: f64,
    pub alpha0_cf: f64,
    /// Ordinary-determinant reading `exp(-(T + L)/2) prod (1 + l)^{-1/2}`.
    pub alpha0_printed_det: f64,
    pub readings_agree: bool,
    pub trace_a_minus_a1: f64,
    pub lambda_functional: f64,
    pub log_det: f64,
    pub log_det2: f64,
    pub min_eigenvalue: f64,
}

/// `alpha0` from a truncated spectrum, `Tr(A - A1)` and `dF<Lambda>`.
pub fn alpha0_from_parts(spectrum: &[f64], trace_a_minus_a1: f64, lambda_functional: f64) -> Result<Alpha0Report> {
    let min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    if spectrum.iter().any(|l| !l.is_finite()) || !trace_a_minus_a1.is_finite() || !lambda_functional.is_finite() {
        return Err(Error::NonFiniteInput("alpha0 inputs".into()));
    }
    if min <= -1.0 {
        return Err(Error::SpectrumViolatesA4(min));
    }
    let log_det: f64 = spectrum.iter().map(|l| l.ln_1p()).sum();
    let log_det2: f64 = spectrum.iter().map(|l| l.ln_1p() - l).sum();
    let prefactor = -0.5 * (trace_a_minus_a1 + lambda_functional);
    let cf = (prefactor - 0.5 * log_det2).exp();
    let printed = (prefactor - 0.5 * log_det).exp();
    Ok(Alpha0Report {
        alpha0: cf,
        alpha0_cf: cf,
        alpha0_printed_det: printed,
        readings_agree: (cf - printed).abs() <= AGREEMENT_TOL * cf.abs().max(printed.abs()),
        trace_a_minus_a1,
        lambda_functional,
        log_det,
        log_det2,
        min_eigenvalue: if spectrum.is_empty() { 0.0 } else { min },
    })
}

/// `alpha0` of an assembly; a missing `Lambda` estimate counts as zero.
pub fn alpha0(assembly: &HessianAssembly) -> Result<Alpha0Report> {
    let lambda = assembly.lambda_functional.map_or(0.0, |l| l.mean);
    alpha0_from_parts(&assembly.spectrum, assembly.trace_a_minus_a1, lambda)
}
