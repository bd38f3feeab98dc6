//! Monte Carlo estimation of `J(eps) = E exp(-F(Y^eps) / eps^2)`, plain or
//! with a Cameron–Martin shift and its exact discrete Girsanov weight, plus
//! the large-deviation scale experiment and a Fernique-type probe.
//!
//! Sample `i` always uses RNG stream `i` of the run seed, so results do not
//! depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ParamSet;
use crate::drivers::{rng_stream, CovarianceFactor, GridPath, PairingKernel};
use crate::error::{Error, Result};
use crate::integrator::{solve_rde, VectorField};
use crate::io::{fmt_f64, McLogRow};
use crate::laplace::PathFunctional;
use crate::linalg::{mean_stderr, pairwise_sum};
use crate::rough::{dyadic_lift, homogeneous_norm_surrogate, DyadicMetricConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub eps: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub shifted: bool,
    pub level: u32,
    pub elapsed: f64,
    /// `mean = exp(log_scale) * scaled_mean`; kept so that ratios like
    /// `J e^{a/eps^2}` survive when `J` itself underflows.
    pub log_scale: f64,
    pub scaled_mean: f64,
    pub scaled_stderr: f64,
    /// `stderr / mean > 1`.
    pub variance_blowup: bool,
}

impl EstimatorReport {
    /// `(J e^{a / eps^2}, stderr)`.
    pub fn laplace_ratio(&self, a: f64) -> (f64, f64) {
        let f = (self.log_scale + a / (self.eps * self.eps)).exp();
        (f * self.scaled_mean, f * self.scaled_stderr)
    }

    /// `eps^2 log J`.
    pub fn eps2_log_j(&self) -> f64 {
        self.eps * self.eps * (self.log_scale + self.scaled_mean.ln())
    }

    pub fn log_row(&self, experiment: &str, seed: u64) -> McLogRow {
        McLogRow {
            experiment: experiment.to_string(),
            eps: self.eps,
            level: self.level,
            samples: self.samples,
            mean: self.mean,
            stderr: self.stderr,
            seed,
            elapsed_s: self.elapsed,
        }
    }
}

/// Estimates `J(eps)` at `params.level` from `samples` driver draws.
///
/// With `shift = Some(h)` (a driver-space path on the same grid) each sample
/// solves the equation driven by `eps X + h` and carries the weight
/// `exp(-<h, X>/eps - |h|^2 / (2 eps^2))` in the exact discrete
/// Cameron–Martin geometry, which leaves the estimator unbiased.
pub fn estimate_j(
    params: &ParamSet,
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    eps: f64,
    samples: usize,
    shift: Option<&GridPath>,
) -> Result<EstimatorReport> {
    if samples < 2 {
        return Err(Error::InvalidSpec("estimator needs at least 2 samples".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidSpec(format!("eps must be positive, got {eps}")));
    }
    if vf.fbm_dim() != params.d1 || vf.bm_dim() != params.d2 {
        return Err(Error::DimensionMismatch("system drivers do not match the parameter set".into()));
    }
    let start = Instant::now();
    let factor = CovarianceFactor::new(params)?;
    let kernel = shift.map(|h| PairingKernel::new(h, &factor)).transpose()?;
    let inv = 1.0 / (eps * eps);
    let logs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = factor.sample(&mut rng_stream(params.seed, i as u64));
            let y = solve_rde(&dyadic_lift(&x), eps, vf, shift, None)?;
            let mut l = -functional.value(&y) * inv;
            if let Some(k) = &kernel {
                l += -k.pair(&x)? / eps - 0.5 * k.norm_sq() * inv;
            }
            Ok(l)
        })
        .collect::<Result<_>>()?;
    let log_scale = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - log_scale).exp()).collect();
    let s = mean_stderr(&scaled);
    let factor_back = log_scale.exp();
    let variance_blowup = s.stderr > s.mean;
    if variance_blowup {
        log::warn!("variance blowup at eps={eps}: stderr/mean = {}", s.stderr / s.mean);
    }
    Ok(EstimatorReport {
        eps,
        samples,
        mean: factor_back * s.mean,
        stderr: factor_back * s.stderr,
        shifted: shift.is_some(),
        level: params.level,
        elapsed: start.elapsed().as_secs_f64(),
        log_scale,
        scaled_mean: s.mean,
        scaled_stderr: s.stderr,
        variance_blowup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpRow {
    pub eps: f64,
    pub mean: f64,
    pub stderr: f64,
    pub eps2_log_j: f64,
    /// `|eps^2 log J + a|`.
    pub gap: f64,
    pub laplace_ratio: f64,
    pub laplace_ratio_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpReport {
    pub value_a: f64,
    pub rows: Vec<LdpRow>,
    pub gap_decreasing: bool,
    pub estimates: Vec<EstimatorReport>,
}

pub const LDP_HEADER: &str = "eps,mean,stderr,eps2_log_j,gap,laplace_ratio,laplace_ratio_stderr";

/// `eps^2 log J(eps)` against the rate `a` over a decreasing `eps` grid.
pub fn ldp_scale_experiment(
    params: &ParamSet,
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    eps_grid: &[f64],
    samples: usize,
    value_a: f64,
    shift: Option<&GridPath>,
) -> Result<LdpReport> {
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSpec("eps grid must be non-empty and strictly decreasing".into()));
    }
    let estimates: Vec<EstimatorReport> = eps_grid
        .iter()
        .map(|&eps| estimate_j(params, vf, functional, eps, samples, shift))
        .collect::<Result<_>>()?;
    let rows: Vec<LdpRow> = estimates
        .iter()
        .map(|r| {
            let e2 = r.eps2_log_j();
            let (ratio, ratio_se) = r.laplace_ratio(value_a);
            LdpRow {
                eps: r.eps,
                mean: r.mean,
                stderr: r.stderr,
                eps2_log_j: e2,
                gap: (e2 + value_a).abs(),
                laplace_ratio: ratio,
                laplace_ratio_stderr: ratio_se,
            }
        })
        .collect();
    let gap_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(LdpReport { value_a, rows, gap_decreasing, estimates })
}

pub fn ldp_csv(rows: &[LdpRow]) -> String {
    let mut out = format!("{LDP_HEADER}\n");
    for r in rows {
        let cells = [r.eps, r.mean, r.stderr, r.eps2_log_j, r.gap, r.laplace_ratio, r.laplace_ratio_stderr];
        out.push_str(&cells.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FerniqueRow {
    pub c: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Mean over the first half of the samples.
    pub half_mean: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FerniqueReport {
    pub rows: Vec<FerniqueRow>,
    pub largest_stable_c: Option<f64>,
}

pub const FERNIQUE_HEADER: &str = "c,mean,stderr,half_mean,stable";

/// Sample means of `exp(c N^2)` with `N` the dyadic homogeneous-norm
/// surrogate of the lifted driver. A value of `c` counts as stable when the
/// full-sample mean is finite and within 20% of the half-sample mean.
pub fn fernique_probe(params: &ParamSet, c_grid: &[f64], samples: usize) -> Result<FerniqueReport> {
    if samples < 2 {
        return Err(Error::InvalidSpec("probe needs at least 2 samples".into()));
    }
    if c_grid.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidSpec("c values must be finite and non-negative".into()));
    }
    let factor = CovarianceFactor::new(params)?;
    let cfg = DyadicMetricConfig::from_params(params);
    let norms_sq: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = factor.sample(&mut rng_stream(params.seed, i as u64));
            Ok(homogeneous_norm_surrogate(&dyadic_lift(&x), &cfg)?.powi(2))
        })
        .collect::<Result<_>>()?;
    let half = samples / 2;
    let rows: Vec<FerniqueRow> = c_grid
        .iter()
        .map(|&c| {
            let vals: Vec<f64> = norms_sq.iter().map(|n2| (c * n2).exp()).collect();
            let s = mean_stderr(&vals);
            let half_mean = pairwise_sum(&vals[..half]) / half as f64;
            let stable = s.mean.is_finite() && (s.mean - half_mean).abs() <= 0.2 * half_mean.abs();
            FerniqueRow { c, mean: s.mean, stderr: s.stderr, half_mean, stable }
        })
        .collect();
    let largest_stable_c = rows.iter().filter(|r| r.stable).map(|r| r.c).fold(None, |m: Option<f64>, c| {
        Some(m.map_or(c, |m| m.max(c)))
    });
    Ok(FerniqueReport { rows, largest_stable_c })
}

pub fn fernique_csv(rows: &[FerniqueRow]) -> String {
    let mut out = format!("{FERNIQUE_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.c),
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
            fmt_f64(r.half_mean),
            r.stable
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::CmBasis;
    use crate::integrator::SystemSpec;
    use crate::laplace::{minimize_rate_discrete, ConstantFunctional, FunctionalSpec, MinimizeOptions};

    fn params(level: u32) -> ParamSet {
        ParamSet::from_recipe(0.4, 0.01, 1, 1, 2, level, 9).unwrap()
    }

    #[test]
    fn constant_functional_is_exact() {
        let p = params(5);
        let vf = SystemSpec::linear_toy().into_field();
        let f = ConstantFunctional { value: 0.3 };
        let r = estimate_j(&p, vf.as_ref(), &f, 0.5, 100, None).unwrap();
        assert!((r.mean - (-0.3f64 / 0.25).exp()).abs() < 1e-15);
        assert_eq!(r.stderr, 0.0);
        let ldp = ldp_scale_experiment(&p, vf.as_ref(), &f, &[1.0, 0.5], 10, 0.3, None).unwrap();
        assert!(ldp.rows.iter().all(|r| (r.eps2_log_j + 0.3).abs() < 1e-14));
    }

    #[test]
    fn shifted_and_plain_agree() {
        let p = params(6);
        let vf = SystemSpec::linear_toy().into_field();
        let spec = FunctionalSpec::builtin("quadratic", 2).unwrap();
        let basis = CmBasis::new(&p, 8, 6).unwrap();
        let m = minimize_rate_discrete(&p, vf.as_ref(), spec.as_functional(), &basis, &MinimizeOptions::default()).unwrap();
        let h = basis.realize(&m.coeffs);
        let plain = estimate_j(&p, vf.as_ref(), spec.as_functional(), 0.5, 4000, None).unwrap();
        let shifted = estimate_j(&p, vf.as_ref(), spec.as_functional(), 0.5, 4000, Some(&h)).unwrap();
        let se = (plain.stderr.powi(2) + shifted.stderr.powi(2)).sqrt();
        assert!((plain.mean - shifted.mean).abs() < 3.0 * se, "{plain:?} {shifted:?}");
        assert!(shifted.stderr < plain.stderr);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = params(5);
        let vf = SystemSpec::scalar_poly_toy().into_field();
        let spec = FunctionalSpec::builtin("terminal-smooth", 1).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_j(&p, vf.as_ref(), spec.as_functional(), 0.5, 200, None).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn fernique_basic_properties() {
        let p = params(6);
        let r = fernique_probe(&p, &[0.0, 0.005, 0.01, 0.02], 400).unwrap();
        assert_eq!(r.rows[0].mean, 1.0);
        assert_eq!(r.rows[0].stderr, 0.0);
        for w in r.rows.windows(2) {
            assert!(w[1].mean >= w[0].mean);
        }
        assert!(r.rows[2].stable);
        assert!(r.largest_stable_c.is_some());
    }

    #[test]
    fn eps_grid_must_decrease() {
        let p = params(4);
        let vf = SystemSpec::linear_toy().into_field();
        let f = ConstantFunctional { value: 0.0 };
        assert!(ldp_scale_experiment(&p, vf.as_ref(), &f, &[0.5, 1.0], 10, 0.0, None).is_err());
    }
}
