use rayon::prelude::*;
use serde::Serialize;

use super::jet::solve_jets;
use super::scheme::solve_rde;
use super::vector_field::VectorField;
use crate::config::ParamSet;
use crate::drivers::{rng_stream, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::linalg::{mean_stderr, regression_slope};
use crate::rough::dyadic_lift;

#[derive(Debug, Clone, Serialize)]
pub struct TaylorRow {
    pub eps: f64,
    pub mean_remainder: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    pub order: u8,
    pub rows: Vec<TaylorRow>,
    /// Least-squares slope of `log mean_remainder` against `log eps`.
    pub slope: f64,
}

/// Sup-norm remainder `|Y^eps - (phi0 + eps phi1 [+ eps^2 phi2])|` of the
/// shifted RDE solution against its Taylor polynomial in `eps`, averaged over
/// driver samples at `params.level`.
pub fn taylor_check(
    params: &ParamSet,
    vf: &dyn VectorField,
    shift: &GridPath,
    eps_grid: &[f64],
    samples: usize,
    order: u8,
) -> Result<TaylorReport> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidSpec(format!("Taylor order must be 1 or 2, got {order}")));
    }
    if shift.level() != params.level {
        return Err(Error::LevelMismatch { expected: params.level, found: shift.level() });
    }
    let factor = CovarianceFactor::new(params)?;
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = factor.sample(&mut rng_stream(params.seed, i as u64));
            let jets = solve_jets(vf, shift, &x, 1.0)?;
            let lift = dyadic_lift(&x);
            eps_grid
                .iter()
                .map(|&eps| {
                    let y = solve_rde(&lift, eps, vf, Some(shift), None)?;
                    let mut approx = jets.base.axpy(eps, &jets.first)?;
                    if order == 2 {
                        approx = approx.axpy(eps * eps, &jets.second)?;
                    }
                    y.sup_distance(&approx)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<TaylorRow> = eps_grid
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let vals: Vec<f64> = per_sample.iter().map(|r| r[e]).collect();
            let s = mean_stderr(&vals);
            TaylorRow { eps, mean_remainder: s.mean, stderr: s.stderr }
        })
        .collect();
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eps > 0.0 && r.mean_remainder > 0.0)
        .map(|r| (r.eps.ln(), r.mean_remainder.ln()))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
    let slope = if lx.len() >= 2 { regression_slope(&lx, &ly) } else { f64::NAN };
    Ok(TaylorReport { order, rows, slope })
}
