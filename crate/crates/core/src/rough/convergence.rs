use rayon::prelude::*;

use super::lift::dyadic_lift;
use super::metrics::{djp_moment, DyadicMetricConfig};
use crate::config::ParamSet;
use crate::drivers::{rng_stream, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::mean_stderr;

/// One row of a lift convergence table. `mean_distance` is the sample mean
/// of the moment `D_{j,p}^{p/j}` between the level-`m` interpolation lift and
/// the reference lift.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub m: u32,
    pub j: u8,
    pub mean_distance: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Moments `D_{j,p}^{p/j}` (for `j = 1, 2`) between the lift of `path`
/// subsampled to level `m` and the lift of `path` itself, for each `m`.
pub fn convergence_rows_for_path(path: &GridPath, ms: &[u32], cfg: &DyadicMetricConfig) -> Result<Vec<[f64; 2]>> {
    let reference = dyadic_lift(path).pyramid();
    ms.iter()
        .map(|&m| {
            if m >= path.level() {
                return Err(Error::LevelMismatch { expected: path.level(), found: m });
            }
            let coarse = dyadic_lift(&path.subsample(m)?.refine(path.level())?).pyramid();
            Ok([
                djp_moment(&coarse, Some(&reference), 1, cfg)?,
                djp_moment(&coarse, Some(&reference), 2, cfg)?,
            ])
        })
        .collect()
}

/// Monte Carlo version over driver samples at the reference level
/// `params.level`, with metric depth equal to that level.
pub fn lift_convergence_experiment(params: &ParamSet, samples: usize, ms: &[u32]) -> Result<Vec<ConvergenceRow>> {
    if samples < 2 {
        return Err(Error::InvalidSpec("at least two samples required".into()));
    }
    let factor = CovarianceFactor::new(params)?;
    let cfg = DyadicMetricConfig::from_params(params);
    let per_sample: Vec<Vec<[f64; 2]>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = factor.sample(&mut rng_stream(params.seed, i as u64));
            convergence_rows_for_path(&x, ms, &cfg)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (mi, &m) in ms.iter().enumerate() {
        for j in [1u8, 2] {
            let vals: Vec<f64> = per_sample.iter().map(|r| r[mi][j as usize - 1]).collect();
            let s = mean_stderr(&vals);
            rows.push(ConvergenceRow { m, j, mean_distance: s.mean, stderr: s.stderr, samples });
        }
    }
    Ok(rows)
}

/// CSV with header `m,j,mean_distance,stderr,samples`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("m,j,mean_distance,stderr,samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.m,
            r.j,
            fmt_f64(r.mean_distance),
            fmt_f64(r.stderr),
            r.samples
        ));
    }
    out
}
