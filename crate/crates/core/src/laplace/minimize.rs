use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::functional::PathFunctional;
use crate::config::ParamSet;
use crate::drivers::{rng_stream, CmBasis, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::integrator::{linearize_skeleton, solve_skeleton, VectorField};

/// The discrete rate objective `c -> F(phi0(sum c_j e_j)) + |c|^2 / 2` on a
/// truncated basis.
pub struct RateObjective<'a> {
    vf: &'a dyn VectorField,
    functional: &'a dyn PathFunctional,
    basis: &'a CmBasis,
    /// Gram matrix of the penalty; `None` is the identity.
    metric: Option<DMatrix<f64>>,
}

/// Gram matrix `<e_i, e_j>` of the basis realizations in the exact discrete
/// Cameron–Martin geometry `h^T Sigma^{-1} h`. Entries whose realization
/// vanishes (the constant fractional modes) get a unit diagonal so the
/// penalty stays positive definite.
pub fn discrete_gram(basis: &CmBasis, factor: &CovarianceFactor) -> Result<DMatrix<f64>> {
    let nb = basis.len();
    let incs: Vec<Vec<f64>> = (0..nb).map(|j| basis.realize_entry(j).increments()).collect();
    let duals: Vec<Vec<f64>> = incs.iter().map(|h| factor.precision_apply(h)).collect::<Result<_>>()?;
    let mut g = DMatrix::from_fn(nb, nb, |i, j| incs[i].iter().zip(&duals[j]).map(|(a, b)| a * b).sum::<f64>());
    g = (&g + g.transpose()) * 0.5;
    for j in 0..nb {
        if incs[j].iter().all(|v| *v == 0.0) {
            g[(j, j)] = 1.0;
        }
    }
    Ok(g)
}

impl<'a> RateObjective<'a> {
    pub fn new(vf: &'a dyn VectorField, functional: &'a dyn PathFunctional, basis: &'a CmBasis) -> Result<Self> {
        if basis.dim() != vf.driver_dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis spans {} driver coordinates, system has {}",
                basis.dim(),
                vf.driver_dim()
            )));
        }
        Ok(Self { vf, functional, basis, metric: None })
    }

    /// Objective with penalty `c^T G c / 2` instead of `|c|^2 / 2`.
    pub fn with_metric(mut self, gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != self.basis.len() || gram.ncols() != self.basis.len() {
            return Err(Error::DimensionMismatch("metric must be square of the basis size".into()));
        }
        self.metric = Some(gram);
        Ok(self)
    }

    /// Penalty value and gradient.
    fn penalty(&self, c: &[f64]) -> (f64, Vec<f64>) {
        match &self.metric {
            None => (0.5 * c.iter().map(|x| x * x).sum::<f64>(), c.to_vec()),
            Some(g) => {
                let gc = g * DVector::from_column_slice(c);
                (0.5 * gc.iter().zip(c).map(|(a, b)| a * b).sum::<f64>(), gc.as_slice().to_vec())
            }
        }
    }

    pub fn basis(&self) -> &CmBasis {
        self.basis
    }

    pub fn skeleton(&self, c: &[f64]) -> Result<GridPath> {
        solve_skeleton(&self.basis.realize(c), self.vf)
    }

    pub fn value(&self, c: &[f64]) -> Result<f64> {
        Ok(self.functional.value(&self.skeleton(c)?) + self.penalty(c).0)
    }

    /// Value and exact gradient `c_j + dF(phi0)<chi(e_j)>` (`(G c)_j + ...`
    /// with a metric) of the discrete objective, through the adjoint of the
    /// skeleton scheme.
    pub fn value_and_gradient(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        let lin = linearize_skeleton(&self.basis.realize(c), self.vf)?;
        let (pen, pen_grad) = self.penalty(c);
        let value = self.functional.value(&lin.base) + pen;
        let r = lin.adjoint(&self.functional.gradient(&lin.base));
        let d = self.basis.dim();
        let grad = self
            .basis
            .entries()
            .iter()
            .zip(&pen_grad)
            .map(|(e, cj)| cj + (0..lin.steps.len()).map(|k| r[k * d + e.coordinate] * e.increment(k)).sum::<f64>())
            .collect();
        Ok((value, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Exit when the gradient norm drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of starts: the origin plus `starts - 1` random points.
    pub starts: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, starts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizerResult {
    pub coeffs: Vec<f64>,
    /// Minimal value `a` of the objective.
    pub value_a: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Iteration log of the winning start.
    pub log: Vec<IterationRecord>,
    /// Final value of every converged start.
    pub start_values: Vec<f64>,
    /// Whether all converged starts reached the same point.
    pub starts_agree: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// BFGS with Armijo backtracking from one start.
fn bfgs(obj: &RateObjective, start: Vec<f64>, opts: &MinimizeOptions) -> Result<MinimizerResult> {
    let dim = start.len();
    let mut x = DVector::from_vec(start);
    let (mut f, g) = obj.value_and_gradient(x.as_slice())?;
    let mut g = DVector::from_vec(g);
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let mut log = Vec::new();
    for iteration in 0..=opts.max_iter {
        let gn = g.norm();
        log.push(IterationRecord { iteration, value: f, gradient_norm: gn });
        if gn <= opts.tol {
            return Ok(MinimizerResult {
                coeffs: x.as_slice().to_vec(),
                value_a: f,
                gradient_norm: gn,
                iterations: iteration,
                log,
                start_values: vec![f],
                starts_agree: true,
            });
        }
        if iteration == opts.max_iter {
            break;
        }
        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(dim, dim);
            dir = -g.clone();
            slope = -gn * gn;
        }
        let noise = 1e-14 * (f.abs() + 1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * alpha;
            let (ft, gt) = obj.value_and_gradient(trial.as_slice())?;
            if ft <= f + 1e-4 * alpha * slope + noise {
                accepted = Some((trial, ft, DVector::from_vec(gt)));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            return Err(Error::NoDescent { iterations: iteration });
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
            hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    Err(Error::MaxIterations(opts.max_iter))
}

/// Multi-start quasi-Newton minimization of the rate objective with the
/// basis penalty `|c|^2 / 2`.
pub fn minimize_rate(
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    basis: &CmBasis,
    opts: &MinimizeOptions,
) -> Result<MinimizerResult> {
    minimize_objective(&RateObjective::new(vf, functional, basis)?, opts)
}

/// Same over the span of the basis, with the penalty measured in the exact
/// discrete Cameron–Martin norm of the driver at the basis level.
pub fn minimize_rate_discrete(
    params: &ParamSet,
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    basis: &CmBasis,
    opts: &MinimizeOptions,
) -> Result<MinimizerResult> {
    let factor = CovarianceFactor::new(&params.with_level(basis.level())?)?;
    let obj = RateObjective::new(vf, functional, basis)?.with_metric(discrete_gram(basis, &factor)?)?;
    minimize_objective(&obj, opts)
}

pub fn minimize_objective(obj: &RateObjective, opts: &MinimizeOptions) -> Result<MinimizerResult> {
    if !(opts.tol > 0.0) || opts.starts == 0 {
        return Err(Error::InvalidSpec("tolerance must be positive and at least one start is needed".into()));
    }
    let dim = obj.basis.len();
    let mut rng = rng_stream(opts.seed, u64::MAX);
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|s| {
            if s == 0 {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal) / (1.0 + s as f64)).collect()
            }
        })
        .collect();
    let mut results = Vec::new();
    let mut first_err = None;
    for start in starts {
        match bfgs(obj, start, opts) {
            Ok(r) => results.push(r),
            Err(e) => {
                log::warn!("minimizer start failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if results.is_empty() {
        return Err(first_err.expect("at least one start"));
    }
    let values: Vec<f64> = results.iter().map(|r| r.value_a).collect();
    let best = (0..results.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty");
    let agree = results.iter().all(|r| {
        let diff: Vec<f64> = r.coeffs.iter().zip(&results[best].coeffs).map(|(a, b)| a - b).collect();
        norm(&diff) <= 1e-4 * (1.0 + norm(&results[best].coeffs))
    });
    if !agree {
        log::warn!("minimizer starts disagree: values {values:?}");
    }
    let mut out = results.swap_remove(best);
    out.start_values = values;
    out.starts_agree = agree;
    Ok(out)
}
