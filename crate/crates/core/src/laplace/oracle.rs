//! Independent finite-dimensional Gaussian computations used as oracles for
//! the Laplace pipeline on affine systems with quadratic functionals.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::functional::PathFunctional;
use crate::drivers::{CmBasis, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::integrator::{solve_skeleton, LinearSystem, VectorField};
use crate::linalg::symmetric_eigenvalues;

fn block_diag_apply(blocks: &[f64], n: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for q in 0..m.nrows() / n {
        let b = DMatrix::from_row_slice(n, n, &blocks[q * n * n..(q + 1) * n * n]);
        out.rows_mut(q * n, n).copy_from(&(b * m.rows(q * n, n)));
    }
    out
}

fn factor_shifted_identity(k: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let dim = k.nrows();
    (DMatrix::identity(dim, dim) + k).cholesky().ok_or(Error::FactorizationFailed)
}

/// The truncated rate problem as an explicit quadratic program: with the
/// skeleton affine in the coefficients, `phi(c) = phi(0) + R c`, the
/// objective is `F(phi(0)) + l.c + c^T H c / 2 + c^T G c / 2` with `G` the
/// identity or a supplied metric.
#[derive(Debug, Clone, Serialize)]
pub struct QuadraticProgramOracle {
    pub minimizer: Vec<f64>,
    pub value_a: f64,
    /// Eigenvalues of `G^{-1} H`, `H = R^T P R`, decreasing.
    pub spectrum: Vec<f64>,
    /// `det(I + G^{-1} H)^{-1/2}`.
    pub alpha0: f64,
    /// `max |phi(2 e_j) - phi(0) - 2 R_j|` over a few probes; zero for
    /// affine skeleton maps.
    pub affinity_defect: f64,
}

impl QuadraticProgramOracle {
    pub fn new(
        vf: &dyn VectorField,
        functional: &dyn PathFunctional,
        basis: &CmBasis,
        metric: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let nb = basis.len();
        let zero = vec![0.0; nb];
        let base = solve_skeleton(&basis.realize(&zero), vf)?;
        let len = base.values().len();
        let n = base.dim();
        let mut r = DMatrix::<f64>::zeros(len, nb);
        for j in 0..nb {
            let y = solve_skeleton(&basis.realize_entry(j), vf)?;
            for (i, (a, b)) in y.values().iter().zip(base.values()).enumerate() {
                r[(i, j)] = a - b;
            }
        }
        let mut affinity_defect = 0.0f64;
        for j in [0, nb / 2, nb - 1] {
            let y = solve_skeleton(&basis.realize_entry(j).scaled(2.0), vf)?;
            for (i, (a, b)) in y.values().iter().zip(base.values()).enumerate() {
                affinity_defect = affinity_defect.max((a - b - 2.0 * r[(i, j)]).abs());
            }
        }
        let p = functional.hessian_blocks(&base);
        let g = DVector::from_vec(functional.gradient(&base));
        let h = r.transpose() * block_diag_apply(&p, n, &r);
        let h = (&h + h.transpose()) * 0.5;
        let l = r.transpose() * g;
        let gram = metric.cloned().unwrap_or_else(|| DMatrix::identity(nb, nb));
        let gchol = gram.clone().cholesky().ok_or(Error::FactorizationFailed)?;
        let chol = (&gram + &h).cholesky().ok_or(Error::FactorizationFailed)?;
        let sol = chol.solve(&l);
        let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| c.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
        let log_det = logdet(&chol) - logdet(&gchol);
        // G^{-1} H has the spectrum of L^{-1} H L^{-T}
        let gl = gchol.l();
        let left = gl.solve_lower_triangular(&h).ok_or(Error::FactorizationFailed)?;
        let whitened = gl.solve_lower_triangular(&left.transpose()).ok_or(Error::FactorizationFailed)?;
        Ok(Self {
            minimizer: (-&sol).as_slice().to_vec(),
            value_a: functional.value(&base) - 0.5 * l.dot(&sol),
            spectrum: symmetric_eigenvalues(&((&whitened + whitened.transpose()) * 0.5)),
            alpha0: (-0.5 * log_det).exp(),
            affinity_defect,
        })
    }
}

/// Exact Gaussian integral `J(eps) = E exp(-F(Y^eps) / eps^2)` of the
/// discretized linear model with quadratic `F`.
///
/// On the finest grid the scheme is the linear recursion
/// `y' = Phi y + (I + B dt / 2)(V z + b0 dt)`, `Phi = I + B dt + B^2 dt^2 / 2`,
/// so `Y = mu + eps G xi` with `xi` the standard normals behind the driver
/// increments. Then
/// `log J = -a / eps^2 - log det(I + K) / 2` with `K = G^T P G`,
/// `s = G^T grad F(mu)` and `a = F(mu) - s^T (I + K)^{-1} s / 2`.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteGaussianOracle {
    pub level: u32,
    /// Rate of the discrete model (unrestricted driver space).
    pub value_a: f64,
    pub log_det: f64,
    pub trace_k: f64,
    /// `J(eps) e^{a / eps^2}`, independent of `eps`.
    pub laplace_ratio: f64,
}

impl DiscreteGaussianOracle {
    pub fn new(sys: &LinearSystem, functional: &dyn PathFunctional, factor: &CovarianceFactor) -> Result<Self> {
        sys.validate()?;
        if sys.c.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidSpec("Gaussian oracle needs an eps-independent drift (c = 0)".into()));
        }
        let n = sys.b0.len();
        let (d1, d2) = (sys.a[0].len(), sys.a_hat[0].len());
        if factor.d1() != d1 || factor.d2() != d2 {
            return Err(Error::DimensionMismatch("covariance factor does not match the system drivers".into()));
        }
        let d = d1 + d2;
        let level = factor.level();
        let steps = factor.steps();
        let dt = 1.0 / steps as f64;
        let b = DMatrix::from_row_slice(n, n, &sys.drift_matrix());
        let v = DMatrix::from_row_slice(n, d, &sys.diffusion_matrix());
        let id = DMatrix::<f64>::identity(n, n);
        let phi = &id + &b * dt + &b * &b * (0.5 * dt * dt);
        let psi_v = (&id + &b * (0.5 * dt)) * &v;

        let mu = solve_skeleton(&GridPath::zeros(d, level), sys)?;
        let cols = d * steps;
        let mut g = DMatrix::<f64>::zeros((steps + 1) * n, cols);
        let l = factor.fbm_factor();
        let sqdt = dt.sqrt();
        for k in 0..steps {
            let prev = g.rows(k * n, n).into_owned();
            let mut next = &phi * prev;
            for c in 0..d {
                let col = psi_v.column(c);
                if c < d1 {
                    for i in 0..=k {
                        let lk = l[(k, i)];
                        for r in 0..n {
                            next[(r, c * steps + i)] += col[r] * lk;
                        }
                    }
                } else {
                    for r in 0..n {
                        next[(r, c * steps + k)] += col[r] * sqdt;
                    }
                }
            }
            g.rows_mut((k + 1) * n, n).copy_from(&next);
        }

        let p = functional.hessian_blocks(&mu);
        let grad = DVector::from_vec(functional.gradient(&mu));
        let pg = block_diag_apply(&p, n, &g);
        let kmat = g.transpose() * pg;
        let kmat = (&kmat + kmat.transpose()) * 0.5;
        let s = g.transpose() * grad;
        let chol = factor_shifted_identity(&kmat)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let value_a = functional.value(&mu) - 0.5 * s.dot(&chol.solve(&s));
        Ok(Self { level, value_a, log_det, trace_k: kmat.trace(), laplace_ratio: (-0.5 * log_det).exp() })
    }

    pub fn log_j(&self, eps: f64) -> f64 {
        -self.value_a / (eps * eps) - 0.5 * self.log_det
    }

    pub fn j(&self, eps: f64) -> f64 {
        self.log_j(eps).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamSet;
    use crate::drivers::rng_stream;
    use crate::integrator::{solve_rde, SystemSpec};
    use crate::laplace::{FunctionalSpec, QuadraticFunctional};
    use crate::linalg::mean_stderr;
    use crate::rough::dyadic_lift;

    fn linear() -> LinearSystem {
        match SystemSpec::linear_toy() {
            SystemSpec::Linear(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn qp_oracle_is_affine_and_optimal() {
        let p = ParamSet::from_recipe(0.4, 0.01, 1, 1, 2, 7, 1).unwrap();
        let basis = CmBasis::new(&p, 6, 7).unwrap();
        let sys = linear();
        let spec = FunctionalSpec::builtin("quadratic", 2).unwrap();
        let o = QuadraticProgramOracle::new(&sys, spec.as_functional(), &basis, None).unwrap();
        assert!(o.affinity_defect < 1e-12);
        let obj = super::super::RateObjective::new(&sys, spec.as_functional(), &basis).unwrap();
        let (v, grad) = obj.value_and_gradient(&o.minimizer).unwrap();
        assert!((v - o.value_a).abs() < 1e-12);
        assert!(grad.iter().all(|x| x.abs() < 1e-10));
        let gram = super::super::discrete_gram(&basis, &CovarianceFactor::new(&p).unwrap()).unwrap();
        let om = QuadraticProgramOracle::new(&sys, spec.as_functional(), &basis, Some(&gram)).unwrap();
        let obj = super::super::RateObjective::new(&sys, spec.as_functional(), &basis).unwrap().with_metric(gram).unwrap();
        let (v, grad) = obj.value_and_gradient(&om.minimizer).unwrap();
        assert!((v - om.value_a).abs() < 1e-12);
        assert!(grad.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn gaussian_oracle_matches_brute_force_monte_carlo() {
        let level = 5;
        let factor = CovarianceFactor::build(0.4, level, 1, 1).unwrap();
        let sys = linear();
        let f = QuadraticFunctional { q: vec![vec![1.0, 0.2], vec![0.2, 0.5]], w: vec![], target: vec![0.3, -0.2] };
        let o = DiscreteGaussianOracle::new(&sys, &f, &factor).unwrap();
        let eps = 0.7;
        let vals: Vec<f64> = (0..20000)
            .map(|i| {
                let x = factor.sample(&mut rng_stream(11, i));
                let y = solve_rde(&dyadic_lift(&x), eps, &sys, None, None).unwrap();
                (-f.value(&y) / (eps * eps)).exp()
            })
            .collect();
        let s = mean_stderr(&vals);
        assert!((s.mean - o.j(eps)).abs() < 3.0 * s.stderr, "{} +- {} vs {}", s.mean, s.stderr, o.j(eps));
    }

    #[test]
    fn gaussian_oracle_mean_path_functional_is_exact() {
        // F(y) = y_1^2 / 2 with Y_1 = mu + eps s Z:
        // J = (1 + s^2)^{-1/2} exp(-mu^2 / (2 eps^2 (1 + s^2)))
        let level = 6;
        let factor = CovarianceFactor::build(0.4, level, 1, 1).unwrap();
        let sys = LinearSystem {
            a: vec![vec![0.0]],
            a_hat: vec![vec![1.0]],
            b: vec![vec![0.0]],
            b0: vec![0.5],
            c: vec![0.0],
            y0: vec![],
            bound: 1e6,
        };
        let f = QuadraticFunctional { q: vec![vec![1.0]], w: vec![], target: vec![] };
        let o = DiscreteGaussianOracle::new(&sys, &f, &factor).unwrap();
        let (mu, s2) = (0.5f64, 1.0f64);
        assert!((o.log_det - (1.0 + s2).ln()).abs() < 1e-12);
        assert!((o.value_a - mu * mu / (2.0 * (1.0 + s2))).abs() < 1e-12);
    }
}
