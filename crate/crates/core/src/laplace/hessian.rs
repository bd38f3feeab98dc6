use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::functional::PathFunctional;
use crate::config::ParamSet;
use crate::drivers::{rng_stream, BlockKind, CmBasis, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::integrator::{FlowBundle, VectorField};
use crate::linalg::{max_abs_asymmetry, mean_stderr, symmetric_eigenvalues, symmetrize, MeanStderr};

fn as_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn as_mean_stderr<S: Serializer>(m: &Option<MeanStderr>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.map(|v| [v.mean, v.stderr]).serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisLabel {
    pub kind: BlockKind,
    pub coordinate: usize,
    pub mode: usize,
}

/// Second derivative of `F o Psi` at the minimizer on the truncated basis.
#[derive(Debug, Clone, Serialize)]
pub struct HessianAssembly {
    pub truncation: usize,
    pub basis: Vec<BasisLabel>,
    /// Symmetrized `A`.
    #[serde(serialize_with = "as_rows")]
    pub a: DMatrix<f64>,
    /// The part of `A` coming from the first-derivative terms of `psi^2`.
    #[serde(serialize_with = "as_rows")]
    pub a1: DMatrix<f64>,
    pub trace_a_minus_a1: f64,
    /// `dF(phi0)<Lambda>` as `[mean, stderr]`, once estimated.
    #[serde(serialize_with = "as_mean_stderr")]
    pub lambda_functional: Option<MeanStderr>,
    /// Eigenvalues of `A`, decreasing.
    pub spectrum: Vec<f64>,
    /// `max |A - A^T|` before symmetrization.
    pub asymmetry: f64,
    pub hs_norm_sq: f64,
    /// `sum_{m > N} (1 + m)^{-2 (1/q - 1/p)}`.
    pub hs_tail: f64,
}

/// Per-point quantities shared by the Hessian and the `Lambda` estimate.
struct Adjoint<'b, 'a> {
    fb: &'b FlowBundle<'a>,
    /// `lambda_j = sum_{t > j} M_t^T g_t`, one per interval.
    lambda: Vec<DVector<f64>>,
}

impl<'b, 'a> Adjoint<'b, 'a> {
    fn new(fb: &'b FlowBundle<'a>, functional: &dyn PathFunctional) -> Self {
        let n = fb.state_dim();
        let g = functional.gradient(fb.phi0());
        let steps = fb.steps();
        let mut lambda = vec![DVector::zeros(n); steps];
        let mut acc = DVector::zeros(n);
        for j in (0..steps).rev() {
            let gt = DVector::from_column_slice(&g[(j + 1) * n..(j + 2) * n]);
            acc += fb.m(j + 1).transpose() * gt;
            lambda[j] = acc.clone();
        }
        Self { fb, lambda }
    }

    /// `w_j = lambda_j^T (U_j + U_{j+1}) / 2` with `U = M^{-1} DV<x>`, as a
    /// `steps x d` row-major buffer.
    fn weights_along(&self, x: &GridPath) -> Vec<f64> {
        let d = self.fb.driver_dim();
        let u: Vec<DMatrix<f64>> = (0..=self.fb.steps()).map(|j| self.fb.pulled_dv(j, x.point(j))).collect();
        let mut w = vec![0.0; self.fb.steps() * d];
        for j in 0..self.fb.steps() {
            let row = self.lambda[j].transpose() * (&u[j] + &u[j + 1]) * 0.5;
            w[j * d..(j + 1) * d].copy_from_slice(row.as_slice());
        }
        w
    }

    /// `dF(phi0)<V1(x, x)>` for a driver path `x`.
    fn v1_diagonal(&self, x: &GridPath) -> Result<f64> {
        let chi = self.fb.chi(x)?;
        let d = self.fb.driver_dim();
        let w = self.weights_along(&chi);
        Ok(2.0 * (0..self.fb.steps()).map(|j| (0..d).map(|c| w[j * d + c] * x.increment(j, c)).sum::<f64>()).sum::<f64>())
    }

    /// Per-point `n x n` kernels `K_q` with
    /// `dF<V2(f, k)> + d2F<chi f, chi k> = sum_q chi_f(q)^T K_q chi_k(q)`.
    fn second_order_kernels(&self, hessian: &[f64]) -> Vec<DMatrix<f64>> {
        let fb = self.fb;
        let (n, d, steps) = (fb.state_dim(), fb.driver_dim(), fb.steps());
        let dt = fb.phi0().dt();
        let h = fb.shift();
        let mut e_u = vec![0.0; n];
        let mut e_w = vec![0.0; n];
        (0..=steps)
            .map(|q| {
                let mut k = DMatrix::from_row_slice(n, n, &hessian[q * n * n..(q + 1) * n * n]);
                for u in 0..n {
                    for w in u..n {
                        e_u[u] = 1.0;
                        e_w[w] = 1.0;
                        let ddv = fb.ddv(q, &e_u, &e_w);
                        let ddb = fb.ddb(q, &e_u, &e_w);
                        e_u[u] = 0.0;
                        e_w[w] = 0.0;
                        let mut val = 0.0;
                        for (interval, present) in [(q.wrapping_sub(1), q >= 1), (q, q < steps)] {
                            if !present {
                                continue;
                            }
                            let dh = DVector::from_iterator(d, (0..d).map(|c| h.increment(interval, c)));
                            let src = &ddv * dh + &ddb * dt;
                            val += 0.5 * self.lambda[interval].dot(&(fb.minv(q) * src));
                        }
                        k[(u, w)] += val;
                        if w != u {
                            k[(w, u)] += val;
                        }
                    }
                }
                k
            })
            .collect()
    }
}

fn hs_tail(params: &ParamSet, truncation: usize) -> f64 {
    let expo = 2.0 * (1.0 / params.q - 1.0 / params.p);
    // the summand decays like m^{-expo}; truncate where it drops below 1e-16
    // of the first term, then add the integral remainder
    let terms = 200_000usize;
    let partial: f64 = (truncation + 1..truncation + 1 + terms).map(|m| (1.0 + m as f64).powf(-expo)).sum();
    let last = (truncation + terms) as f64 + 1.0;
    let rest = if expo > 1.0 { last.powf(1.0 - expo) / (expo - 1.0) } else { f64::INFINITY };
    partial + rest
}

fn labels(basis: &CmBasis) -> Vec<BasisLabel> {
    basis.entries().iter().map(|e| BasisLabel { kind: e.kind, coordinate: e.coordinate, mode: e.mode }).collect()
}

/// Builds `A` from the closed-form flows at the realization of `coeffs`.
///
/// The `V1` part is `X + X^T` with `X[a][b] = sum_j w^a_j . Delta f_b(j)`;
/// the second-order part is `Xi K Xi^T` with `Xi` the stacked first
/// variations and `K` block diagonal in time.
pub fn assemble_hessian(
    params: &ParamSet,
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    basis: &CmBasis,
    coeffs: &[f64],
) -> Result<HessianAssembly> {
    if coeffs.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} basis elements", coeffs.len(), basis.len())));
    }
    let fb = FlowBundle::new(vf, &basis.realize(coeffs))?;
    let adj = Adjoint::new(&fb, functional);
    let (n, d, steps) = (fb.state_dim(), fb.driver_dim(), fb.steps());
    let nb = basis.len();
    let directions: Vec<GridPath> = (0..nb).map(|a| basis.realize_entry(a)).collect();
    let per_entry: Vec<(GridPath, Vec<f64>)> = directions
        .par_iter()
        .map(|k| {
            let chi = fb.chi(k)?;
            let w = adj.weights_along(&chi);
            Ok((chi, w))
        })
        .collect::<Result<_>>()?;

    let mut x = DMatrix::<f64>::zeros(nb, nb);
    for c in 0..d {
        let wc = DMatrix::from_fn(nb, steps, |a, j| per_entry[a].1[j * d + c]);
        let dc = DMatrix::from_fn(steps, nb, |j, b| {
            let e = basis.entry(b);
            if e.coordinate == c {
                e.increment(j)
            } else {
                0.0
            }
        });
        x += wc * dc;
    }
    let a1 = &x + x.transpose();

    let kernels = adj.second_order_kernels(&functional.hessian_blocks(fb.phi0()));
    let points = steps + 1;
    let xi = DMatrix::from_fn(nb, points * n, |a, r| per_entry[a].0.point(r / n)[r % n]);
    let mut xk = DMatrix::<f64>::zeros(nb, points * n);
    for (q, kq) in kernels.iter().enumerate() {
        let block = xi.columns(q * n, n) * kq;
        xk.columns_mut(q * n, n).copy_from(&block);
    }
    let a2 = xk * xi.transpose();
    let raw = &a1 + &a2;
    let asymmetry = max_abs_asymmetry(&raw);
    let a = symmetrize(&raw);
    let spectrum = symmetric_eigenvalues(&a);
    Ok(HessianAssembly {
        truncation: basis.truncation(),
        basis: labels(basis),
        trace_a_minus_a1: a2.trace(),
        hs_norm_sq: a.iter().map(|v| v * v).sum(),
        hs_tail: hs_tail(params, basis.truncation()),
        a,
        a1,
        lambda_functional: None,
        spectrum,
        asymmetry,
    })
}

/// `A` entry by entry from path-level second variations,
/// `d2F<chi_a, chi_b> + dF<psi^2(f_a, f_b)>`, without symmetrization.
pub fn assemble_hessian_pathwise(
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    basis: &CmBasis,
    coeffs: &[f64],
) -> Result<DMatrix<f64>> {
    let fb = FlowBundle::new(vf, &basis.realize(coeffs))?;
    let n = fb.state_dim();
    let g = functional.gradient(fb.phi0());
    let h = functional.hessian_blocks(fb.phi0());
    let nb = basis.len();
    let directions: Vec<GridPath> = (0..nb).map(|a| basis.realize_entry(a)).collect();
    let chis: Vec<GridPath> = directions.iter().map(|k| fb.chi(k)).collect::<Result<_>>()?;
    let entries: Vec<f64> = (0..nb * nb)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / nb, idx % nb);
            let psi = fb.second_variation(&directions[a], &directions[b])?.total();
            let first: f64 = psi.values().iter().zip(&g).map(|(p, q)| p * q).sum();
            let mut second = 0.0;
            for q in 0..=fb.steps() {
                let (u, w) = (chis[a].point(q), chis[b].point(q));
                for i in 0..n {
                    for j in 0..n {
                        second += u[i] * h[q * n * n + i * n + j] * w[j];
                    }
                }
            }
            Ok(first + second)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_row_slice(nb, nb, &entries))
}

/// Monte Carlo estimate of `dF(phi0)<Lambda>`, the mean of
/// `dF(phi0)<V1(X, X)>` over drivers sampled at the basis level. Sample `i`
/// uses stream `i` of `params.seed`.
pub fn estimate_lambda(
    params: &ParamSet,
    vf: &dyn VectorField,
    functional: &dyn PathFunctional,
    basis: &CmBasis,
    coeffs: &[f64],
    samples: usize,
) -> Result<MeanStderr> {
    if samples < 2 {
        return Err(Error::InvalidSpec("Lambda estimate needs at least 2 samples".into()));
    }
    let params = params.with_level(basis.level())?;
    let fb = FlowBundle::new(vf, &basis.realize(coeffs))?;
    let adj = Adjoint::new(&fb, functional);
    let factor = CovarianceFactor::new(&params)?;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| adj.v1_diagonal(&factor.sample(&mut rng_stream(params.seed, i as u64))))
        .collect::<Result<_>>()?;
    Ok(mean_stderr(&vals))
}

impl HessianAssembly {
    /// The same bilinear form in a basis orthonormal for the metric `gram`
    /// (`A -> L^{-1} A L^{-T}` with `gram = L L^T`). Labels keep referring
    /// to the original basis.
    pub fn in_metric(&self, gram: &DMatrix<f64>) -> Result<Self> {
        let nb = self.a.nrows();
        if gram.nrows() != nb || gram.ncols() != nb {
            return Err(Error::DimensionMismatch("metric must match the assembly size".into()));
        }
        let chol = gram.clone().cholesky().ok_or(Error::FactorizationFailed)?;
        let l = chol.l();
        let congruence = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let left = l.solve_lower_triangular(m).ok_or(Error::FactorizationFailed)?;
            let both = l.solve_lower_triangular(&left.transpose()).ok_or(Error::FactorizationFailed)?;
            Ok(symmetrize(&both))
        };
        let a = congruence(&self.a)?;
        let a1 = congruence(&self.a1)?;
        Ok(Self {
            trace_a_minus_a1: a.trace() - a1.trace(),
            hs_norm_sq: a.iter().map(|v| v * v).sum(),
            spectrum: symmetric_eigenvalues(&a),
            a,
            a1,
            ..self.clone()
        })
    }

    pub fn with_lambda(mut self, lambda: MeanStderr) -> Self {
        self.lambda_functional = Some(lambda);
        self
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.last().copied().unwrap_or(0.0)
    }
}
