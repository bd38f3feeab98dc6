use nalgebra::DMatrix;

use super::scheme::increment;
use super::vector_field::VectorField;
use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Exact derivative of one Heun skeleton step `y' = S(y, z)`:
/// `dy' = P du + Q dz` with `P` (`n x n`) and `Q` (`n x d`).
#[derive(Debug, Clone)]
pub struct StepLinearization {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Linearization of the whole skeleton solve around a shift.
#[derive(Debug, Clone)]
pub struct SkeletonLinearization {
    pub base: GridPath,
    pub steps: Vec<StepLinearization>,
}

/// `J(y) u = DV(y)<u> z + D_y beta(0, y) u dt` as an `n x n` matrix.
fn rate_jacobian(vf: &dyn VectorField, y: &[f64], z: &[f64], dt: f64, dv: &mut [f64], db: &mut [f64]) -> DMatrix<f64> {
    let n = y.len();
    let d = z.len();
    let mut j = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for l in 0..n {
        e[l] = 1.0;
        vf.diffusion_d(y, &e, dv);
        vf.drift_dy(0.0, y, &e, db);
        for i in 0..n {
            j[(i, l)] = dv[i * d..(i + 1) * d].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + db[i] * dt;
        }
        e[l] = 0.0;
    }
    j
}

pub fn linearize_skeleton(shift: &GridPath, vf: &dyn VectorField) -> Result<SkeletonLinearization> {
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    if shift.dim() != d {
        return Err(Error::DimensionMismatch("shift dim".into()));
    }
    let dt = shift.dt();
    let steps = shift.steps();
    let mut values = vec![0.0; (steps + 1) * n];
    values[..n].copy_from_slice(&vf.initial_state());
    let (mut v, mut b, mut a0, mut a1, mut pred) = (vec![0.0; n * d], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut dv, mut db) = (vec![0.0; n * d], vec![0.0; n]);
    let mut z = vec![0.0; d];
    let ident = DMatrix::<f64>::identity(n, n);
    let mut lin = Vec::with_capacity(steps);
    for k in 0..steps {
        let y: Vec<f64> = values[k * n..(k + 1) * n].to_vec();
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = shift.increment(k, c);
        }
        increment(vf, 0.0, &y, &z, dt, &mut v, &mut b, &mut a0);
        let vy = DMatrix::from_row_slice(n, d, &v);
        for i in 0..n {
            pred[i] = y[i] + a0[i];
        }
        increment(vf, 0.0, &pred, &z, dt, &mut v, &mut b, &mut a1);
        let vp = DMatrix::from_row_slice(n, d, &v);
        for i in 0..n {
            values[(k + 1) * n + i] = y[i] + 0.5 * (a0[i] + a1[i]);
        }
        if !vf.in_box(&values[(k + 1) * n..(k + 2) * n]) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        let jy = rate_jacobian(vf, &y, &z, dt, &mut dv, &mut db);
        let jp = rate_jacobian(vf, &pred, &z, dt, &mut dv, &mut db);
        let p = &ident + &jy * 0.5 + &jp * (&ident + &jy) * 0.5;
        let q = (&vy + &vp) * 0.5 + &jp * &vy * 0.5;
        lin.push(StepLinearization { p, q });
    }
    Ok(SkeletonLinearization { base: GridPath::from_state_values(n, shift.level(), values)?, steps: lin })
}

impl SkeletonLinearization {
    pub fn state_dim(&self) -> usize {
        self.base.dim()
    }

    /// Tangent `u_{k+1} = P_k u_k + Q_k dk_k`, `u_0 = 0`.
    pub fn tangent(&self, k: &GridPath) -> Result<GridPath> {
        if k.steps() != self.steps.len() {
            return Err(Error::LevelMismatch { expected: self.base.level(), found: k.level() });
        }
        let n = self.state_dim();
        let mut u = nalgebra::DVector::zeros(n);
        let mut values = vec![0.0; (self.steps.len() + 1) * n];
        for (j, s) in self.steps.iter().enumerate() {
            let dk = nalgebra::DVector::from_iterator(k.dim(), (0..k.dim()).map(|c| k.increment(j, c)));
            u = &s.p * u + &s.q * dk;
            values[(j + 1) * n..(j + 2) * n].copy_from_slice(u.as_slice());
        }
        GridPath::from_values(n, self.base.level(), values)
    }

    /// For a linear functional `sum_k g_k . u_k` of the tangent (`g` is
    /// points x n), returns per-step driver sensitivities `r_k = Q_k^T a_{k+1}`
    /// (steps x d) with the adjoint `a_N = g_N`, `a_k = g_k + P_k^T a_{k+1}`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        let n = self.state_dim();
        let steps = self.steps.len();
        let d = self.steps.first().map_or(0, |s| s.q.ncols());
        let mut r = vec![0.0; steps * d];
        let mut a = nalgebra::DVector::from_column_slice(&g[steps * n..(steps + 1) * n]);
        for k in (0..steps).rev() {
            let rk = self.steps[k].q.tr_mul(&a);
            r[k * d..(k + 1) * d].copy_from_slice(rk.as_slice());
            a = self.steps[k].p.tr_mul(&a) + nalgebra::DVector::from_column_slice(&g[k * n..(k + 1) * n]);
        }
        r
    }
}
