//! Variation flows along a skeleton base point, in closed
//! (variation-of-constants) form with `M_t`, `M_t^{-1}`, plus the direct
//! routes through the discrete scheme used to cross-check them.
//!
//! Conventions: `DV(y)<u>` is the `n x d` matrix of directional derivatives,
//! and acts on driver increments from the right. Young integrals inside the
//! flows use the trapezoid rule.

use nalgebra::{DMatrix, DVector};

use super::jet::solve_jets;
use super::scheme::solve_skeleton;
use super::vector_field::VectorField;
use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Flows along one base point `(gamma, eta)` (given by its grid realization).
pub struct FlowBundle<'a> {
    vf: &'a dyn VectorField,
    shift: GridPath,
    phi0: GridPath,
    m: Vec<DMatrix<f64>>,
    minv: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    g: Vec<DMatrix<f64>>,
}

/// `psi^2 = V1 + V2`: `V1` collects the first-derivative terms, `V2` the
/// second-derivative terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondVariation {
    pub v1: GridPath,
    pub v2: GridPath,
}

impl SecondVariation {
    pub fn total(&self) -> GridPath {
        self.v1.axpy(1.0, &self.v2).expect("same grid")
    }
}

fn dot_rows(m: &DMatrix<f64>, z: &[f64]) -> DVector<f64> {
    m * DVector::from_column_slice(z)
}

impl<'a> FlowBundle<'a> {
    pub fn new(vf: &'a dyn VectorField, shift: &GridPath) -> Result<Self> {
        let phi0 = solve_skeleton(shift, vf)?;
        let (n, d) = (vf.state_dim(), vf.driver_dim());
        let steps = shift.steps();
        let dt = shift.dt();
        let mut bundle = Self {
            vf,
            shift: shift.clone(),
            phi0,
            m: Vec::with_capacity(steps + 1),
            minv: Vec::with_capacity(steps + 1),
            v: Vec::with_capacity(steps + 1),
            g: Vec::with_capacity(steps + 1),
        };
        bundle.m.push(DMatrix::identity(n, n));
        bundle.minv.push(DMatrix::identity(n, n));
        let mut z = vec![0.0; d];
        for k in 0..steps {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = shift.increment(k, c);
            }
            let omega = (bundle.rate_jacobian(k, &z, dt) + bundle.rate_jacobian(k + 1, &z, dt)) * 0.5;
            let step = omega.clone().exp();
            let back = (-omega).exp();
            let next = &step * &bundle.m[k];
            let next_inv = &bundle.minv[k] * &back;
            if next.iter().chain(next_inv.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteState { step: k + 1 });
            }
            bundle.m.push(next);
            bundle.minv.push(next_inv);
        }
        let mut buf = vec![0.0; n * d];
        for j in 0..=steps {
            vf.diffusion(bundle.phi0.point(j), &mut buf);
            let vj = DMatrix::from_row_slice(n, d, &buf);
            bundle.g.push(&bundle.minv[j] * &vj);
            bundle.v.push(vj);
        }
        Ok(bundle)
    }

    /// `u -> DV(phi_j)<u> z + D_y beta(0, phi_j) u dt`.
    fn rate_jacobian(&self, j: usize, z: &[f64], dt: f64) -> DMatrix<f64> {
        let n = self.vf.state_dim();
        let y = self.phi0.point(j);
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut db = vec![0.0; n];
        for l in 0..n {
            e[l] = 1.0;
            let col = dot_rows(&self.dv(j, &e), z);
            self.vf.drift_dy(0.0, y, &e, &mut db);
            for i in 0..n {
                out[(i, l)] = col[i] + db[i] * dt;
            }
            e[l] = 0.0;
        }
        out
    }

    pub fn vector_field(&self) -> &dyn VectorField {
        self.vf
    }

    pub fn shift(&self) -> &GridPath {
        &self.shift
    }

    pub fn phi0(&self) -> &GridPath {
        &self.phi0
    }

    pub fn steps(&self) -> usize {
        self.phi0.steps()
    }

    pub fn state_dim(&self) -> usize {
        self.phi0.dim()
    }

    pub fn driver_dim(&self) -> usize {
        self.shift.dim()
    }

    /// Jacobian flow `M_t` at grid point `j`.
    pub fn m(&self, j: usize) -> &DMatrix<f64> {
        &self.m[j]
    }

    pub fn minv(&self, j: usize) -> &DMatrix<f64> {
        &self.minv[j]
    }

    /// `max_j |M_j M_j^{-1} - I|`.
    pub fn inverse_defect(&self) -> f64 {
        let n = self.state_dim();
        let id = DMatrix::<f64>::identity(n, n);
        self.m.iter().zip(&self.minv).map(|(a, b)| (a * b - &id).amax()).fold(0.0, f64::max)
    }

    /// `DV(phi_j)<u>`.
    pub(crate) fn dv(&self, j: usize, u: &[f64]) -> DMatrix<f64> {
        let (n, d) = (self.state_dim(), self.driver_dim());
        let mut buf = vec![0.0; n * d];
        self.vf.diffusion_d(self.phi0.point(j), u, &mut buf);
        DMatrix::from_row_slice(n, d, &buf)
    }

    pub(crate) fn ddv(&self, j: usize, u: &[f64], w: &[f64]) -> DMatrix<f64> {
        let (n, d) = (self.state_dim(), self.driver_dim());
        let mut buf = vec![0.0; n * d];
        self.vf.diffusion_dd(self.phi0.point(j), u, w, &mut buf);
        DMatrix::from_row_slice(n, d, &buf)
    }

    pub(crate) fn ddb(&self, j: usize, u: &[f64], w: &[f64]) -> DVector<f64> {
        let mut buf = vec![0.0; self.state_dim()];
        self.vf.drift_dyy(0.0, self.phi0.point(j), u, w, &mut buf);
        DVector::from_vec(buf)
    }

    /// `M_j^{-1} DV(phi_j)<u>`.
    pub(crate) fn pulled_dv(&self, j: usize, u: &[f64]) -> DMatrix<f64> {
        &self.minv[j] * self.dv(j, u)
    }

    fn check_direction(&self, k: &GridPath) -> Result<()> {
        if k.level() != self.phi0.level() {
            return Err(Error::LevelMismatch { expected: self.phi0.level(), found: k.level() });
        }
        if k.dim() != self.driver_dim() {
            return Err(Error::DimensionMismatch("direction dim".into()));
        }
        Ok(())
    }

    /// `x_{j+1} = M_{j+1} sum_{i <= j} c_i` for pulled-back interval
    /// contributions `c_i`.
    fn propagate(&self, contributions: impl Fn(usize) -> DVector<f64>) -> GridPath {
        let n = self.state_dim();
        let mut acc = DVector::zeros(n);
        let mut values = vec![0.0; (self.steps() + 1) * n];
        for j in 0..self.steps() {
            acc += contributions(j);
            let x = &self.m[j + 1] * &acc;
            values[(j + 1) * n..(j + 2) * n].copy_from_slice(x.as_slice());
        }
        GridPath::from_values(n, self.phi0.level(), values).expect("flow stays finite")
    }

    fn trapezoid(first: &DMatrix<f64>, second: &DMatrix<f64>, path: &GridPath, j: usize) -> DVector<f64> {
        let dz: Vec<f64> = (0..path.dim()).map(|c| path.increment(j, c)).collect();
        dot_rows(&(first + second), &dz) * 0.5
    }

    /// First variation `chi_t = M_t int_0^t M^{-1} V(phi0) dk`.
    pub fn chi(&self, k: &GridPath) -> Result<GridPath> {
        self.check_direction(k)?;
        Ok(self.propagate(|j| Self::trapezoid(&self.g[j], &self.g[j + 1], k, j)))
    }

    /// First variation as the exact tangent of the discrete skeleton scheme.
    pub fn chi_direct(&self, k: &GridPath) -> Result<GridPath> {
        self.check_direction(k)?;
        Ok(solve_jets(self.vf, &self.shift, k, 0.0)?.first)
    }

    /// Pulled-back `M^{-1} DV<path>` at every grid point.
    fn pulled_along(&self, path: &GridPath) -> Vec<DMatrix<f64>> {
        (0..=self.steps()).map(|j| self.pulled_dv(j, path.point(j))).collect()
    }

    fn v1_from_chis(&self, f: &GridPath, k: &GridPath, chi_f: &GridPath, chi_k: &GridPath) -> GridPath {
        let uf = self.pulled_along(chi_f);
        let uk = self.pulled_along(chi_k);
        self.propagate(|j| Self::trapezoid(&uf[j], &uf[j + 1], k, j) + Self::trapezoid(&uk[j], &uk[j + 1], f, j))
    }

    /// Second variation `psi^2(f, k)`.
    pub fn second_variation(&self, f: &GridPath, k: &GridPath) -> Result<SecondVariation> {
        self.check_direction(f)?;
        self.check_direction(k)?;
        let (chi_f, chi_k) = (self.chi(f)?, self.chi(k)?);
        let v1 = self.v1_from_chis(f, k, &chi_f, &chi_k);
        let dt = self.phi0.dt();
        let w: Vec<DMatrix<f64>> =
            (0..=self.steps()).map(|j| &self.minv[j] * self.ddv(j, chi_f.point(j), chi_k.point(j))).collect();
        let b: Vec<DVector<f64>> =
            (0..=self.steps()).map(|j| &self.minv[j] * self.ddb(j, chi_f.point(j), chi_k.point(j))).collect();
        let v2 = self.propagate(|j| Self::trapezoid(&w[j], &w[j + 1], &self.shift, j) + (&b[j] + &b[j + 1]) * (0.5 * dt));
        Ok(SecondVariation { v1, v2 })
    }

    /// Second variation by polarization of the scheme's second-order jets.
    pub fn second_variation_direct(&self, f: &GridPath, k: &GridPath) -> Result<GridPath> {
        self.check_direction(f)?;
        self.check_direction(k)?;
        let plus = solve_jets(self.vf, &self.shift, &f.axpy(1.0, k)?, 0.0)?.second;
        let minus = solve_jets(self.vf, &self.shift, &f.axpy(-1.0, k)?, 0.0)?.second;
        Ok(plus.axpy(-1.0, &minus)?.scaled(0.5))
    }

    /// The two pieces of the first-derivative part of `psi^2`:
    /// `R1(f, k) = M int M^{-1} DV<V f> dk` and
    /// `R2(f, k) = M int M^{-1} DV<M I^f> dk` with
    /// `I^f_t = int_0^t d(M^{-1} V) f`, so that
    /// `V1 = R1(f,k) + R1(k,f) - R2(f,k) - R2(k,f)`.
    pub fn r1_r2_terms(&self, f: &GridPath, k: &GridPath) -> Result<(GridPath, GridPath)> {
        self.check_direction(f)?;
        self.check_direction(k)?;
        let n = self.state_dim();
        let s: Vec<DMatrix<f64>> = (0..=self.steps())
            .map(|j| {
                let vf_j = dot_rows(&self.v[j], f.point(j));
                self.pulled_dv(j, vf_j.as_slice())
            })
            .collect();
        let mut integral = DVector::zeros(n);
        let mut t = Vec::with_capacity(self.steps() + 1);
        for j in 0..=self.steps() {
            if j > 0 {
                let mid: Vec<f64> = f.point(j - 1).iter().zip(f.point(j)).map(|(a, b)| 0.5 * (a + b)).collect();
                integral += dot_rows(&(&self.g[j] - &self.g[j - 1]), &mid);
            }
            let arg = &self.m[j] * &integral;
            t.push(self.pulled_dv(j, arg.as_slice()));
        }
        let r1 = self.propagate(|j| Self::trapezoid(&s[j], &s[j + 1], k, j));
        let r2 = self.propagate(|j| Self::trapezoid(&t[j], &t[j + 1], k, j));
        Ok((r1, r2))
    }

    /// `V1` reassembled from the `R1`/`R2` split.
    pub fn v1_from_r_terms(&self, f: &GridPath, k: &GridPath) -> Result<GridPath> {
        let (r1_fk, r2_fk) = self.r1_r2_terms(f, k)?;
        let (r1_kf, r2_kf) = self.r1_r2_terms(k, f)?;
        r1_fk.axpy(1.0, &r1_kf)?.axpy(-1.0, &r2_fk)?.axpy(-1.0, &r2_kf)
    }

    fn drift_eps(&self, j: usize) -> DVector<f64> {
        let mut buf = vec![0.0; self.state_dim()];
        self.vf.drift_de(0.0, self.phi0.point(j), &mut buf);
        DVector::from_vec(buf)
    }

    /// `theta^1 = M int M^{-1} d_eps beta(0, phi0) dt`.
    pub fn theta1(&self) -> GridPath {
        let dt = self.phi0.dt();
        let pulled: Vec<DVector<f64>> = (0..=self.steps()).map(|j| &self.minv[j] * self.drift_eps(j)).collect();
        self.propagate(|j| (&pulled[j] + &pulled[j + 1]) * (0.5 * dt))
    }

    /// Second-order noise-intensity term `theta^2(k)`: the part of the
    /// second Taylor coefficient that involves `theta^1`.
    pub fn theta2(&self, k: &GridPath) -> Result<GridPath> {
        self.check_direction(k)?;
        let n = self.state_dim();
        let dt = self.phi0.dt();
        let th = self.theta1();
        let chi = self.chi(k)?;
        let mut buf = vec![0.0; n];
        let mut a = Vec::with_capacity(self.steps() + 1);
        let mut bmat = Vec::with_capacity(self.steps() + 1);
        let mut bvec = Vec::with_capacity(self.steps() + 1);
        for j in 0..=self.steps() {
            let (t1, c) = (th.point(j), chi.point(j));
            let y = self.phi0.point(j);
            a.push(self.pulled_dv(j, t1));
            bmat.push(&self.minv[j] * (self.ddv(j, t1, t1) * 0.5 + self.ddv(j, t1, c)));
            let mut src = self.ddb(j, t1, t1) * 0.5 + self.ddb(j, t1, c);
            let sum: Vec<f64> = t1.iter().zip(c).map(|(p, q)| p + q).collect();
            self.vf.drift_dye(0.0, y, &sum, &mut buf);
            src += DVector::from_column_slice(&buf);
            self.vf.drift_dee(0.0, y, &mut buf);
            src += DVector::from_column_slice(&buf) * 0.5;
            bvec.push(&self.minv[j] * src);
        }
        Ok(self.propagate(|j| {
            Self::trapezoid(&a[j], &a[j + 1], k, j)
                + Self::trapezoid(&bmat[j], &bmat[j + 1], &self.shift, j)
                + (&bvec[j] + &bvec[j + 1]) * (0.5 * dt)
        }))
    }

    pub fn theta1_direct(&self) -> Result<GridPath> {
        let zero = GridPath::zeros(self.driver_dim(), self.phi0.level());
        Ok(solve_jets(self.vf, &self.shift, &zero, 1.0)?.first)
    }

    pub fn theta2_direct(&self, k: &GridPath) -> Result<GridPath> {
        self.check_direction(k)?;
        let with = solve_jets(self.vf, &self.shift, k, 1.0)?.second;
        let without = solve_jets(self.vf, &self.shift, k, 0.0)?.second;
        with.axpy(-1.0, &without)
    }

    /// Closed-form Taylor terms `phi^1 = chi(k) + theta^1` and
    /// `phi^2 = psi^2(k, k) / 2 + theta^2(k)`.
    pub fn taylor_terms(&self, k: &GridPath) -> Result<(GridPath, GridPath)> {
        let phi1 = self.chi(k)?.axpy(1.0, &self.theta1())?;
        let phi2 = self.second_variation(k, k)?.total().scaled(0.5).axpy(1.0, &self.theta2(k)?)?;
        Ok((phi1, phi2))
    }

    /// Accumulated defect `sum_j |r_j|_inf` of `phi^1 = chi(k) + theta^1` in
    /// the trapezoid discretization of its linear equation
    /// `d phi1 = DV<phi1> dh + D_y beta phi1 dt + V dk + d_eps beta dt`.
    pub fn phi1_residual(&self, k: &GridPath) -> Result<f64> {
        let phi1 = self.chi(k)?.axpy(1.0, &self.theta1())?;
        let n = self.state_dim();
        let dt = self.phi0.dt();
        let mut total = 0.0;
        let mut db = vec![0.0; n];
        let lin = |j: usize, u: &[f64], zh: &[f64], db: &mut Vec<f64>| -> DVector<f64> {
            self.vf.drift_dy(0.0, self.phi0.point(j), u, db);
            dot_rows(&self.dv(j, u), zh) + DVector::from_column_slice(db) * dt
        };
        for j in 0..self.steps() {
            let zh: Vec<f64> = (0..self.driver_dim()).map(|c| self.shift.increment(j, c)).collect();
            let (a, b) = (phi1.point(j), phi1.point(j + 1));
            let rhs = (lin(j, a, &zh, &mut db) + lin(j + 1, b, &zh, &mut db)) * 0.5
                + Self::trapezoid(&self.v[j], &self.v[j + 1], k, j)
                + (self.drift_eps(j) + self.drift_eps(j + 1)) * (0.5 * dt);
            let r = (0..n).map(|i| (b[i] - a[i] - rhs[i]).abs()).fold(0.0, f64::max);
            total += r;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{LinearSystem, ScalarPolySystem, SystemSpec};
    use std::f64::consts::PI;

    fn fourier(level: u32, m: f64, phase: f64) -> GridPath {
        GridPath::from_fn(2, level, move |t, o| {
            o[0] = 2f64.sqrt() * (m * PI * t + phase).cos();
            o[1] = 2f64.sqrt() * (2.0 * m * PI * t).sin() / (2.0 * m * PI);
        })
    }

    fn poly_eps() -> ScalarPolySystem {
        let SystemSpec::ScalarPoly(mut s) = SystemSpec::scalar_poly_toy() else { unreachable!() };
        s.beta_eps = vec![0.2, 0.3, -0.1];
        s
    }

    fn rel(a: &GridPath, b: &GridPath) -> f64 {
        a.sup_distance(b).unwrap() / b.sup_norm().max(1e-300)
    }

    #[test]
    fn jacobian_is_identity_without_drift_or_shift() {
        let vf = LinearSystem { b: vec![vec![0.0; 2]; 2], ..match SystemSpec::linear_toy() {
            SystemSpec::Linear(s) => s,
            _ => unreachable!(),
        } };
        let fb = FlowBundle::new(&vf, &GridPath::zeros(2, 5)).unwrap();
        for j in 0..=32 {
            assert_eq!(fb.m(j), &DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn scalar_jacobian_matches_exponential_quadrature() {
        let vf = poly_eps();
        let level = 12;
        let h = fourier(level, 2.0, 0.3);
        let fb = FlowBundle::new(&vf, &h).unwrap();
        // oracle: exp(int sigma'(phi) d gamma + beta'(phi) dt) with phi and the
        // integral taken on a 16x finer grid
        let fine = fourier(level + 4, 2.0, 0.3);
        let phi = solve_skeleton(&fine, &vf).unwrap();
        let dsig = |c: &[f64], y: f64| c.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a * y.powi(i as i32 - 1)).sum::<f64>();
        let mut expo = 0.0;
        for k in 0..fine.steps() {
            let (a, b) = (phi.point(k)[0], phi.point(k + 1)[0]);
            let f = |y: f64, k2: usize| {
                dsig(&vf.sigma[0], y) * fine.increment(k2, 0)
                    + dsig(&vf.sigma_hat[0], y) * fine.increment(k2, 1)
                    + dsig(&vf.beta, y) * fine.dt()
            };
            expo += 0.5 * (f(a, k) + f(b, k));
        }
        let got = fb.m(fb.steps())[(0, 0)];
        assert!((got / expo.exp() - 1.0).abs() < 1e-7, "{got} vs {}", expo.exp());
        assert!(fb.inverse_defect() < 1e-12);
    }

    #[test]
    fn chi_transport_case_reproduces_direction() {
        let vf = LinearSystem {
            a: vec![vec![1.0], vec![0.0]],
            a_hat: vec![vec![0.0], vec![1.0]],
            b: vec![vec![0.0; 2]; 2],
            b0: vec![0.0; 2],
            c: vec![0.0; 2],
            y0: vec![],
            bound: 1e6,
        };
        let fb = FlowBundle::new(&vf, &fourier(6, 1.0, 0.0)).unwrap();
        let k = fourier(6, 3.0, 0.2);
        assert!(fb.chi(&k).unwrap().sup_distance(&k).unwrap() < 1e-14);
        assert_eq!(fb.chi(&GridPath::zeros(2, 6)).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn chi_two_routes_agree_on_linear_toy() {
        let vf = SystemSpec::linear_toy().into_field();
        let fb = FlowBundle::new(vf.as_ref(), &fourier(12, 1.0, 0.1)).unwrap();
        let k = fourier(12, 4.0, 0.7);
        let err = rel(&fb.chi(&k).unwrap(), &fb.chi_direct(&k).unwrap());
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn chi_is_linear() {
        let vf = poly_eps();
        let fb = FlowBundle::new(&vf, &fourier(8, 1.0, 0.0)).unwrap();
        let (k1, k2) = (fourier(8, 2.0, 0.3), fourier(8, 5.0, 1.1));
        let comb = k1.scaled(1.7).axpy(-0.4, &k2).unwrap();
        let lhs = fb.chi(&comb).unwrap();
        let rhs = fb.chi(&k1).unwrap().scaled(1.7).axpy(-0.4, &fb.chi(&k2).unwrap()).unwrap();
        assert!(lhs.sup_distance(&rhs).unwrap() < 1e-9);
    }

    #[test]
    fn psi2_symmetric_and_matches_ito_map_differences() {
        let vf = poly_eps();
        let level = 10;
        let h = fourier(level, 1.0, 0.4);
        let fb = FlowBundle::new(&vf, &h).unwrap();
        let (f, k) = (fourier(level, 2.0, 0.0), fourier(level, 3.0, 0.9));
        let fk = fb.second_variation(&f, &k).unwrap().total();
        let kf = fb.second_variation(&k, &f).unwrap().total();
        assert!(fk.sup_distance(&kf).unwrap() < 1e-8);
        let e = 1e-3;
        let phi = |a: f64, b: f64| {
            let s = h.axpy(a, &f).unwrap().axpy(b, &k).unwrap();
            solve_skeleton(&s, &vf).unwrap()
        };
        let fd = phi(e, e)
            .axpy(-1.0, &phi(e, -e))
            .unwrap()
            .axpy(-1.0, &phi(-e, e))
            .unwrap()
            .axpy(1.0, &phi(-e, -e))
            .unwrap()
            .scaled(1.0 / (4.0 * e * e));
        assert!(fk.sup_distance(&fd).unwrap() < 1e-4, "{}", fk.sup_distance(&fd).unwrap());
    }

    #[test]
    fn psi2_two_routes_agree() {
        let vf = poly_eps();
        let fb = FlowBundle::new(&vf, &fourier(12, 1.0, 0.4)).unwrap();
        let (f, k) = (fourier(12, 2.0, 0.0), fourier(12, 1.0, 0.9));
        let err = rel(&fb.second_variation(&f, &k).unwrap().total(), &fb.second_variation_direct(&f, &k).unwrap());
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn psi2_vanishes_for_linear_toy() {
        let vf = SystemSpec::linear_toy().into_field();
        let fb = FlowBundle::new(vf.as_ref(), &fourier(7, 1.0, 0.0)).unwrap();
        let (f, k) = (fourier(7, 2.0, 0.0), fourier(7, 3.0, 0.5));
        assert_eq!(fb.second_variation(&f, &k).unwrap().total().sup_norm(), 0.0);
        let (r1, r2) = fb.r1_r2_terms(&f, &k).unwrap();
        assert_eq!(r1.sup_norm() + r2.sup_norm(), 0.0);
    }

    #[test]
    fn v1_reassembles_from_r_terms() {
        let vf = poly_eps();
        let fb = FlowBundle::new(&vf, &fourier(9, 1.0, 0.4)).unwrap();
        for (m1, m2) in [(1.0, 2.0), (3.0, 3.0), (5.0, 2.0)] {
            let (f, k) = (fourier(9, m1, 0.2), fourier(9, m2, 1.3));
            let v1 = fb.second_variation(&f, &k).unwrap().v1;
            let rebuilt = fb.v1_from_r_terms(&f, &k).unwrap();
            assert!(v1.sup_distance(&rebuilt).unwrap() < 1e-7 * v1.sup_norm().max(1.0));
        }
    }

    #[test]
    fn theta_terms_two_routes_and_residual() {
        let vf = poly_eps();
        let fb = FlowBundle::new(&vf, &fourier(12, 1.0, 0.4)).unwrap();
        let k = fourier(12, 2.0, 0.5);
        assert!(rel(&fb.theta1(), &fb.theta1_direct().unwrap()) < 1e-6);
        let err2 = rel(&fb.theta2(&k).unwrap(), &fb.theta2_direct(&k).unwrap());
        assert!(err2 < 1e-6, "{err2}");
        let res = fb.phi1_residual(&k).unwrap();
        assert!(res < 1e-6, "{res}");
    }

    #[test]
    fn theta_terms_vanish_without_eps_dependence() {
        let vf = SystemSpec::scalar_poly_toy().into_field();
        let fb = FlowBundle::new(vf.as_ref(), &fourier(7, 1.0, 0.4)).unwrap();
        assert_eq!(fb.theta1().sup_norm(), 0.0);
        assert_eq!(fb.theta2(&fourier(7, 2.0, 0.0)).unwrap().sup_norm(), 0.0);
    }
}
