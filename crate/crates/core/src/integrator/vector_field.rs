use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drivers::rng_stream;
use crate::error::{Error, Result};

/// Coefficients of `dY = [sigma | sigma_hat](Y) d(X) + beta(eps, Y) dt`.
///
/// Matrices are row-major `n x d` with `d = d1 + d2`; the first `d1`
/// columns are the fractional block. Derivatives are directional:
/// `diffusion_d(y, u)` is `D V(y)<u>`, `diffusion_dd(y, u, w)` is
/// `D^2 V(y)<u, w>`, and likewise for the drift in `y` and `eps`.
pub trait VectorField: Send + Sync {
    fn state_dim(&self) -> usize;
    fn fbm_dim(&self) -> usize;
    fn bm_dim(&self) -> usize;

    fn driver_dim(&self) -> usize {
        self.fbm_dim() + self.bm_dim()
    }

    fn diffusion(&self, y: &[f64], out: &mut [f64]);
    fn diffusion_d(&self, y: &[f64], u: &[f64], out: &mut [f64]);
    fn diffusion_dd(&self, y: &[f64], u: &[f64], w: &[f64], out: &mut [f64]);

    fn drift(&self, eps: f64, y: &[f64], out: &mut [f64]);
    fn drift_dy(&self, eps: f64, y: &[f64], u: &[f64], out: &mut [f64]);
    fn drift_dyy(&self, eps: f64, y: &[f64], u: &[f64], w: &[f64], out: &mut [f64]);
    fn drift_de(&self, eps: f64, y: &[f64], out: &mut [f64]);
    fn drift_dye(&self, eps: f64, y: &[f64], u: &[f64], out: &mut [f64]);
    fn drift_dee(&self, eps: f64, y: &[f64], out: &mut [f64]);

    /// Starting point of every solve.
    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    /// Half-width of the declared box `|y_i| <= bound`.
    fn bound(&self) -> f64 {
        f64::INFINITY
    }

    fn in_box(&self, y: &[f64]) -> bool {
        let b = self.bound();
        y.iter().all(|v| v.is_finite() && v.abs() <= b)
    }
}

/// `sigma = A`, `sigma_hat = A_hat` constant, `beta = B y + b0 + eps c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    /// `n x d1`, rows are states.
    pub a: Vec<Vec<f64>>,
    /// `n x d2`.
    pub a_hat: Vec<Vec<f64>>,
    /// `n x n`.
    pub b: Vec<Vec<f64>>,
    pub b0: Vec<f64>,
    pub c: Vec<f64>,
    /// Initial state; empty means zero.
    #[serde(default)]
    pub y0: Vec<f64>,
    #[serde(default = "default_bound")]
    pub bound: f64,
}

fn default_bound() -> f64 {
    1e6
}

impl LinearSystem {
    pub fn validate(&self) -> Result<()> {
        let n = self.b0.len();
        let ok = n > 0
            && self.a.len() == n
            && self.a_hat.len() == n
            && self.b.len() == n
            && self.c.len() == n
            && (self.y0.is_empty() || self.y0.len() == n)
            && self.b.iter().all(|r| r.len() == n)
            && !self.a[0].is_empty()
            && !self.a_hat[0].is_empty()
            && self.a.iter().all(|r| r.len() == self.a[0].len())
            && self.a_hat.iter().all(|r| r.len() == self.a_hat[0].len());
        if !ok {
            return Err(Error::InvalidSpec("linear system matrices have inconsistent shapes".into()));
        }
        Ok(())
    }

    /// Matrix `[A | A_hat]` row-major.
    pub fn diffusion_matrix(&self) -> Vec<f64> {
        self.a.iter().zip(&self.a_hat).flat_map(|(r, s)| r.iter().chain(s).copied()).collect()
    }

    pub fn drift_matrix(&self) -> Vec<f64> {
        self.b.iter().flatten().copied().collect()
    }
}

impl VectorField for LinearSystem {
    fn state_dim(&self) -> usize {
        self.b0.len()
    }
    fn fbm_dim(&self) -> usize {
        self.a[0].len()
    }
    fn bm_dim(&self) -> usize {
        self.a_hat[0].len()
    }
    fn diffusion(&self, _y: &[f64], out: &mut [f64]) {
        let d = self.driver_dim();
        for (i, (r, s)) in self.a.iter().zip(&self.a_hat).enumerate() {
            out[i * d..i * d + r.len()].copy_from_slice(r);
            out[i * d + r.len()..(i + 1) * d].copy_from_slice(s);
        }
    }
    fn diffusion_d(&self, _y: &[f64], _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion_dd(&self, _y: &[f64], _u: &[f64], _w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift(&self, eps: f64, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.b[i].iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + self.b0[i] + eps * self.c[i];
        }
    }
    fn drift_dy(&self, _eps: f64, _y: &[f64], u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.b[i].iter().zip(u).map(|(a, b)| a * b).sum();
        }
    }
    fn drift_dyy(&self, _eps: f64, _y: &[f64], _u: &[f64], _w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift_de(&self, _eps: f64, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }
    fn drift_dye(&self, _eps: f64, _y: &[f64], _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift_dee(&self, _eps: f64, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn initial_state(&self) -> Vec<f64> {
        if self.y0.is_empty() {
            vec![0.0; self.state_dim()]
        } else {
            self.y0.clone()
        }
    }
    fn bound(&self) -> f64 {
        self.bound
    }
}

/// Scalar state (`n = 1`) with polynomial coefficients: one polynomial per
/// driver channel, `beta(eps, y) = P(y) + eps R(y)`. Coefficient lists are in
/// increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPolySystem {
    pub sigma: Vec<Vec<f64>>,
    pub sigma_hat: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub beta_eps: Vec<f64>,
    #[serde(default)]
    pub y0: f64,
    #[serde(default = "default_poly_bound")]
    pub bound: f64,
}

fn default_poly_bound() -> f64 {
    50.0
}

/// Value and first two derivatives of a polynomial.
fn poly3(c: &[f64], y: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &a in c.iter().rev() {
        d2 = d2 * y + 2.0 * d1;
        d1 = d1 * y + v;
        v = v * y + a;
    }
    (v, d1, d2)
}

impl ScalarPolySystem {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_empty() || self.sigma_hat.is_empty() {
            return Err(Error::InvalidSpec("scalar-poly needs at least one channel per block".into()));
        }
        Ok(())
    }

    fn channels(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.sigma.iter().chain(&self.sigma_hat)
    }
}

impl VectorField for ScalarPolySystem {
    fn state_dim(&self) -> usize {
        1
    }
    fn fbm_dim(&self) -> usize {
        self.sigma.len()
    }
    fn bm_dim(&self) -> usize {
        self.sigma_hat.len()
    }
    fn diffusion(&self, y: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.channels()) {
            *o = poly3(c, y[0]).0;
        }
    }
    fn diffusion_d(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.channels()) {
            *o = poly3(c, y[0]).1 * u[0];
        }
    }
    fn diffusion_dd(&self, y: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.channels()) {
            *o = poly3(c, y[0]).2 * u[0] * w[0];
        }
    }
    fn drift(&self, eps: f64, y: &[f64], out: &mut [f64]) {
        out[0] = poly3(&self.beta, y[0]).0 + eps * poly3(&self.beta_eps, y[0]).0;
    }
    fn drift_dy(&self, eps: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = (poly3(&self.beta, y[0]).1 + eps * poly3(&self.beta_eps, y[0]).1) * u[0];
    }
    fn drift_dyy(&self, eps: f64, y: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = (poly3(&self.beta, y[0]).2 + eps * poly3(&self.beta_eps, y[0]).2) * u[0] * w[0];
    }
    fn drift_de(&self, _eps: f64, y: &[f64], out: &mut [f64]) {
        out[0] = poly3(&self.beta_eps, y[0]).0;
    }
    fn drift_dye(&self, _eps: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = poly3(&self.beta_eps, y[0]).1 * u[0];
    }
    fn drift_dee(&self, _eps: f64, _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn initial_state(&self) -> Vec<f64> {
        vec![self.y0]
    }
    fn bound(&self) -> f64 {
        self.bound
    }
}

/// JSON description of a built-in system family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSpec {
    Linear(LinearSystem),
    ScalarPoly(ScalarPolySystem),
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        match &spec {
            SystemSpec::Linear(s) => s.validate()?,
            SystemSpec::ScalarPoly(s) => s.validate()?,
        }
        Ok(spec)
    }

    pub fn into_field(self) -> Box<dyn VectorField> {
        match self {
            SystemSpec::Linear(s) => Box::new(s),
            SystemSpec::ScalarPoly(s) => Box::new(s),
        }
    }

    /// The built-in linear toy: two states, one fractional and one Brownian
    /// channel, stable drift with a constant push.
    pub fn linear_toy() -> Self {
        SystemSpec::Linear(LinearSystem {
            a: vec![vec![0.6], vec![0.2]],
            a_hat: vec![vec![0.3], vec![0.7]],
            b: vec![vec![-0.5, 0.3], vec![0.0, -0.8]],
            b0: vec![0.8, -0.4],
            c: vec![0.0, 0.0],
            y0: vec![],
            bound: 1e6,
        })
    }

    /// The built-in scalar polynomial toy (multiplicative noise in both
    /// channels, mean-reverting drift).
    pub fn scalar_poly_toy() -> Self {
        SystemSpec::ScalarPoly(ScalarPolySystem {
            sigma: vec![vec![0.4, 0.3]],
            sigma_hat: vec![vec![0.5, -0.2, 0.1]],
            beta: vec![0.6, -0.5],
            beta_eps: vec![],
            y0: 0.0,
            bound: 50.0,
        })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear_toy()),
            "scalar-poly" => Ok(Self::scalar_poly_toy()),
            other => Err(Error::InvalidSpec(format!("unknown system {other}"))),
        }
    }
}

/// Worst relative discrepancy per derivative callable.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub checks: Vec<(String, f64)>,
    pub tolerance: f64,
    pub passed: bool,
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().chain(a).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite-difference audit of every derivative callable at random
/// probe points inside `[-radius, radius]^n`.
pub fn audit_derivatives(vf: &dyn VectorField, probes: usize, radius: f64, seed: u64) -> AuditReport {
    let n = vf.state_dim();
    let nd = n * vf.driver_dim();
    let h = 1e-5;
    let mut rng = rng_stream(seed, 0);
    let mut worst = [0.0f64; 8];
    let names = [
        "diffusion_d",
        "diffusion_dd",
        "drift_dy",
        "drift_dyy",
        "drift_de",
        "drift_dye",
        "drift_dee",
        "drift_dy_symmetry",
    ];
    let mut draw = |r: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-r..r)).collect() };
    for _ in 0..probes {
        let y = draw(radius);
        let u = draw(1.0);
        let w = draw(1.0);
        let eps = 0.3;
        let shift = |s: f64, dir: &[f64]| -> Vec<f64> { y.iter().zip(dir).map(|(a, b)| a + s * b).collect() };
        let (yp, ym) = (shift(h, &u), shift(-h, &u));
        let (mut a, mut b, mut c) = (vec![0.0; nd], vec![0.0; nd], vec![0.0; nd]);
        vf.diffusion(&yp, &mut a);
        vf.diffusion(&ym, &mut b);
        vf.diffusion_d(&y, &u, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[0] = worst[0].max(rel_err(&c, &fd));
        vf.diffusion_d(&shift(h, &w), &u, &mut a);
        vf.diffusion_d(&shift(-h, &w), &u, &mut b);
        vf.diffusion_dd(&y, &u, &w, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[1] = worst[1].max(rel_err(&c, &fd));

        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        vf.drift(eps, &yp, &mut a);
        vf.drift(eps, &ym, &mut b);
        vf.drift_dy(eps, &y, &u, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[2] = worst[2].max(rel_err(&c, &fd));
        vf.drift_dy(eps, &shift(h, &w), &u, &mut a);
        vf.drift_dy(eps, &shift(-h, &w), &u, &mut b);
        vf.drift_dyy(eps, &y, &u, &w, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[3] = worst[3].max(rel_err(&c, &fd));
        vf.drift(eps + h, &y, &mut a);
        vf.drift(eps - h, &y, &mut b);
        vf.drift_de(eps, &y, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[4] = worst[4].max(rel_err(&c, &fd));
        vf.drift_de(eps, &yp, &mut a);
        vf.drift_de(eps, &ym, &mut b);
        vf.drift_dye(eps, &y, &u, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[5] = worst[5].max(rel_err(&c, &fd));
        vf.drift_de(eps + h, &y, &mut a);
        vf.drift_de(eps - h, &y, &mut b);
        vf.drift_dee(eps, &y, &mut c);
        let fd: Vec<f64> = a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        worst[6] = worst[6].max(rel_err(&c, &fd));
        vf.drift_dyy(eps, &y, &u, &w, &mut a);
        vf.drift_dyy(eps, &y, &w, &u, &mut b);
        worst[7] = worst[7].max(rel_err(&a, &b));
    }
    let tolerance = 1e-5;
    AuditReport {
        checks: names.iter().map(|s| s.to_string()).zip(worst).collect(),
        tolerance,
        passed: worst.iter().all(|w| *w <= tolerance),
    }
}
