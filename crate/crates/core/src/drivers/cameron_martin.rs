use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{CovarianceFactor, GridPath};
use crate::config::ParamSet;
use crate::error::{Error, Result};

/// Which block of the driver a basis element lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Fbm,
    Bm,
}

/// Raw fractional family: `1` for `m = 0`, `sqrt2 cos(m pi t)` otherwise.
fn fbm_raw(m: usize, t: f64) -> f64 {
    if m == 0 {
        1.0
    } else {
        SQRT_2 * (m as f64 * PI * t).cos()
    }
}

/// Orthonormal Brownian family: index 0 is `t`, `2m-1` is
/// `sqrt2 (cos(2 m pi t) - 1) / (2 m pi)` and `2m` is `sqrt2 sin(2 m pi t) / (2 m pi)`.
fn bm_raw(j: usize, t: f64) -> f64 {
    if j == 0 {
        return t;
    }
    let m = j.div_ceil(2) as f64;
    let w = 2.0 * m * PI;
    if j % 2 == 1 {
        SQRT_2 * ((w * t).cos() - 1.0) / w
    } else {
        SQRT_2 * (w * t).sin() / w
    }
}

/// Weight of the fractional pairing, `(1 + m^2)^delta`.
fn fbm_weight(m: usize, delta: f64) -> f64 {
    (1.0 + (m * m) as f64).powf(delta)
}

/// An element of the truncated Cameron–Martin space: coefficients per
/// fractional coordinate over the raw cosine family (modes `0..=N`) and per
/// Brownian coordinate over the orthonormal Fourier family (indices
/// `0..=2N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmElement {
    pub fbm_coeffs: Vec<Vec<f64>>,
    pub bm_coeffs: Vec<Vec<f64>>,
    pub truncation: usize,
    /// Sobolev index of the fractional pairing.
    pub delta: f64,
}

impl CmElement {
    pub fn zero(d1: usize, d2: usize, truncation: usize, delta: f64) -> Self {
        Self {
            fbm_coeffs: vec![vec![0.0; truncation + 1]; d1],
            bm_coeffs: vec![vec![0.0; 2 * truncation + 1]; d2],
            truncation,
            delta,
        }
    }

    pub fn d1(&self) -> usize {
        self.fbm_coeffs.len()
    }

    pub fn d2(&self) -> usize {
        self.bm_coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.d1() + self.d2()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.truncation;
        if self.fbm_coeffs.iter().any(|c| c.len() != n + 1) || self.bm_coeffs.iter().any(|c| c.len() != 2 * n + 1) {
            return Err(Error::InvalidSpec(format!("coefficient lengths do not match truncation {n}")));
        }
        if self.fbm_coeffs.iter().chain(&self.bm_coeffs).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("Cameron-Martin coefficients".into()));
        }
        Ok(())
    }

    /// Raw value at time `t` (not shifted to start at zero).
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for c in &self.fbm_coeffs {
            out.push(c.iter().enumerate().map(|(m, a)| a * fbm_raw(m, t)).sum());
        }
        for c in &self.bm_coeffs {
            out.push(c.iter().enumerate().map(|(j, a)| a * bm_raw(j, t)).sum());
        }
        out
    }

    /// Grid realization `t -> k(t) - k(0)` at the given level.
    pub fn realize(&self, level: u32) -> GridPath {
        GridPath::from_fn(self.dim(), level, |t, out| out.copy_from_slice(&self.evaluate(t)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let scale = |v: &Vec<Vec<f64>>| v.iter().map(|c| c.iter().map(|a| a * s).collect()).collect();
        Self { fbm_coeffs: scale(&self.fbm_coeffs), bm_coeffs: scale(&self.bm_coeffs), ..self.clone() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &CmElement) -> Result<Self> {
        check_compatible(self, other)?;
        let comb = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + s * v).collect()).collect()
        };
        Ok(Self {
            fbm_coeffs: comb(&self.fbm_coeffs, &other.fbm_coeffs),
            bm_coeffs: comb(&self.bm_coeffs, &other.bm_coeffs),
            ..self.clone()
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(s)?;
        e.check_shape()?;
        Ok(e)
    }
}

fn check_compatible(a: &CmElement, b: &CmElement) -> Result<()> {
    if a.truncation != b.truncation {
        return Err(Error::TruncationMismatch(a.truncation, b.truncation));
    }
    if a.d1() != b.d1() || a.d2() != b.d2() {
        return Err(Error::DimensionMismatch("Cameron-Martin block dimensions".into()));
    }
    if a.delta != b.delta {
        return Err(Error::InvalidSpec("Cameron-Martin elements use different delta".into()));
    }
    Ok(())
}

/// Normalized basis element. `coordinate` is global: `0..d1` are fractional,
/// `d1..d1+d2` Brownian. For the Brownian block `mode` is the family index
/// (`0`, then `2m-1` / `2m` for the cosine / sine types of frequency `m`).
pub fn cm_basis_element(
    kind: BlockKind,
    mode: usize,
    coordinate: usize,
    params: &ParamSet,
    truncation: usize,
) -> Result<CmElement> {
    let mut e = CmElement::zero(params.d1, params.d2, truncation, params.delta());
    match kind {
        BlockKind::Fbm => {
            if coordinate >= params.d1 || mode > truncation {
                return Err(Error::IndexOutOfRange(format!("fbm mode {mode} coordinate {coordinate}")));
            }
            e.fbm_coeffs[coordinate][mode] = 1.0 / fbm_weight(mode, params.delta()).sqrt();
        }
        BlockKind::Bm => {
            if coordinate < params.d1 || coordinate >= params.dim() || mode > 2 * truncation {
                return Err(Error::IndexOutOfRange(format!("bm mode {mode} coordinate {coordinate}")));
            }
            e.bm_coeffs[coordinate - params.d1][mode] = 1.0;
        }
    }
    Ok(e)
}

/// Fractional block: `sum (1+m^2)^delta c_m d_m`; Brownian block:
/// `int <a', b'> dt`, which the orthonormal family turns into `sum c d`.
pub fn cm_inner_product(a: &CmElement, b: &CmElement) -> Result<f64> {
    check_compatible(a, b)?;
    let fbm: f64 = a
        .fbm_coeffs
        .iter()
        .zip(&b.fbm_coeffs)
        .flat_map(|(x, y)| x.iter().zip(y).enumerate())
        .map(|(m, (u, v))| fbm_weight(m, a.delta) * u * v)
        .sum();
    let bm: f64 = a
        .bm_coeffs
        .iter()
        .zip(&b.bm_coeffs)
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(u, v)| u * v)
        .sum();
    Ok(fbm + bm)
}

pub fn cm_norm_sq(a: &CmElement) -> f64 {
    cm_inner_product(a, a).expect("self-compatible")
}

/// `k^T Sigma^{-1} x` on increment vectors, `Sigma` the exact grid
/// covariance of the driver.
pub fn discrete_pairing(k: &CmElement, x: &GridPath, factor: &CovarianceFactor) -> Result<f64> {
    PairingKernel::new(&k.realize(factor.level()), factor)?.pair(x)
}

/// `k^T Sigma^{-1} k`, the Cameron–Martin norm of the discretized Gaussian.
pub fn discrete_cm_norm_sq(k: &CmElement, factor: &CovarianceFactor) -> Result<f64> {
    Ok(PairingKernel::new(&k.realize(factor.level()), factor)?.norm_sq())
}

/// Precomputed `u = Sigma^{-1} h` for a fixed shift `h`, so that repeated
/// pairings cost one dot product.
#[derive(Debug, Clone)]
pub struct PairingKernel {
    level: u32,
    dim: usize,
    u: Vec<f64>,
    norm_sq: f64,
}

impl PairingKernel {
    pub fn new(shift: &GridPath, factor: &CovarianceFactor) -> Result<Self> {
        factor.check_path(shift)?;
        let h = shift.increments();
        let u = factor.precision_apply(&h)?;
        let norm_sq = u.iter().zip(&h).map(|(a, b)| a * b).sum();
        Ok(Self { level: shift.level(), dim: shift.dim(), u, norm_sq })
    }

    pub fn pair(&self, x: &GridPath) -> Result<f64> {
        if x.level() != self.level {
            return Err(Error::LevelMismatch { expected: self.level, found: x.level() });
        }
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch("pairing path dimension".into()));
        }
        let d = self.dim;
        let mut acc = 0.0;
        for k in 0..x.steps() {
            for c in 0..d {
                acc += self.u[k * d + c] * x.increment(k, c);
            }
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

/// One entry of the flattened truncated basis.
#[derive(Debug, Clone)]
pub struct BasisEntry {
    pub kind: BlockKind,
    pub mode: usize,
    /// Global driver coordinate.
    pub coordinate: usize,
    /// Realized values (`2^M + 1`, starting at 0) on the basis level.
    pub values: Vec<f64>,
}

impl BasisEntry {
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }
}

/// The truncated orthonormal basis, flattened in the order: fractional
/// coordinates (modes `0..=N` each), then Brownian coordinates (indices
/// `0..=2N` each). Realizations are cached at one level.
#[derive(Debug, Clone)]
pub struct CmBasis {
    d1: usize,
    d2: usize,
    truncation: usize,
    delta: f64,
    level: u32,
    entries: Vec<BasisEntry>,
}

impl CmBasis {
    pub fn new(params: &ParamSet, truncation: usize, level: u32) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidSpec("truncation must be at least 1".into()));
        }
        let steps = 1usize << level;
        let mut entries = Vec::new();
        let realize = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let f0 = f(0.0);
            (0..=steps).map(|k| f(k as f64 / steps as f64) - f0).collect()
        };
        for coordinate in 0..params.d1 {
            for mode in 0..=truncation {
                let a = 1.0 / fbm_weight(mode, params.delta()).sqrt();
                entries.push(BasisEntry {
                    kind: BlockKind::Fbm,
                    mode,
                    coordinate,
                    values: realize(&|t| a * fbm_raw(mode, t)),
                });
            }
        }
        for coordinate in params.d1..params.dim() {
            for mode in 0..=2 * truncation {
                entries.push(BasisEntry {
                    kind: BlockKind::Bm,
                    mode,
                    coordinate,
                    values: realize(&|t| bm_raw(mode, t)),
                });
            }
        }
        Ok(Self { d1: params.d1, d2: params.d2, truncation, delta: params.delta(), level, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &BasisEntry {
        &self.entries[j]
    }

    /// Basis element `j` as a coefficient object.
    pub fn element(&self, j: usize) -> CmElement {
        let mut x = vec![0.0; self.len()];
        x[j] = 1.0;
        self.to_element(&x)
    }

    /// Grid realization of `sum_j x_j e_j` (a `d1 + d2` dimensional path).
    pub fn realize(&self, x: &[f64]) -> GridPath {
        assert_eq!(x.len(), self.len(), "basis coordinate length");
        let d = self.dim();
        let steps = 1usize << self.level;
        let mut values = vec![0.0; (steps + 1) * d];
        for (e, &a) in self.entries.iter().zip(x) {
            if a == 0.0 {
                continue;
            }
            for k in 0..=steps {
                values[k * d + e.coordinate] += a * e.values[k];
            }
        }
        GridPath::from_values(d, self.level, values).expect("basis realization starts at zero")
    }

    /// Grid realization of the single basis element `j`.
    pub fn realize_entry(&self, j: usize) -> GridPath {
        let d = self.dim();
        let e = &self.entries[j];
        let mut values = vec![0.0; e.values.len() * d];
        for (k, v) in e.values.iter().enumerate() {
            values[k * d + e.coordinate] = *v;
        }
        GridPath::from_values(d, self.level, values).expect("basis realization starts at zero")
    }

    /// Basis coordinates to coefficient representation.
    pub fn to_element(&self, x: &[f64]) -> CmElement {
        let mut el = CmElement::zero(self.d1, self.d2, self.truncation, self.delta);
        for (e, &a) in self.entries.iter().zip(x) {
            match e.kind {
                BlockKind::Fbm => el.fbm_coeffs[e.coordinate][e.mode] = a / fbm_weight(e.mode, self.delta).sqrt(),
                BlockKind::Bm => el.bm_coeffs[e.coordinate - self.d1][e.mode] = a,
            }
        }
        el
    }

    /// Coefficient representation to basis coordinates (orthonormal, so these
    /// are the inner products with the basis).
    pub fn coordinates(&self, el: &CmElement) -> Result<Vec<f64>> {
        if el.truncation != self.truncation {
            return Err(Error::TruncationMismatch(el.truncation, self.truncation));
        }
        Ok(self
            .entries
            .iter()
            .map(|e| match e.kind {
                BlockKind::Fbm => el.fbm_coeffs[e.coordinate][e.mode] * fbm_weight(e.mode, self.delta).sqrt(),
                BlockKind::Bm => el.bm_coeffs[e.coordinate - self.d1][e.mode],
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParamSet {
        ParamSet::from_recipe(0.4, 0.01, 2, 1, 1, 6, 0).unwrap()
    }

    #[test]
    fn listed_elements() {
        let ps = params();
        let lin = cm_basis_element(BlockKind::Bm, 0, 2, &ps, 4).unwrap();
        let g = lin.realize(8);
        for k in 0..=g.steps() {
            assert_eq!(g.point(k)[2], g.time(k));
        }
        let one = cm_basis_element(BlockKind::Fbm, 0, 0, &ps, 4).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(one.evaluate(t), vec![1.0, 0.0, 0.0]);
        }
        assert!(cm_basis_element(BlockKind::Fbm, 5, 0, &ps, 4).is_err());
        assert!(cm_basis_element(BlockKind::Bm, 0, 1, &ps, 4).is_err());
        assert!(cm_basis_element(BlockKind::Bm, 9, 2, &ps, 4).is_err());
    }

    #[test]
    fn bm_mode_derivative_energy_by_quadrature() {
        // analytic derivatives would make this vacuous; use finite differences
        // of the realization at level 12
        for mode in [1, 2, 5, 6] {
            let e = cm_basis_element(BlockKind::Bm, mode, 2, &params(), 4).unwrap();
            let g = e.realize(12);
            let n = g.steps() as f64;
            let energy: f64 = (0..g.steps()).map(|k| (g.increment(k, 2) * n).powi(2) / n).sum();
            assert!((energy - 1.0).abs() < 1e-5, "mode {mode}: {energy}");
        }
    }

    #[test]
    fn gram_is_identity() {
        let ps = params();
        let basis = CmBasis::new(&ps, 6, 4).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let g = cm_inner_product(&basis.element(i), &basis.element(j)).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12, "({i},{j}) {g}");
            }
        }
    }

    #[test]
    fn coordinates_roundtrip_and_realization_linear() {
        let ps = params();
        let basis = CmBasis::new(&ps, 3, 5).unwrap();
        let x: Vec<f64> = (0..basis.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let el = basis.to_element(&x);
        let back = basis.coordinates(&el).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let direct = el.realize(5);
        assert!(direct.sup_distance(&basis.realize(&x)).unwrap() < 1e-12);
        assert!((cm_norm_sq(&el) - x.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn truncation_mismatch_is_reported() {
        let ps = params();
        let a = cm_basis_element(BlockKind::Fbm, 1, 0, &ps, 3).unwrap();
        let b = cm_basis_element(BlockKind::Fbm, 1, 0, &ps, 4).unwrap();
        assert!(matches!(cm_inner_product(&a, &b), Err(Error::TruncationMismatch(3, 4))));
    }

    #[test]
    fn json_keys() {
        let ps = params();
        let a = cm_basis_element(BlockKind::Bm, 2, 2, &ps, 2).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        for key in ["fbm_coeffs", "bm_coeffs", "truncation"] {
            assert!(s.contains(key));
        }
        assert_eq!(CmElement::from_json(&s).unwrap(), a);
        assert!(CmElement::from_json(r#"{"fbm_coeffs":[[1.0]],"bm_coeffs":[],"truncation":3,"delta":0.9}"#).is_err());
    }

    #[test]
    fn brownian_pairing_of_identity_is_terminal_value() {
        let ps = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 6, 0).unwrap();
        let f = CovarianceFactor::new(&ps).unwrap();
        let k = cm_basis_element(BlockKind::Bm, 0, 1, &ps, 2).unwrap();
        let x = f.sample(&mut crate::drivers::rng_stream(1, 0));
        let got = discrete_pairing(&k, &x, &f).unwrap();
        assert!((got - x.terminal()[1]).abs() < 1e-12);
        let zero = CmElement::zero(1, 1, 2, ps.delta());
        assert_eq!(discrete_pairing(&zero, &x, &f).unwrap(), 0.0);
        assert!((discrete_cm_norm_sq(&k, &f).unwrap() - 1.0).abs() < 1e-12);
    }
}
