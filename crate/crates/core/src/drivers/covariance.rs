use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use super::GridPath;
use crate::config::ParamSet;
use crate::error::{Error, Result};

/// `E[b_s b_t] = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

/// Covariance of the fBm increments over grid intervals `k` and `l`
/// (stationary, so only `|k - l|` matters).
pub fn fbm_increment_covariance(k: usize, l: usize, level: u32, hurst: f64) -> f64 {
    let j = (k as f64 - l as f64).abs();
    let h2 = 2.0 * hurst;
    let dt = 1.0 / (1usize << level) as f64;
    0.5 * dt.powf(h2) * ((j + 1.0).powf(h2) + (j - 1.0).abs().powf(h2) - 2.0 * j.powf(h2))
}

/// Deterministic RNG stream for sample `index` of a run seeded by `seed`.
/// Streams are independent of worker count and scheduling.
pub fn rng_stream(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Lower Cholesky factor of the joint increment covariance of the mixed
/// driver on a dyadic grid. The covariance is block diagonal: one shared
/// Toeplitz block per fractional coordinate and `2^{-M} I` per Brownian
/// coordinate, so only the fractional block is stored.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    level: u32,
    hurst: f64,
    d1: usize,
    d2: usize,
    fbm_cov: DMatrix<f64>,
    fbm_chol: DMatrix<f64>,
    // row-major copy of the factor for cache-friendly sampling
    fbm_rows: Vec<f64>,
}

impl CovarianceFactor {
    pub fn new(params: &ParamSet) -> Result<Self> {
        Self::build(params.hurst, params.level, params.d1, params.d2)
    }

    pub fn build(hurst: f64, level: u32, d1: usize, d2: usize) -> Result<Self> {
        let n = 1usize << level;
        let fbm_cov = DMatrix::from_fn(n, n, |k, l| fbm_increment_covariance(k, l, level, hurst));
        let fbm_chol = fbm_cov.clone().cholesky().ok_or(Error::FactorizationFailed)?.unpack();
        let fbm_rows = (0..n).flat_map(|k| (0..n).map(move |j| (k, j))).map(|(k, j)| fbm_chol[(k, j)]).collect();
        Ok(Self { level, hurst, d1, d2, fbm_cov, fbm_chol, fbm_rows })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn steps(&self) -> usize {
        1usize << self.level
    }

    /// Lower-triangular factor of one fractional coordinate's increments.
    pub fn fbm_factor(&self) -> &DMatrix<f64> {
        &self.fbm_chol
    }

    pub fn fbm_increment_cov(&self) -> &DMatrix<f64> {
        &self.fbm_cov
    }

    /// Relative Frobenius error of `L L^T` against the covariance.
    pub fn reconstruction_error(&self) -> f64 {
        let ll = &self.fbm_chol * self.fbm_chol.transpose();
        (ll - &self.fbm_cov).norm() / self.fbm_cov.norm()
    }

    /// Draws one driver path `(b^H, w)` of dimension `d1 + d2`.
    pub fn sample(&self, rng: &mut impl Rng) -> GridPath {
        let n = self.steps();
        let d = self.d1 + self.d2;
        let mut inc = vec![0.0; n * d];
        let mut z = vec![0.0; n];
        for c in 0..self.d1 {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            for k in 0..n {
                let row = &self.fbm_rows[k * n..k * n + k + 1];
                inc[k * d + c] = row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let scale = (1.0 / n as f64).sqrt();
        for c in self.d1..d {
            for k in 0..n {
                let zk: f64 = rng.sample(StandardNormal);
                inc[k * d + c] = scale * zk;
            }
        }
        GridPath::from_increments(d, self.level, &inc)
    }

    /// Applies `Sigma^{-1}` to a row-major increment buffer of a `d1 + d2`
    /// dimensional path.
    pub fn precision_apply(&self, increments: &[f64]) -> Result<Vec<f64>> {
        let n = self.steps();
        let d = self.d1 + self.d2;
        if increments.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "increment buffer {} vs {}",
                increments.len(),
                n * d
            )));
        }
        let mut out = vec![0.0; n * d];
        for c in 0..self.d1 {
            let col = nalgebra::DVector::from_iterator(n, (0..n).map(|k| increments[k * d + c]));
            let y = self
                .fbm_chol
                .solve_lower_triangular(&col)
                .ok_or(Error::FactorizationFailed)?;
            let x = self
                .fbm_chol
                .transpose()
                .solve_upper_triangular(&y)
                .ok_or(Error::FactorizationFailed)?;
            for k in 0..n {
                out[k * d + c] = x[k];
            }
        }
        for c in self.d1..d {
            for k in 0..n {
                out[k * d + c] = increments[k * d + c] * n as f64;
            }
        }
        Ok(out)
    }

    pub(crate) fn check_path(&self, x: &GridPath) -> Result<()> {
        if x.level() != self.level {
            return Err(Error::LevelMismatch { expected: self.level, found: x.level() });
        }
        if x.dim() != self.d1 + self.d2 {
            return Err(Error::DimensionMismatch(format!(
                "path dim {} vs driver dim {}",
                x.dim(),
                self.d1 + self.d2
            )));
        }
        Ok(())
    }
}

/// Draws driver sample `index` of the run seeded by `params.seed`.
pub fn sample_mixed_path(params: &ParamSet, factor: &CovarianceFactor, index: u64) -> Result<GridPath> {
    if factor.level != params.level || factor.d1 != params.d1 || factor.d2 != params.d2 {
        return Err(Error::LevelMismatch { expected: params.level, found: factor.level });
    }
    Ok(factor.sample(&mut rng_stream(params.seed, index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mean_stderr;

    #[test]
    fn covariance_closed_form_values() {
        assert_eq!(fbm_covariance(1.0, 1.0, 0.37), 1.0);
        assert!((fbm_covariance(0.25, 0.75, 0.5) - 0.25).abs() < 1e-15);
        assert!((fbm_covariance(0.5, 0.5, 0.4) - 0.5f64.powf(0.8)).abs() < 1e-15);
        assert!((0.5f64.powf(0.8) - 0.574_349_177_498_517_6).abs() < 1e-15);
    }

    #[test]
    fn increment_covariance_matches_differences_of_r() {
        let (level, h) = (6u32, 0.4);
        let dt = 1.0 / 64.0;
        for (k, l) in [(0usize, 0usize), (3, 7), (10, 2), (63, 0), (30, 31)] {
            let (tk, tk1, tl, tl1) = (k as f64 * dt, (k + 1) as f64 * dt, l as f64 * dt, (l + 1) as f64 * dt);
            let via_r = fbm_covariance(tk1, tl1, h) - fbm_covariance(tk1, tl, h) - fbm_covariance(tk, tl1, h)
                + fbm_covariance(tk, tl, h);
            assert!((via_r - fbm_increment_covariance(k, l, level, h)).abs() < 1e-9);
        }
    }

    #[test]
    fn factor_reconstructs_covariance() {
        let f = CovarianceFactor::build(0.4, 8, 1, 1).unwrap();
        assert!(f.reconstruction_error() < 1e-10);
    }

    #[test]
    fn precision_inverts_covariance() {
        let f = CovarianceFactor::build(0.42, 5, 1, 1).unwrap();
        let n = f.steps();
        let h: Vec<f64> = (0..2 * n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 10.0).collect();
        let u = f.precision_apply(&h).unwrap();
        for k in 0..n {
            let back: f64 = (0..n).map(|l| f.fbm_increment_cov()[(k, l)] * u[2 * l]).sum();
            assert!((back - h[2 * k]).abs() < 1e-9);
            assert!((u[2 * k + 1] / n as f64 - h[2 * k + 1]).abs() < 1e-15);
        }
    }

    #[test]
    fn empirical_moments() {
        let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 6, 11).unwrap();
        let f = CovarianceFactor::new(&params).unwrap();
        let samples = 10_000;
        let mut bm_var = Vec::with_capacity(samples);
        let mut fbm_sq = Vec::with_capacity(samples);
        let mut cross = Vec::with_capacity(samples);
        for i in 0..samples {
            let x = sample_mixed_path(&params, &f, i as u64).unwrap();
            bm_var.push(x.increment(5, 1).powi(2));
            let db = x.point(32)[0] - x.point(16)[0];
            fbm_sq.push(db * db);
            cross.push(x.increment(9, 0) * x.increment(9, 1));
        }
        let s = mean_stderr(&bm_var);
        assert!((s.mean - 1.0 / 64.0).abs() < 3.0 * s.stderr, "{s:?}");
        let s = mean_stderr(&fbm_sq);
        assert!((s.mean - 0.25f64.powf(0.8)).abs() < 3.0 * s.stderr, "{s:?}");
        let s = mean_stderr(&cross);
        assert!(s.mean.abs() < 3.0 * s.stderr, "{s:?}");
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let f = CovarianceFactor::build(0.4, 4, 1, 1).unwrap();
        let a = f.sample(&mut rng_stream(3, 9));
        let b = f.sample(&mut rng_stream(3, 9));
        let c = f.sample(&mut rng_stream(3, 10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
