//! Parameter window shared by the whole pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated exponents, dimensions and grid resolution.
///
/// Construct through [`ParamSet::new`] (or [`ParamSet::from_recipe`]); the
/// fields are public for reading but a hand-built value skips validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    /// Hurst exponent of the fractional block.
    #[serde(rename = "H")]
    pub hurst: f64,
    /// Rough-path variation exponent.
    pub p: f64,
    /// Cameron–Martin variation exponent.
    pub q: f64,
    /// Regularity exponent of the functional.
    pub p_prime: f64,
    /// Weight exponent of the dyadic metrics.
    pub kappa: f64,
    /// Number of fractional driver coordinates.
    pub d1: usize,
    /// Number of Brownian driver coordinates.
    pub d2: usize,
    /// State dimension.
    pub n: usize,
    /// Dyadic level `M` (grid of `2^M` intervals).
    pub level: u32,
    pub seed: u64,
}

/// Largest dyadic level accepted (dense covariance factors beyond this are
/// impractical).
pub const MAX_LEVEL: u32 = 16;

impl ParamSet {
    /// Validates every inequality of the window and returns the first
    /// violated one by name.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        hurst: f64,
        p: f64,
        q: f64,
        p_prime: f64,
        kappa: f64,
        d1: usize,
        d2: usize,
        n: usize,
        level: u32,
        seed: u64,
    ) -> Result<Self> {
        for (name, v) in [
            ("H", hurst),
            ("p", p),
            ("q", q),
            ("p_prime", p_prime),
            ("kappa", kappa),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(name.to_string()));
            }
        }
        let inv_p = 1.0 / p;
        let inv_q = 1.0 / q;
        let floor_term = 1.0 / ((1.0 / hurst).floor() + 1.0);
        let checks: [(&str, bool); 19] = [
            ("H>1/3", hurst > 1.0 / 3.0),
            ("H<1/2", hurst < 0.5),
            ("p>2", p > 2.0),
            ("p<3", p < 3.0),
            ("q>1", q > 1.0),
            ("q<2", q < 2.0),
            ("p'>1/H", p_prime > 1.0 / hurst),
            ("1/p<H", inv_p < hurst),
            ("1/p>1/p'", inv_p > 1.0 / p_prime),
            ("1/p>1/(floor(1/H)+1)", inv_p > floor_term),
            ("1/q<H+1/2", inv_q < hurst + 0.5),
            ("1/p+1/q>1", inv_p + inv_q > 1.0),
            ("1/q-1/p>1/2", inv_q - inv_p > 0.5),
            ("Hp>1", hurst * p > 1.0),
            ("kappa>p-1", kappa > p - 1.0),
            ("level>=1", level >= 1 && level <= MAX_LEVEL),
            ("d1>=1", d1 >= 1),
            ("d2>=1", d2 >= 1),
            ("n>=1", n >= 1),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(Error::ConstraintViolated((*name).to_string()));
        }
        Ok(Self {
            hurst,
            p,
            q,
            p_prime,
            kappa,
            d1,
            d2,
            n,
            level,
            seed,
        })
    }

    /// Builds the family `1/p = H - 2e`, `1/q = H + 1/2 - e` with the default
    /// `p'` and `kappa`.
    pub fn from_recipe(hurst: f64, e: f64, d1: usize, d2: usize, n: usize, level: u32, seed: u64) -> Result<Self> {
        let p = 1.0 / (hurst - 2.0 * e);
        let q = 1.0 / (hurst + 0.5 - e);
        Self::new(
            hurst,
            p,
            q,
            default_p_prime(hurst),
            default_kappa(p),
            d1,
            d2,
            n,
            level,
            seed,
        )
    }

    /// Re-runs validation on the stored fields.
    pub fn revalidate(&self) -> Result<Self> {
        Self::new(
            self.hurst,
            self.p,
            self.q,
            self.p_prime,
            self.kappa,
            self.d1,
            self.d2,
            self.n,
            self.level,
            self.seed,
        )
    }

    /// `delta = 1/q`, the Sobolev index used for the fractional basis weights.
    pub fn delta(&self) -> f64 {
        1.0 / self.q
    }

    /// Total driver dimension `d1 + d2`.
    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    /// Number of grid intervals `2^M`.
    pub fn steps(&self) -> usize {
        1usize << self.level
    }

    pub fn with_level(&self, level: u32) -> Result<Self> {
        Self { level, ..*self }.revalidate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

pub fn default_kappa(p: f64) -> f64 {
    p - 1.0 + 0.25
}

pub fn default_p_prime(hurst: f64) -> f64 {
    1.0 / hurst + 0.5
}

/// Supremum of `e` for which the recipe family stays inside the window,
/// given `p'`.
pub fn recipe_eps_max(hurst: f64, p_prime: f64) -> f64 {
    let floor_term = 1.0 / ((1.0 / hurst).floor() + 1.0);
    [
        (hurst - 1.0 / p_prime) / 2.0,
        (hurst - floor_term) / 2.0,
        (2.0 * hurst - 0.5) / 3.0,
        (hurst - 1.0 / 3.0) / 2.0,
        hurst,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}
