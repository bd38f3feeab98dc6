use super::lift::{DyadicLevel, RoughPath};
use crate::config::ParamSet;
use crate::error::{Error, Result};

/// Exponents and depth of the weighted dyadic metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicMetricConfig {
    pub p: f64,
    pub kappa: f64,
    /// Largest level `n` in the dyadic sum.
    pub level_cap: u32,
}

impl DyadicMetricConfig {
    pub fn from_params(params: &ParamSet) -> Self {
        Self { p: params.p, kappa: params.kappa, level_cap: params.level }
    }
}

/// Weighted dyadic sum `sum_{n=1}^{cap} n^kappa sum_l |X^j - Y^j|^{p/j}`
/// over precomputed pyramids (index = level). This is `D_{j,p}^{p/j}`.
pub fn djp_moment(x: &[DyadicLevel], y: Option<&[DyadicLevel]>, j: u8, cfg: &DyadicMetricConfig) -> Result<f64> {
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidSpec(format!("metric order j must be 1 or 2, got {j}")));
    }
    let top = x.len() as u32 - 1;
    if let Some(y) = y {
        if y.len() != x.len() {
            return Err(Error::LevelMismatch { expected: top, found: y.len() as u32 - 1 });
        }
    }
    if cfg.level_cap > top {
        return Err(Error::LevelMismatch { expected: top, found: cfg.level_cap });
    }
    let expo = cfg.p / j as f64;
    let mut total = 0.0;
    for n in 1..=cfg.level_cap {
        let lx = &x[n as usize];
        let ly = y.map(|y| &y[n as usize]);
        let mut level_sum = 0.0;
        for l in 0..lx.intervals() {
            let (a, b) = match j {
                1 => (lx.first(l), ly.map(|y| y.first(l))),
                _ => (lx.second(l), ly.map(|y| y.second(l))),
            };
            let sq: f64 = match b {
                Some(b) => a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum(),
                None => a.iter().map(|u| u * u).sum(),
            };
            level_sum += sq.sqrt().powf(expo);
        }
        total += (n as f64).powf(cfg.kappa) * level_sum;
    }
    Ok(total)
}

/// `D_{j,p}(X, Y)`; with `y = None` the distance to the zero path.
pub fn djp_distance(x: &RoughPath, y: Option<&RoughPath>, j: u8, cfg: &DyadicMetricConfig) -> Result<f64> {
    if let Some(y) = y {
        if y.level() != x.level() {
            return Err(Error::LevelMismatch { expected: x.level(), found: y.level() });
        }
    }
    let px = x.pyramid();
    let py = y.map(|y| y.pyramid());
    let m = djp_moment(&px, py.as_deref(), j, cfg)?;
    Ok(m.powf(j as f64 / cfg.p))
}

/// Upper-bound surrogate `max(D1, D1 (D1(X) + D1(Y)), D2)` for the
/// inhomogeneous p-variation distance, with unit constant.
pub fn dp_distance_bound(x: &RoughPath, y: &RoughPath, cfg: &DyadicMetricConfig) -> Result<f64> {
    let d1 = djp_distance(x, Some(y), 1, cfg)?;
    let d2 = djp_distance(x, Some(y), 2, cfg)?;
    let dx = djp_distance(x, None, 1, cfg)?;
    let dy = djp_distance(y, None, 1, cfg)?;
    Ok(d1.max(d1 * (dx + dy)).max(d2))
}

/// Homogeneous norm surrogate `D_{1,p}(X) + D_{2,p}(X)^{1/2}`.
pub fn homogeneous_norm_surrogate(x: &RoughPath, cfg: &DyadicMetricConfig) -> Result<f64> {
    let pyr = x.pyramid();
    let d1 = djp_moment(&pyr, None, 1, cfg)?.powf(1.0 / cfg.p);
    let d2 = djp_moment(&pyr, None, 2, cfg)?.powf(2.0 / cfg.p);
    Ok(d1 + d2.sqrt())
}

/// Largest grid size accepted by [`p_variation_exact`].
pub const P_VARIATION_MAX_POINTS: usize = 257;

/// Exact `p`-variation to the power `p` of a sampled path (points are rows of
/// length `dim`), maximized over all partitions of the sample points by
/// dynamic programming. Quadratic cost, so capped at 257 points.
pub fn p_variation_exact(points: &[f64], dim: usize, p: f64) -> Result<f64> {
    let n = points.len() / dim;
    if n > P_VARIATION_MAX_POINTS {
        return Err(Error::InvalidSpec(format!("exact p-variation limited to {P_VARIATION_MAX_POINTS} points")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let dist = |a: usize, b: usize| -> f64 {
        (0..dim).map(|c| (points[a * dim + c] - points[b * dim + c]).powi(2)).sum::<f64>().sqrt()
    };
    let mut best = vec![0.0f64; n];
    for t in 1..n {
        best[t] = (0..t).map(|s| best[s] + dist(s, t).powf(p)).fold(0.0, f64::max);
    }
    Ok(best[n - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::GridPath;
    use crate::rough::dyadic_lift;

    #[test]
    fn constant_slope_closed_form() {
        let cfg = DyadicMetricConfig { p: 2.5, kappa: 1.75, level_cap: 6 };
        let x = dyadic_lift(&GridPath::from_fn(1, 6, |t, o| o[0] = t));
        let y = dyadic_lift(&GridPath::from_fn(1, 6, |t, o| o[0] = 2.0 * t));
        let got = djp_distance(&x, Some(&y), 1, &cfg).unwrap();
        let oracle: f64 = (1..=6)
            .map(|n| (n as f64).powf(1.75) * 2f64.powi(n) * 2f64.powi(-n).powf(2.5))
            .sum::<f64>()
            .powf(1.0 / 2.5);
        assert!((got - oracle).abs() < 1e-12 * oracle);
        assert_eq!(djp_distance(&x, Some(&x), 2, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_cap_and_level_mismatch() {
        let x = dyadic_lift(&GridPath::from_fn(1, 3, |t, o| o[0] = t));
        let y = dyadic_lift(&GridPath::from_fn(1, 4, |t, o| o[0] = t));
        let cfg = DyadicMetricConfig { p: 2.5, kappa: 1.75, level_cap: 3 };
        assert!(djp_distance(&x, Some(&y), 1, &cfg).is_err());
        let cfg = DyadicMetricConfig { level_cap: 4, ..cfg };
        assert!(djp_distance(&x, None, 1, &cfg).is_err());
        assert!(djp_distance(&y, None, 3, &cfg).is_err());
    }

    #[test]
    fn p_variation_simple_paths() {
        // monotone path: for p >= 1 the single jump is optimal
        let mono: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        assert!((p_variation_exact(&mono, 1, 2.0).unwrap() - 1.0).abs() < 1e-14);
        // zig-zag 0,1,0,1: three unit jumps
        let zz = [0.0, 1.0, 0.0, 1.0];
        assert!((p_variation_exact(&zz, 1, 2.5).unwrap() - 3.0).abs() < 1e-14);
        assert!(p_variation_exact(&vec![0.0; 300], 1, 2.0).is_err());
    }
}
