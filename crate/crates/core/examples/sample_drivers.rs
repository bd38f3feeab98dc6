//! Draws mixed fBm/Bm driver paths and compares the empirical increment
//! variance of the fractional block with `|t - s|^{2H}`.

use mixrough::drivers::{fbm_covariance, sample_mixed_path};
use mixrough::linalg::mean_stderr;
use mixrough::{CovarianceFactor, ParamSet};

fn main() -> mixrough::Result<()> {
    let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 8, 7)?;
    let factor = CovarianceFactor::new(&params)?;
    println!("Cholesky reconstruction error: {:.2e}", factor.reconstruction_error());

    let samples = 4000;
    let paths: Vec<_> = (0..samples as u64).map(|i| sample_mixed_path(&params, &factor, i)).collect::<Result<_, _>>()?;
    println!("{:>6} {:>6} {:>12} {:>12} {:>10}", "s", "t", "empirical", "exact", "stderr");
    for (ks, kt) in [(0usize, 256usize), (32, 96), (100, 101), (10, 200)] {
        let sq: Vec<f64> = paths.iter().map(|p| (p.point(kt)[0] - p.point(ks)[0]).powi(2)).collect();
        let est = mean_stderr(&sq);
        let (s, t) = (ks as f64 / 256.0, kt as f64 / 256.0);
        let exact = fbm_covariance(t, t, params.hurst) + fbm_covariance(s, s, params.hurst)
            - 2.0 * fbm_covariance(s, t, params.hurst);
        println!("{s:>6.3} {t:>6.3} {:>12.6} {exact:>12.6} {:>10.2e}", est.mean, est.stderr);
    }
    let w_var = mean_stderr(&paths.iter().map(|p| p.terminal()[1].powi(2)).collect::<Vec<_>>());
    println!("Brownian block: E[w_1^2] = {:.4} +- {:.4} (exact 1)", w_var.mean, w_var.stderr);
    Ok(())
}
