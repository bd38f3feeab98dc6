//! Sample means of `exp(c N^2)` for the homogeneous-norm surrogate `N` of
//! the lifted driver, and the largest `c` that looks integrable.

use mixrough::montecarlo::fernique_probe;
use mixrough::ParamSet;

fn main() -> mixrough::Result<()> {
    let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 8, 0)?;
    let grid = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
    let report = fernique_probe(&params, &grid, 4000)?;
    println!("{:>6} {:>14} {:>12} {:>14} {:>7}", "c", "mean", "stderr", "half mean", "stable");
    for r in &report.rows {
        println!("{:>6} {:>14.6e} {:>12.3e} {:>14.6e} {:>7}", r.c, r.mean, r.stderr, r.half_mean, r.stable);
    }
    match report.largest_stable_c {
        Some(c) => println!("largest stable c: {c}"),
        None => println!("no stable c on this grid"),
    }
    Ok(())
}
