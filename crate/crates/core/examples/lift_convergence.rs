//! Dyadic-distance moments between coarse lifts and the reference lift,
//! with the least-squares slope of `log2` moment against the level.

use mixrough::linalg::regression_slope;
use mixrough::rough::lift_convergence_experiment;
use mixrough::ParamSet;

fn main() -> mixrough::Result<()> {
    let params = ParamSet::new(0.4, 2.63, 1.0 / 0.89, 3.0, 1.88, 1, 1, 1, 9, 0)?;
    let ms: Vec<u32> = (3..=7).collect();
    let rows = lift_convergence_experiment(&params, 200, &ms)?;
    println!("{:>3} {:>2} {:>14} {:>12}", "m", "j", "moment", "stderr");
    for r in &rows {
        println!("{:>3} {:>2} {:>14.6e} {:>12.3e}", r.m, r.j, r.mean_distance, r.stderr);
    }
    for j in [1u8, 2] {
        let (x, y): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.j == j).map(|r| (r.m as f64, r.mean_distance.log2())).unzip();
        println!("j = {j}: slope {:.4}", regression_slope(&x, &y));
    }
    println!("reference -(Hp-1)/2 = {:.4}", -(params.hurst * params.p - 1.0) / 2.0);
    Ok(())
}
