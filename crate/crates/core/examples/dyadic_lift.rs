//! Level-2 lift of a sampled driver: Chen's identity across dyadic levels and
//! the geometric symmetry `Sym(X^2) = X^1 (x) X^1 / 2`.

use mixrough::drivers::sample_mixed_path;
use mixrough::rough::{chen_compose, dyadic_lift};
use mixrough::{CovarianceFactor, ParamSet};

fn main() -> mixrough::Result<()> {
    let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 8, 3)?;
    let factor = CovarianceFactor::new(&params)?;
    let x = sample_mixed_path(&params, &factor, 0)?;
    let lift = dyadic_lift(&x);
    let d = lift.dim();

    let mut chen = 0.0f64;
    let mut sym = 0.0f64;
    for (s, u, t) in [(0, 64, 256), (13, 100, 201), (5, 6, 7), (0, 128, 129)] {
        let a = lift.level2_between(s, u)?;
        let b = lift.level2_between(u, t)?;
        let composed = chen_compose(&a, &b, &lift.level1_between(s, u), &lift.level1_between(u, t));
        let direct = lift.level2_between(s, t)?;
        chen = composed.iter().zip(&direct).fold(chen, |m, (p, q)| m.max((p - q).abs()));

        let inc = lift.level1_between(s, t);
        for i in 0..d {
            for j in 0..d {
                let s_ij = 0.5 * (direct[i * d + j] + direct[j * d + i]);
                sym = sym.max((s_ij - 0.5 * inc[i] * inc[j]).abs());
            }
        }
    }
    println!("max Chen defect:      {chen:.2e}");
    println!("max symmetry defect:  {sym:.2e}");
    let l2 = lift.level2_between(0, lift.steps())?;
    println!("Levy area over [0,1]: {:.6}", 0.5 * (l2[1] - l2[2]));
    Ok(())
}
