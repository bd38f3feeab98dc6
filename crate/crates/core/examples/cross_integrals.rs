//! Cross integrals between the fractional and Brownian blocks and the
//! integration-by-parts identity `I[b,w]^{ij} + I[w,b]^{ji} = b^i_{st} w^j_{st}`.

use mixrough::drivers::{sample_mixed_path, GridPath};
use mixrough::rough::cross_integrals;
use mixrough::{CovarianceFactor, ParamSet};

fn main() -> mixrough::Result<()> {
    let params = ParamSet::from_recipe(0.4, 0.01, 2, 1, 1, 8, 11)?;
    let factor = CovarianceFactor::new(&params)?;
    let x = sample_mixed_path(&params, &factor, 0)?;
    let split = |range: std::ops::Range<usize>| {
        let vals: Vec<f64> = (0..=x.steps()).flat_map(|k| x.point(k)[range.clone()].to_vec()).collect();
        GridPath::from_values(range.len(), x.level(), vals)
    };
    let (b, w) = (split(0..2)?, split(2..3)?);

    for (s, t) in [(0, 256), (40, 90)] {
        let ci = cross_integrals(&b, &w, s, t)?;
        let mut worst = 0.0f64;
        for i in 0..ci.d1 {
            for j in 0..ci.d2 {
                let lhs = ci.bw[i * ci.d2 + j] + ci.wb[j * ci.d1 + i];
                let rhs = (b.point(t)[i] - b.point(s)[i]) * (w.point(t)[j] - w.point(s)[j]);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        println!("[{s}, {t}]: I[b,w] = {:?}, identity defect {worst:.1e}", ci.bw);
    }
    Ok(())
}
