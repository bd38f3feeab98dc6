use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Itô-type cross integrals between the fractional block `b` and the
/// Brownian block `w` over grid indices `[s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossIntegrals {
    /// `I[b,w]`, `d1 x d2` row-major: left-point sums of `b_{s,t_k} dw_k`.
    pub bw: Vec<f64>,
    /// `I[w,b]`, `d2 x d1` row-major: `w_{st} (x) b_{st} - sum dw_k (x) b_{s,t_k}`.
    pub wb: Vec<f64>,
    pub d1: usize,
    pub d2: usize,
}

pub fn cross_integrals(b: &GridPath, w: &GridPath, s: usize, t: usize) -> Result<CrossIntegrals> {
    if b.level() != w.level() {
        return Err(Error::LevelMismatch { expected: b.level(), found: w.level() });
    }
    if s > t || t > b.steps() {
        return Err(Error::IndexOutOfRange(format!("interval [{s}, {t}]")));
    }
    let (d1, d2) = (b.dim(), w.dim());
    let mut left = vec![0.0; d1 * d2];
    for k in s..t {
        for i in 0..d1 {
            let bsk = b.point(k)[i] - b.point(s)[i];
            for j in 0..d2 {
                left[i * d2 + j] += bsk * w.increment(k, j);
            }
        }
    }
    let mut wb = vec![0.0; d2 * d1];
    for j in 0..d2 {
        let wst = w.point(t)[j] - w.point(s)[j];
        for i in 0..d1 {
            let bst = b.point(t)[i] - b.point(s)[i];
            wb[j * d1 + i] = wst * bst - left[i * d2 + j];
        }
    }
    Ok(CrossIntegrals { bw: left, wb, d1, d2 })
}
